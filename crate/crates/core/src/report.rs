//! Text tables and JSON/GeoJSON renderings of pipeline results.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::{json, Map, Value};

use crate::absa::Aspect;
use crate::aggregate::{BoxPlot, FacilityAspectProfile};
use crate::corpus::Region;
use crate::stats::{stars, RegressionFit, VifReport, INTERCEPT};

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Side-by-side coefficient table: each term shows the estimate with
/// significance stars and the standard error in parentheses beneath it.
pub fn fit_table(title: &str, fits: &[(&str, &RegressionFit)]) -> String {
    let mut terms: Vec<&str> = Vec::new();
    for (_, fit) in fits {
        for c in &fit.columns {
            if c != INTERCEPT && !terms.contains(&c.as_str()) {
                terms.push(c);
            }
        }
    }
    if fits.iter().any(|(_, f)| f.index(INTERCEPT).is_some()) {
        terms.push(INTERCEPT);
    }

    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    for term in &terms {
        let (mut est, mut se) = (Vec::new(), Vec::new());
        for (_, fit) in fits {
            match fit.term(term) {
                Some((b, s, _, p)) => {
                    est.push(format!("{b:.3}{}", stars(p)));
                    se.push(format!("({s:.3})"));
                }
                None => {
                    est.push(String::new());
                    se.push(String::new());
                }
            }
        }
        rows.push((term.to_string(), est));
        rows.push((String::new(), se));
    }
    rows.push(("Observations".into(), fits.iter().map(|(_, f)| f.n.to_string()).collect()));
    rows.push(("R-squared".into(), fits.iter().map(|(_, f)| format!("{:.3}", f.r2)).collect()));
    rows.push(("Adj. R-squared".into(), fits.iter().map(|(_, f)| format!("{:.3}", f.adj_r2)).collect()));
    rows.push((
        "F-statistic".into(),
        fits.iter()
            .map(|(_, f)| f.f.map(|v| format!("{v:.1}{}", f.f_p.map(stars).unwrap_or(""))).unwrap_or_default())
            .collect(),
    ));

    let label_w = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0).max(8);
    let col_w: Vec<usize> = (0..fits.len())
        .map(|j| rows.iter().map(|(_, c)| c[j].chars().count()).chain([fits[j].0.chars().count()]).max().unwrap_or(0))
        .collect();
    let total = label_w + col_w.iter().map(|w| w + 2).sum::<usize>();

    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", "=".repeat(total));
    let _ = write!(out, "{:label_w$}", "");
    for (j, (name, _)) in fits.iter().enumerate() {
        let _ = write!(out, "  {name:>w$}", w = col_w[j]);
    }
    out.push('\n');
    let _ = writeln!(out, "{}", "-".repeat(total));
    for (i, (label, cells)) in rows.iter().enumerate() {
        if i == terms.len() * 2 {
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
        let _ = write!(out, "{label:label_w$}");
        for (j, c) in cells.iter().enumerate() {
            let _ = write!(out, "  {c:>w$}", w = col_w[j]);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{}", "=".repeat(total));
    let _ = writeln!(out, "Standard errors in parentheses. ** p < 0.05, *** p < 0.001.");
    out
}

pub fn vif_table(report: &VifReport) -> String {
    let w = report.entries.iter().map(|e| e.column.chars().count()).max().unwrap_or(0).max(8);
    let mut out = format!("{:w$}  {:>10}\n", "Variable", "VIF");
    for e in &report.entries {
        let v = if e.infinite { "inf".to_string() } else { format!("{:.3}", e.vif) };
        let _ = writeln!(out, "{:w$}  {v:>10}", e.column);
    }
    out
}

/// RFC 7946 FeatureCollection with one Point per facility.
pub fn facilities_geojson(profiles: &[FacilityAspectProfile]) -> Value {
    let features: Vec<Value> = profiles
        .iter()
        .map(|p| {
            let mut props = Map::new();
            props.insert("facility_id".into(), json!(p.facility_id));
            props.insert("name".into(), json!(p.name));
            props.insert("region".into(), json!(p.region));
            props.insert("mean_rating".into(), num(p.mean_rating));
            props.insert("n_text_reviews".into(), json!(p.n_text_reviews));
            for a in Aspect::ALL {
                props.insert(format!("{}_mean", a.key()), p.mean(a).map_or(Value::Null, num));
                props.insert(format!("{}_count", a.key()), json!(p.count(a)));
            }
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [num(p.longitude), num(p.latitude)]},
                "properties": Value::Object(props),
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

fn box_json(values: &[f64]) -> Value {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    json!({
        "values": sorted.iter().copied().map(num).collect::<Vec<_>>(),
        "stats": BoxPlot::from_values(&sorted),
    })
}

/// Per-region arrays of facility-level values with their box-plot summary.
pub fn boxplots_json(profiles: &[FacilityAspectProfile]) -> Value {
    let mut by_region: BTreeMap<Region, Vec<&FacilityAspectProfile>> = BTreeMap::new();
    for p in profiles {
        by_region.entry(p.region).or_default().push(p);
    }
    let regions: Vec<Value> = by_region
        .iter()
        .map(|(region, members)| {
            let mut aspects = Map::new();
            for a in Aspect::ALL {
                let values: Vec<f64> = members.iter().filter_map(|p| p.mean(a)).collect();
                aspects.insert(a.label().into(), box_json(&values));
            }
            let ratings: Vec<f64> = members.iter().map(|p| p.mean_rating).collect();
            json!({
                "region": region,
                "n_facilities": members.len(),
                "rating": box_json(&ratings),
                "aspects": Value::Object(aspects),
            })
        })
        .collect();
    json!({ "regions": regions })
}
