//! Block-group socioeconomic covariates: loading, point-in-polygon
//! assignment and the covariate join.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::aggregate::FacilityAspectProfile;

#[derive(Debug, Error)]
pub enum CensusError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("geojson: {0}")]
    GeoJson(String),
    #[error("`{0}` has zero variance")]
    ZeroVariance(String),
    #[error("`{0}` needs at least two values")]
    TooFewValues(String),
}

/// Socioeconomic covariates in regression-table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    PopulationDensity,
    MedianIncome,
    RentToIncomeRatio,
    GiniIndex,
    HouseholdBelowPovertyRate,
    NoInsuranceRate,
    UnemploymentRate,
}

impl Covariate {
    pub const ALL: [Covariate; 7] = [
        Covariate::PopulationDensity,
        Covariate::MedianIncome,
        Covariate::RentToIncomeRatio,
        Covariate::GiniIndex,
        Covariate::HouseholdBelowPovertyRate,
        Covariate::NoInsuranceRate,
        Covariate::UnemploymentRate,
    ];

    /// CSV column name.
    pub fn key(self) -> &'static str {
        match self {
            Covariate::PopulationDensity => "population_density",
            Covariate::MedianIncome => "median_income",
            Covariate::RentToIncomeRatio => "rent_to_income_ratio",
            Covariate::GiniIndex => "gini_index",
            Covariate::HouseholdBelowPovertyRate => "household_below_poverty_rate",
            Covariate::NoInsuranceRate => "no_insurance_rate",
            Covariate::UnemploymentRate => "unemployment_rate",
        }
    }

    pub fn table_label(self) -> &'static str {
        match self {
            Covariate::PopulationDensity => "Population Density",
            Covariate::MedianIncome => "Median Income",
            Covariate::RentToIncomeRatio => "Rent-to-Income Ratio",
            Covariate::GiniIndex => "GINI Index",
            Covariate::HouseholdBelowPovertyRate => "Household Below Poverty Rate",
            Covariate::NoInsuranceRate => "No Insurance Rate",
            Covariate::UnemploymentRate => "Unemployment Rate",
        }
    }

    fn valid(self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            Covariate::PopulationDensity | Covariate::MedianIncome | Covariate::RentToIncomeRatio => v >= 0.0,
            Covariate::GiniIndex
            | Covariate::HouseholdBelowPovertyRate
            | Covariate::NoInsuranceRate
            | Covariate::UnemploymentRate => (0.0..=1.0).contains(&v),
        }
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbgProfile {
    pub cbg_id: String,
    /// Persons per square km.
    pub population_density: f64,
    /// USD per year.
    pub median_income: f64,
    pub rent_to_income_ratio: f64,
    pub gini_index: f64,
    pub household_below_poverty_rate: f64,
    pub no_insurance_rate: f64,
    pub unemployment_rate: f64,
}

impl CbgProfile {
    pub fn get(&self, c: Covariate) -> f64 {
        match c {
            Covariate::PopulationDensity => self.population_density,
            Covariate::MedianIncome => self.median_income,
            Covariate::RentToIncomeRatio => self.rent_to_income_ratio,
            Covariate::GiniIndex => self.gini_index,
            Covariate::HouseholdBelowPovertyRate => self.household_below_poverty_rate,
            Covariate::NoInsuranceRate => self.no_insurance_rate,
            Covariate::UnemploymentRate => self.unemployment_rate,
        }
    }

    fn set(&mut self, c: Covariate, v: f64) {
        let slot = match c {
            Covariate::PopulationDensity => &mut self.population_density,
            Covariate::MedianIncome => &mut self.median_income,
            Covariate::RentToIncomeRatio => &mut self.rent_to_income_ratio,
            Covariate::GiniIndex => &mut self.gini_index,
            Covariate::HouseholdBelowPovertyRate => &mut self.household_below_poverty_rate,
            Covariate::NoInsuranceRate => &mut self.no_insurance_rate,
            Covariate::UnemploymentRate => &mut self.unemployment_rate,
        };
        *slot = v;
    }
}

pub fn is_cbg_id(s: &str) -> bool {
    s.len() == 12 && s.bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CbgTable {
    pub profiles: BTreeMap<String, CbgProfile>,
    /// Rows rejected for a bad id, unparsable or out-of-range value, or a
    /// repeated id.
    pub rejected: usize,
}

fn open(path: &Path) -> Result<std::fs::File, CensusError> {
    std::fs::File::open(path).map_err(|source| CensusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, CensusError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CensusError::MissingColumn(name.to_string()))
}

pub fn read_cbg_profiles<R: Read>(reader: R) -> Result<CbgTable, CensusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = column(&headers, "cbg_id")?;
    let cols: Vec<(Covariate, usize)> = Covariate::ALL
        .iter()
        .map(|c| column(&headers, c.key()).map(|i| (*c, i)))
        .collect::<Result<_, _>>()?;

    let mut table = CbgTable::default();
    for record in rdr.records() {
        let Ok(record) = record else {
            table.rejected += 1;
            continue;
        };
        let id = record.get(id_col).unwrap_or("").trim();
        if !is_cbg_id(id) || table.profiles.contains_key(id) {
            table.rejected += 1;
            continue;
        }
        let mut profile = CbgProfile {
            cbg_id: id.to_string(),
            population_density: 0.0,
            median_income: 0.0,
            rent_to_income_ratio: 0.0,
            gini_index: 0.0,
            household_below_poverty_rate: 0.0,
            no_insurance_rate: 0.0,
            unemployment_rate: 0.0,
        };
        let ok = cols.iter().all(|(c, i)| {
            match record.get(*i).and_then(|s| s.trim().parse::<f64>().ok()) {
                Some(v) if c.valid(v) => {
                    profile.set(*c, v);
                    true
                }
                _ => false,
            }
        });
        if ok {
            table.profiles.insert(id.to_string(), profile);
        } else {
            table.rejected += 1;
        }
    }
    Ok(table)
}

pub fn load_cbg_profiles(path: &Path) -> Result<CbgTable, CensusError> {
    read_cbg_profiles(open(path)?)
}

pub fn write_cbg_profiles<W: std::io::Write>(out: W, profiles: &[CbgProfile]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cbg_id"];
    header.extend(Covariate::ALL.iter().map(|c| c.key()));
    w.write_record(&header)?;
    for p in profiles {
        let mut row = vec![p.cbg_id.clone()];
        row.extend(Covariate::ALL.iter().map(|c| p.get(*c).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `(longitude, latitude)` pairs, as in GeoJSON.
pub type Ring = Vec<[f64; 2]>;

/// Outer ring followed by holes.
pub type Polygon = Vec<Ring>;

#[derive(Debug, Clone, PartialEq)]
pub struct CbgGeometry {
    pub cbg_id: String,
    pub polygons: Vec<Polygon>,
    bbox: [f64; 4],
}

impl CbgGeometry {
    /// Rings must be closed and have at least three distinct vertices.
    pub fn new(cbg_id: impl Into<String>, polygons: Vec<Polygon>) -> Result<Self, String> {
        if polygons.is_empty() || polygons.iter().any(Vec::is_empty) {
            return Err("empty polygon".into());
        }
        let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for ring in polygons.iter().flatten() {
            if ring.len() < 4 || ring.first() != ring.last() {
                return Err("ring is not closed".into());
            }
            if ring.iter().flatten().any(|v| !v.is_finite()) {
                return Err("non-finite coordinate".into());
            }
            let mut distinct: Vec<[u64; 2]> = ring[..ring.len() - 1].iter().map(|p| [p[0].to_bits(), p[1].to_bits()]).collect();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() < 3 {
                return Err("ring has fewer than three distinct vertices".into());
            }
            for p in ring {
                bbox[0] = bbox[0].min(p[0]);
                bbox[1] = bbox[1].min(p[1]);
                bbox[2] = bbox[2].max(p[0]);
                bbox[3] = bbox[3].max(p[1]);
            }
        }
        Ok(CbgGeometry {
            cbg_id: cbg_id.into(),
            polygons,
            bbox,
        })
    }

    /// Even-odd containment over all rings; points on any edge count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        if x < self.bbox[0] || x > self.bbox[2] || y < self.bbox[1] || y > self.bbox[3] {
            return false;
        }
        let mut inside = false;
        for ring in self.polygons.iter().flatten() {
            for w in ring.windows(2) {
                let ([x1, y1], [x2, y2]) = (w[0], w[1]);
                if on_segment(x, y, x1, y1, x2, y2) {
                    return true;
                }
                if (y1 > y) != (y2 > y) && x < x1 + (y - y1) * (x2 - x1) / (y2 - y1) {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(x: f64, y: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> bool {
    let cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
    cross == 0.0 && x >= x1.min(x2) && x <= x1.max(x2) && y >= y1.min(y2) && y <= y1.max(y2)
}

/// Containing block group, smallest id on ties.
pub fn assign_cbg<'a>(longitude: f64, latitude: f64, geometries: &'a [CbgGeometry]) -> Option<&'a str> {
    if !longitude.is_finite() || !latitude.is_finite() {
        return None;
    }
    geometries
        .iter()
        .filter(|g| g.contains(longitude, latitude))
        .map(|g| g.cbg_id.as_str())
        .min()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeometrySet {
    pub geometries: Vec<CbgGeometry>,
    /// Features without a usable id or with an invalid ring.
    pub rejected: usize,
}

fn parse_ring(v: &Value) -> Option<Ring> {
    v.as_array()?
        .iter()
        .map(|p| {
            let p = p.as_array()?;
            if p.len() < 2 {
                return None;
            }
            Some([p[0].as_f64()?, p[1].as_f64()?])
        })
        .collect()
}

fn parse_polygon(v: &Value) -> Option<Polygon> {
    v.as_array()?.iter().map(parse_ring).collect()
}

fn parse_feature(feature: &Value) -> Option<CbgGeometry> {
    let id = match feature.get("properties")?.get("GEOID")? {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return None,
    };
    let geometry = feature.get("geometry")?;
    let coords = geometry.get("coordinates")?;
    let polygons = match geometry.get("type")?.as_str()? {
        "Polygon" => vec![parse_polygon(coords)?],
        "MultiPolygon" => coords.as_array()?.iter().map(parse_polygon).collect::<Option<_>>()?,
        _ => return None,
    };
    CbgGeometry::new(id, polygons).ok()
}

pub fn parse_geometries(text: &str) -> Result<GeometrySet, CensusError> {
    let root: Value = serde_json::from_str(text).map_err(|e| CensusError::GeoJson(e.to_string()))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(CensusError::GeoJson("expected a FeatureCollection".into()));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| CensusError::GeoJson("missing `features` array".into()))?;
    let mut set = GeometrySet::default();
    for f in features {
        match parse_feature(f) {
            Some(g) => set.geometries.push(g),
            None => set.rejected += 1,
        }
    }
    set.geometries.sort_by(|a, b| a.cbg_id.cmp(&b.cbg_id));
    Ok(set)
}

pub fn load_geometries(path: &Path) -> Result<GeometrySet, CensusError> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|source| CensusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_geometries(&text)
}

pub fn geometries_to_geojson(geometries: &[CbgGeometry]) -> Value {
    let features: Vec<Value> = geometries
        .iter()
        .map(|g| {
            let geometry = if g.polygons.len() == 1 {
                json!({"type": "Polygon", "coordinates": g.polygons[0]})
            } else {
                json!({"type": "MultiPolygon", "coordinates": g.polygons})
            };
            json!({"type": "Feature", "properties": {"GEOID": g.cbg_id}, "geometry": geometry})
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

/// Precomputed `facility_id,cbg_id` lookup.
pub fn read_join_table<R: Read>(reader: R) -> Result<(BTreeMap<String, String>, usize), CensusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (fc, cc) = (column(&headers, "facility_id")?, column(&headers, "cbg_id")?);
    let mut map = BTreeMap::new();
    let mut rejected = 0;
    for record in rdr.records() {
        let Ok(record) = record else {
            rejected += 1;
            continue;
        };
        let (f, c) = (record.get(fc).unwrap_or("").trim(), record.get(cc).unwrap_or("").trim());
        if f.is_empty() || !is_cbg_id(c) || map.insert(f.to_string(), c.to_string()).is_some() {
            rejected += 1;
        }
    }
    Ok((map, rejected))
}

pub fn load_join_table(path: &Path) -> Result<(BTreeMap<String, String>, usize), CensusError> {
    read_join_table(open(path)?)
}

/// How facilities are matched to block groups.
#[derive(Debug, Clone, Copy)]
pub enum CbgSource<'a> {
    Geometry(&'a [CbgGeometry]),
    Lookup(&'a BTreeMap<String, String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedProfile {
    pub profile: FacilityAspectProfile,
    pub cbg: CbgProfile,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinOutput {
    pub enriched: Vec<EnrichedProfile>,
    pub unassigned: Vec<String>,
    /// Assigned to a block group missing from the covariate table.
    pub missing_data: Vec<String>,
}

pub fn join_covariates(profiles: &[FacilityAspectProfile], table: &CbgTable, source: CbgSource<'_>) -> JoinOutput {
    let mut out = JoinOutput::default();
    for p in profiles {
        let cbg = match source {
            CbgSource::Geometry(g) => assign_cbg(p.longitude, p.latitude, g),
            CbgSource::Lookup(m) => m.get(&p.facility_id).map(String::as_str),
        };
        match cbg.map(|id| table.profiles.get(id)) {
            None => out.unassigned.push(p.facility_id.clone()),
            Some(None) => out.missing_data.push(p.facility_id.clone()),
            Some(Some(c)) => out.enriched.push(EnrichedProfile {
                profile: p.clone(),
                cbg: c.clone(),
            }),
        }
    }
    out
}

/// Standardize to mean 0 and sample standard deviation 1.
pub fn zscore(name: &str, values: &[f64]) -> Result<Vec<f64>, CensusError> {
    if values.len() < 2 {
        return Err(CensusError::TooFewValues(name.to_string()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    // second pass removes the rounding left in the first mean
    let drift = centered.iter().sum::<f64>() / n;
    let centered: Vec<f64> = centered.iter().map(|v| v - drift).collect();
    let sd = (centered.iter().map(|v| v * v).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) || sd <= f64::EPSILON * mean.abs().max(1.0) * 16.0 {
        return Err(CensusError::ZeroVariance(name.to_string()));
    }
    Ok(centered.iter().map(|v| v / sd).collect())
}
