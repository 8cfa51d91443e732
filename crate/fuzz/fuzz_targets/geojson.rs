#![no_main]

use libfuzzer_sys::fuzz_target;
use urgentcare_core::census::parse_geometries;

fuzz_target!(|data: &str| {
    if let Ok(set) = parse_geometries(data) {
        for g in &set.geometries {
            let _ = g.contains(0.0, 0.0);
        }
    }
});
