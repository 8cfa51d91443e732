#![no_main]

use libfuzzer_sys::fuzz_target;
use urgentcare_core::absa::{canonical_json, parse_llm_response};

fuzz_target!(|data: &str| {
    if let Ok(p) = parse_llm_response(data) {
        // accepted responses round-trip through their canonical form
        let again = parse_llm_response(&canonical_json(&p.labels)).unwrap();
        assert_eq!(again.labels, p.labels);
    }
});
