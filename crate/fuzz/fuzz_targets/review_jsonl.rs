#![no_main]

use libfuzzer_sys::fuzz_target;
use urgentcare_core::corpus::parse_review_record;

fuzz_target!(|data: &str| {
    let _ = parse_review_record(data);
});
