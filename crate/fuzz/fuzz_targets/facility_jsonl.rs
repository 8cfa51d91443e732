#![no_main]

use libfuzzer_sys::fuzz_target;
use urgentcare_core::corpus::parse_facility_record;

fuzz_target!(|data: &str| {
    let _ = parse_facility_record(data);
});
