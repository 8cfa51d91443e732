#![no_main]

use libfuzzer_sys::fuzz_target;
use urgentcare_core::evalharness::read_annotations;

fuzz_target!(|data: &[u8]| {
    let _ = read_annotations(data);
});
