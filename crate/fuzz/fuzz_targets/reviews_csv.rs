#![no_main]

use libfuzzer_sys::fuzz_target;
use urgentcare_core::corpus::{read_reviews, InputFormat};

fuzz_target!(|data: &[u8]| {
    let _ = read_reviews(data, InputFormat::Csv);
});
