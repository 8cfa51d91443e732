#![no_main]

use libfuzzer_sys::fuzz_target;
use urgentcare_core::census::read_join_table;

fuzz_target!(|data: &[u8]| {
    let _ = read_join_table(data);
});
