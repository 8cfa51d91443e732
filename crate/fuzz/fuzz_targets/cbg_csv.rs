#![no_main]

use libfuzzer_sys::fuzz_target;
use urgentcare_core::census::read_cbg_profiles;

fuzz_target!(|data: &[u8]| {
    let _ = read_cbg_profiles(data);
});
