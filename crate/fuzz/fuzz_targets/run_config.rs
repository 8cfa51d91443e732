#![no_main]

use libfuzzer_sys::fuzz_target;
use urgentcare_cli::config::RunConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = RunConfig::from_toml(data) {
        let _ = cfg.validate();
    }
});
