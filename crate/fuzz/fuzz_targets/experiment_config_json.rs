#![no_main]
use ats_harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::from_json(s) {
            assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
    }
});
