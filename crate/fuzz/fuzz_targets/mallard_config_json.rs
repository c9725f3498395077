#![no_main]
use ats_envs::mallard::MallardConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = MallardConfig::from_json(s) {
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(MallardConfig::from_json(&text).unwrap(), cfg);
        }
    }
});
