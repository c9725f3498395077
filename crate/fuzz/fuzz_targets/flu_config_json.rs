#![no_main]
use ats_envs::flu::FluConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = FluConfig::from_json(s) {
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(FluConfig::from_json(&text).unwrap(), cfg);
        }
    }
});
