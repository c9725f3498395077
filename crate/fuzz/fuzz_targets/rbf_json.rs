#![no_main]
use ats_envs::baselines::RbfValueFunction;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(v) = RbfValueFunction::from_json(s) {
            let back = RbfValueFunction::from_json(&v.to_json().unwrap()).unwrap();
            assert_eq!(back, v);
            let _ = back.value([8.0, 3.0]);
        }
    }
});
