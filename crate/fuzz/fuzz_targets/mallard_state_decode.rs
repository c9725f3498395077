#![no_main]
use ats_envs::mallard::MallardState;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(state) = MallardState::decode(s) {
            let text = state.encode();
            assert_eq!(MallardState::decode(&text).unwrap().encode(), text);
        }
    }
});
