#![no_main]
use ats_envs::mallard::{read_history_csv, write_history_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(history) = read_history_csv(data) {
        let mut first = Vec::new();
        write_history_csv(&history, &mut first).unwrap();
        let again = read_history_csv(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_history_csv(&again, &mut second).unwrap();
        assert_eq!(first, second);
    }
});
