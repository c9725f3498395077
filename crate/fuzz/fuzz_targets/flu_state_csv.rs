#![no_main]
use ats_envs::flu::read_state_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_state_csv(data) {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).unwrap();
        }
        let text = w.into_inner().unwrap();
        if !rows.is_empty() {
            assert_eq!(read_state_csv(text.as_slice()).unwrap(), rows);
        }
    }
});
