#![no_main]
use libfuzzer_sys::fuzz_target;
use viphash_bench::metrics::{read_csv, write_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_csv(data) {
        let mut out = Vec::new();
        write_csv(&mut out, &rows).unwrap();
        let back = read_csv(out.as_slice()).expect("written report must parse");
        assert_eq!(back.len(), rows.len());
    }
});
