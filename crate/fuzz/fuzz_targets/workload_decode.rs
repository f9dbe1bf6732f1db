#![no_main]
use libfuzzer_sys::fuzz_target;
use viphash::workload::{decode, encode};

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = decode(data) {
        // Anything accepted must survive a second trip unchanged.
        let bytes = encode(&file);
        let again = decode(&bytes).expect("re-encoded workload must decode");
        assert_eq!(encode(&again), bytes);
    }
});
