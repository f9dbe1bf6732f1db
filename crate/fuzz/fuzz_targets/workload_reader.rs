#![no_main]
use libfuzzer_sys::fuzz_target;
use viphash::workload::WorkloadReader;

fuzz_target!(|data: &[u8]| {
    if let Ok(mut r) = WorkloadReader::new(data) {
        let mut left = r.remaining();
        while let Ok(Some(_)) = r.next_op() {
            left -= 1;
            assert_eq!(r.remaining(), left);
        }
    }
});
