#![no_main]
use libfuzzer_sys::fuzz_target;
use viphash_bench::metrics::read_json;

fuzz_target!(|data: &[u8]| {
    let _ = read_json(data);
});
