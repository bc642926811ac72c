#![no_main]

use boem_core::experiment::read_raw;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    _ = read_raw(data);
});
