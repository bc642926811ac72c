#![no_main]

use boem_core::experiment::{read_quantiles, write_quantiles};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(table) = read_quantiles(data) else {
        return;
    };
    let mut buf = Vec::new();
    write_quantiles(&mut buf, &table).expect("writing to memory");
    let again = read_quantiles(buf.as_slice()).expect("written table reads back");
    assert_eq!(again.rows, table.rows);
});
