#![no_main]

use boem_core::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ExperimentConfig::parse(text) else {
        return;
    };
    // the canonical form of any accepted config parses back to the same config
    let again = ExperimentConfig::parse(&cfg.canonical()).expect("canonical form reparses");
    assert_eq!(again.hash(), cfg.hash());
});
