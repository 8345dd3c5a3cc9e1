#![no_main]

use anchorsim::study::StudyConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = StudyConfig::from_toml(text);
});
