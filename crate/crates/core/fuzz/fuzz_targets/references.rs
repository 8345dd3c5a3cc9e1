#![no_main]

use anchorsim::corpus::parse_references;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(refs) = parse_references("fuzz", data) {
        for r in &refs {
            assert!(r.frequencies.iter().all(|(_, p)| (0.0..=1.0).contains(p)));
        }
    }
});
