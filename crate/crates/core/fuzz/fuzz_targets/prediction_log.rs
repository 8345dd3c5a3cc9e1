#![no_main]

use anchorsim::gateway::parse_prediction_log;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_prediction_log("fuzz", data);
});
