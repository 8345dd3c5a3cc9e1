#![no_main]

use anchorsim::corpus::{parse_instrument, write_instrument};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(inst) = parse_instrument("fuzz", data) else { return };
    let mut buf = Vec::new();
    write_instrument(&inst, &mut buf).unwrap();
    assert_eq!(parse_instrument("again", buf.as_slice()).unwrap(), inst);
});
