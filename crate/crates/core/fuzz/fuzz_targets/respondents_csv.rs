#![no_main]

use anchorsim::corpus::{parse_instrument, parse_respondents, write_respondents, CorpusFormat, IngestOptions};
use libfuzzer_sys::fuzz_target;

const INSTRUMENT: &[u8] = include_bytes!("../../../../fixtures/panel/instrument.jsonl");

fuzz_target!(|data: &[u8]| {
    let instrument = parse_instrument("instrument", INSTRUMENT).unwrap();
    let opts = IngestOptions::default();
    let Ok(corpus) = parse_respondents("fuzz", data, CorpusFormat::DelimitedTable, instrument.clone(), &opts) else {
        return;
    };
    // Anything accepted must survive a write and re-read unchanged.
    let mut buf = Vec::new();
    write_respondents(&corpus, CorpusFormat::DelimitedTable, &opts, &mut buf).unwrap();
    let back = parse_respondents("again", buf.as_slice(), CorpusFormat::DelimitedTable, instrument, &opts).unwrap();
    assert_eq!(back.respondents(), corpus.respondents());
});
