//! Regenerates the checked-in synthetic fixtures.
//!
//! Usage: `cargo run -p anchorsim --example make_fixtures -- <dir>`

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anchorsim::corpus::{write_instrument, write_respondents, CorpusFormat, IngestOptions};
use anchorsim::fixtures::{opinion_references, panel_corpus, social_corpus, write_references};

fn main() -> anchorsim::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let opts = IngestOptions::default();
    for (name, corpus) in [("panel", panel_corpus(400, 20_21)?), ("social", social_corpus(1000, 19_72)?)] {
        let dir = root.join(name);
        fs::create_dir_all(&dir).expect("create fixture directory");
        write_instrument(corpus.instrument(), BufWriter::new(File::create(dir.join("instrument.jsonl")).expect("create")))?;
        write_respondents(
            &corpus,
            CorpusFormat::DelimitedTable,
            &opts,
            BufWriter::new(File::create(dir.join("respondents.csv")).expect("create")),
        )?;
    }
    let dir = root.join("opinion");
    fs::create_dir_all(&dir).expect("create fixture directory");
    write_references(&opinion_references(), BufWriter::new(File::create(dir.join("references.csv")).expect("create")))?;
    println!("fixtures written under {}", root.display());
    Ok(())
}
