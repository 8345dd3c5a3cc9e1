//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anchorsim::agent::BRIDGING_SENTENCE;
use anchorsim::study::{Study, StudyConfig};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// A shipped configuration with its output redirected to `out`.
pub fn shipped_config(name: &str, out: &Path) -> StudyConfig {
    let path = repo_root().join("configs").join(name);
    let mut cfg = StudyConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    cfg.output_dir = out.to_path_buf();
    cfg
}

/// Every file under `dir`, keyed by its path relative to `dir`.
pub fn tree_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                out.insert(path.strip_prefix(base).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// The part of the user message before the bridging sentence, located without
/// the library's own helper.
pub fn context_of(user_text: &str) -> &str {
    let at = user_text.find(BRIDGING_SENTENCE).expect("user text carries the bridging sentence");
    &user_text[..at]
}

/// `(code, text)` of every excluded instrument item; no prompt context may contain these.
pub fn forbidden_texts(study: &Study) -> Vec<(String, String)> {
    let instrument = study.corpus.instrument();
    study
        .config
        .exclusion_codes()
        .into_iter()
        .filter_map(|c| instrument.get(&c).map(|i| (c.clone(), i.question_text.clone())))
        .collect()
}

/// `(respondent, item, offending code)` for every context that contains a
/// forbidden text or the task's own target question, as templated or rendered.
pub fn audit(study: &Study, forbidden: &[(String, String)]) -> Vec<(String, String, String)> {
    let mut hits = Vec::new();
    for task in &study.tasks {
        let ctx = context_of(&task.bundle.user_text);
        let own = [
            (task.item_code().to_string(), task.target.item.question_text.clone()),
            (task.item_code().to_string(), task.target.rendered_text.clone()),
        ];
        for (code, text) in forbidden.iter().chain(&own) {
            if ctx.contains(text.as_str()) {
                hits.push((task.respondent_id().to_string(), task.item_code().to_string(), code.clone()));
            }
        }
    }
    hits
}
