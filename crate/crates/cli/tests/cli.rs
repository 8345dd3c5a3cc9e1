use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn anchorsim(config_name: &str, out: &Path, args: &[&str]) -> Output {
    let output = Command::new(env!("CARGO_BIN_EXE_anchorsim"))
        .arg("--config")
        .arg(config(config_name))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn replay_rebuilds_the_run_outputs() {
    let run = tempfile::tempdir().unwrap();
    anchorsim("country.toml", run.path(), &["run"]);
    let log = run.path().join("predictions.jsonl");
    assert!(log.is_file());

    let replay = tempfile::tempdir().unwrap();
    anchorsim("country.toml", replay.path(), &["replay", "--log", log.to_str().unwrap()]);

    let mut original = tree(run.path());
    original.remove(Path::new("predictions.jsonl"));
    assert!(original.contains_key(Path::new("report.json")));
    assert_eq!(original, tree(replay.path()));
}

#[test]
fn build_agents_writes_one_prompt_per_task() {
    let out = tempfile::tempdir().unwrap();
    let output = anchorsim("country.toml", out.path(), &["build-agents"]);
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains(" 0 leakage violations"), "{stdout}");
    let text = fs::read_to_string(out.path().join("prompts.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!lines.is_empty());
    let audited: usize = stdout.split_whitespace().next().unwrap().parse().unwrap();
    assert_eq!(audited, lines.len());
    for l in &lines {
        assert!(l["user"].as_str().unwrap().len() > l["system"].as_str().unwrap().len() / 4);
        assert!(["QA1a_5", "QA2a_3"].contains(&l["item_code"].as_str().unwrap()));
    }
}

#[test]
fn wrong_study_kind_is_reported() {
    let out = tempfile::tempdir().unwrap();
    anchorsim("country.toml", out.path(), &["simulate"]);
    let output = Command::new(env!("CARGO_BIN_EXE_anchorsim"))
        .arg("--config")
        .arg(config("country.toml"))
        .arg("--out")
        .arg(out.path())
        .arg("regress")
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("regression studies"));
}

#[test]
fn missing_config_fails_cleanly() {
    let out = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_anchorsim"))
        .arg("--config")
        .arg(out.path().join("nope.toml"))
        .arg("ingest")
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).starts_with("error: loading"));
}
