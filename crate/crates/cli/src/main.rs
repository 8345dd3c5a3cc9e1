use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anchorsim::corpus::{write_instrument, write_respondents, CorpusFormat};
use anchorsim::gateway::{read_prediction_log, Aggregation};
use anchorsim::study::{emit_report, BackendKind, ReportFormat, Study, StudyConfig, StudyReport};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anchorsim", version, about = "Simulate survey respondents with LLM agents and score them against real answers")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Study configuration (TOML).
    #[arg(long, global = true, default_value = "study.toml")]
    config: PathBuf,
    /// Overrides the study seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the backend kind.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// Elicitation runs per task.
    #[arg(long, global = true)]
    runs: Option<u32>,
    /// How repeated runs are combined.
    #[arg(long, global = true, value_enum)]
    aggregate: Option<AggregateArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Live,
    Mock,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Single,
    Majority,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Delimited,
    Structured,
    Plot,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Delimited => ReportFormat::Delimited,
            FormatArg::Structured => ReportFormat::StructuredRecords,
            FormatArg::Plot => ReportFormat::PlotData,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load and filter the corpus, print a summary and write normalized copies.
    Ingest,
    /// Build every agent prompt, audit it for leakage and write `prompts.jsonl`.
    BuildAgents,
    /// Elicit every task and write the prediction log.
    Simulate,
    /// Score the prediction log and write `report.json`.
    Evaluate {
        /// Prediction log; defaults to the one in the output directory.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print the paired participant bootstrap of an individual study.
    Bootstrap {
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print the regression, simple slopes and scale diagnostics of a regression study.
    Regress {
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score the prediction log and write report files.
    Report {
        #[arg(long)]
        log: Option<PathBuf>,
        /// Formats to write; all when omitted.
        #[arg(long = "format", value_enum)]
        formats: Vec<FormatArg>,
    },
    /// Rebuild every report file from an existing log without eliciting.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Simulate, then write every report format.
    Run,
}

fn load_config(g: &Global) -> Result<StudyConfig> {
    let mut cfg = StudyConfig::load(&g.config).with_context(|| format!("loading {}", g.config.display()))?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(b) = g.backend {
        cfg.backend.kind = match b {
            BackendArg::Live => BackendKind::Live,
            BackendArg::Mock => BackendKind::Mock,
        };
    }
    if let Some(r) = g.runs {
        cfg.batch.runs = r;
    }
    if let Some(a) = g.aggregate {
        cfg.batch.aggregation = match a {
            AggregateArg::Single => Aggregation::Single,
            AggregateArg::Majority => Aggregation::MajorityVote,
        };
    }
    Ok(cfg)
}

const ALL_FORMATS: [ReportFormat; 3] = [ReportFormat::Delimited, ReportFormat::StructuredRecords, ReportFormat::PlotData];

fn write_files(report: &StudyReport, formats: &[ReportFormat], dir: &Path) -> Result<()> {
    for path in emit_report(report, formats, dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn scored(study: &Study, log: Option<&Path>) -> Result<StudyReport> {
    let path = log.map(Path::to_path_buf).unwrap_or_else(|| study.log_path());
    let records = read_prediction_log(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(study.evaluate(&records)?)
}

fn leakage_gate(study: &Study) -> Result<()> {
    let d = study.preparation();
    if !d.leakage_violations.is_empty() {
        for v in &d.leakage_violations {
            eprintln!("leak: {} {} {}: {:?}", v.respondent_id, v.item_code, v.condition, v.text);
        }
        bail!("{} prompts leak withheld text", d.leakage_violations.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let study = Study::prepare(cfg)?;
    match cli.command {
        Command::Ingest => {
            let c = &study.corpus;
            println!("{}: {} respondents, {} items", c.provenance(), c.respondents().len(), c.instrument().len());
            let d = study.preparation();
            println!("{} excluded for incomplete demographic profiles", d.excluded_respondents.len());
            write_instrument(c.instrument(), BufWriter::new(File::create(out.join("instrument.jsonl"))?))?;
            write_respondents(
                c,
                CorpusFormat::RecordJson,
                &study.config.corpus.ingest_options(),
                BufWriter::new(File::create(out.join("respondents.jsonl"))?),
            )?;
            println!("wrote {}", out.display());
        }
        Command::BuildAgents => {
            let path = out.join("prompts.jsonl");
            let mut w = BufWriter::new(File::create(&path)?);
            for t in &study.tasks {
                let line = serde_json::json!({
                    "respondent_id": t.respondent_id(),
                    "item_code": t.item_code(),
                    "condition": t.condition(),
                    "seed": t.seed,
                    "system": t.bundle.system_text,
                    "user": t.bundle.user_text,
                });
                writeln!(w, "{line}")?;
            }
            w.flush()?;
            let d = study.preparation();
            println!("{} prompts audited, {} leakage violations; wrote {}", d.prompts_audited, d.leakage_violations.len(), path.display());
            leakage_gate(&study)?;
        }
        Command::Simulate => {
            leakage_gate(&study)?;
            let backend = study.backend()?;
            let result = study.elicit(backend.as_ref(), Some(&study.log_path()))?;
            let d = &result.diagnostics;
            println!(
                "{} tasks, {} elicitations, {} parse failures, {} clipped; wrote {}",
                d.tasks,
                d.elicitations,
                d.parse_failures,
                d.clip_count,
                study.log_path().display()
            );
        }
        Command::Evaluate { log } => {
            let report = scored(&study, log.as_deref())?;
            write_files(&report, &[ReportFormat::StructuredRecords], &out)?;
        }
        Command::Bootstrap { log } => {
            let StudyReport::Individual(r) = scored(&study, log.as_deref())? else {
                bail!("the bootstrap applies to individual studies");
            };
            println!("pair\tmean_delta_tvd\tci_low\tci_high\tsignificant");
            for b in &r.bootstrap {
                match &b.result {
                    Some(x) => println!(
                        "{}-{}\t{:.4}\t{:.4}\t{:.4}\t{}",
                        b.a, b.b, x.mean_delta_tvd, x.ci_low, x.ci_high, x.significant
                    ),
                    None => println!("{}-{}\t-\t-\t-\t{}", b.a, b.b, b.failure.as_deref().unwrap_or("")),
                }
            }
        }
        Command::Regress { log } => {
            let StudyReport::Regression(r) = scored(&study, log.as_deref())? else {
                bail!("`regress` applies to regression studies");
            };
            for c in &r.conditions {
                println!("[{}] agents={}", c.condition, c.agents);
                for s in &c.scales {
                    println!(
                        "  {:<4} mean={} alpha_std={} icc={}",
                        s.name,
                        fmt(s.mean),
                        fmt(s.alpha.as_ref().map(|a| a.alpha_std)),
                        fmt(s.icc.as_ref().map(|i| i.icc))
                    );
                }
                match &c.regression {
                    Some(reg) => {
                        for level in &reg.levels {
                            for t in &level.terms {
                                println!("  L{} {:<12} beta={:+.3} t={:+.2} p={:.4}", level.level, t.name, t.beta_std, t.t, t.p);
                            }
                            println!("  L{} R2={:.3}", level.level, level.r_squared);
                        }
                    }
                    None => println!("  regression failed: {}", c.failures.join("; ")),
                }
                for cell in c.slopes.iter().flat_map(|s| s.cells.iter()) {
                    println!("  slope ftp={:?} kfp={:?} beta={:+.3} p={:.4}", cell.ftp, cell.knowledge, cell.beta, cell.p);
                }
            }
        }
        Command::Report { log, formats } => {
            let report = scored(&study, log.as_deref())?;
            let formats: Vec<ReportFormat> =
                if formats.is_empty() { ALL_FORMATS.to_vec() } else { formats.into_iter().map(Into::into).collect() };
            write_files(&report, &formats, &out)?;
        }
        Command::Replay { log } => {
            let report = scored(&study, Some(&log))?;
            write_files(&report, &ALL_FORMATS, &out)?;
        }
        Command::Run => {
            leakage_gate(&study)?;
            let report = study.run()?;
            write_files(&report, &ALL_FORMATS, &out)?;
        }
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
