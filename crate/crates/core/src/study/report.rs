//! Deterministic report files. Floats are written with six decimals and
//! absent values as empty cells, so reruns on equal inputs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CountryReport, IndividualReport, RegressionReport, StudyReport};
use crate::error::{Error, Result};

/// File name of the prediction log inside the output directory.
pub const PREDICTION_LOG: &str = "predictions.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// `summary.csv` plus one `frequencies/<question>__<condition>.csv` per pair.
    Delimited,
    /// `report.json`.
    StructuredRecords,
    /// Figure-ready tables under `plot/`.
    PlotData,
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Keeps file names portable.
fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(path: PathBuf, header: &[&str]) -> Result<Table> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(|e| Error::io(&path, e.into()))?;
        Ok(Table { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| Error::io(&self.path, e.into()))
    }

    fn finish(self, written: &mut Vec<PathBuf>) -> Result<()> {
        let bytes = self.writer.into_inner().map_err(|e| Error::io(&self.path, e.into_error()))?;
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&self.path, bytes).map_err(|e| Error::io(&self.path, e))?;
        written.push(self.path);
        Ok(())
    }
}

const SUMMARY_HEADER: [&str; 7] = ["question", "condition", "stratum", "metric", "value", "n", "note"];

struct Summary(Table);

impl Summary {
    fn new(dir: &Path) -> Result<Summary> {
        Ok(Summary(Table::new(dir.join("summary.csv"), &SUMMARY_HEADER)?))
    }

    fn add(&mut self, q: &str, c: &str, s: &str, metric: &str, value: String, n: Option<usize>, note: &str) -> Result<()> {
        self.0.row([q, c, s, metric, &value, &n.map(|n| n.to_string()).unwrap_or_default(), note])
    }
}

/// Writes the requested formats into `dir` and returns the files written, in order.
pub fn emit_report(report: &StudyReport, formats: &[ReportFormat], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut written = Vec::new();
    for f in formats {
        match f {
            ReportFormat::StructuredRecords => {
                let path = dir.join("report.json");
                let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
                text.push('\n');
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
            ReportFormat::Delimited => match report {
                StudyReport::Individual(r) => individual_delimited(r, dir, &mut written)?,
                StudyReport::Country(r) => country_delimited(r, dir, &mut written)?,
                StudyReport::Regression(r) => regression_delimited(r, dir, &mut written)?,
            },
            ReportFormat::PlotData => match report {
                StudyReport::Individual(r) => individual_plot(r, &dir.join("plot"), &mut written)?,
                StudyReport::Country(r) => country_plot(r, &dir.join("plot"), &mut written)?,
                StudyReport::Regression(r) => regression_plot(r, &dir.join("plot"), &mut written)?,
            },
        }
    }
    Ok(written)
}

fn diagnostics_rows(s: &mut Summary, d: &super::Diagnostics) -> Result<()> {
    let counts = [
        ("respondents", d.respondents),
        ("excluded_respondents", d.excluded_respondents.len()),
        ("tasks", d.tasks),
        ("prompts_audited", d.prompts_audited),
        ("leakage_violations", d.leakage_violations.len()),
        ("elicitations", d.elicitations),
        ("parse_failures", d.parse_failures),
        ("clip_count", d.clip_count),
        ("failed_elicitations", d.failed_elicitations),
        ("missing_records", d.missing_records),
    ];
    for (name, v) in counts {
        s.add("*", "*", "", name, v.to_string(), None, "")?;
    }
    s.add("*", "*", "", "parse_failure_rate", num(d.parse_failure_rate), Some(d.elicitations), "")
}

fn individual_delimited(r: &IndividualReport, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut s = Summary::new(dir)?;
    for q in &r.questions {
        for c in &q.conditions {
            let note = c.failures.join("; ");
            let cond = c.condition.as_str();
            s.add(&q.code, cond, "", &c.metric, opt(c.value), Some(c.n), &note)?;
            s.add(&q.code, cond, "", "tvd", opt(c.tvd), Some(c.n_tvd), "")?;
            s.add(&q.code, cond, "", "predicted_entropy", opt(c.predicted_entropy), Some(c.n_tvd), "")?;
        }
    }
    for p in &r.pct_change {
        let pair = format!("{}->{}", p.from, p.to);
        s.add(&p.question, &pair, "", "tvd_pct_change", p.pct_change.map(|v| format!("{v:.1}")).unwrap_or_default(), None, "")?;
    }
    for d in &r.diversity {
        let (v, n) = d.result.as_ref().map_or((None, None), |x| (Some(x.ratio), Some(x.total)));
        s.add("*", &d.source, "", "diversity_ratio", opt(v), n, d.failure.as_deref().unwrap_or(""))?;
    }
    for b in &r.bootstrap {
        let pair = format!("{}-{}", b.a, b.b);
        let note = b.failure.as_deref().unwrap_or("");
        match &b.result {
            Some(x) => {
                s.add("*", &pair, "", "delta_tvd", num(x.mean_delta_tvd), Some(x.participants), note)?;
                s.add("*", &pair, "", "observed_delta_tvd", num(x.observed_delta), Some(x.participants), "")?;
                s.add("*", &pair, "", "ci_low", num(x.ci_low), None, "")?;
                s.add("*", &pair, "", "ci_high", num(x.ci_high), None, "")?;
                s.add("*", &pair, "", "significant", x.significant.to_string(), None, "")?;
                s.add("*", &pair, "", "achieved_level", num(x.achieved_level), None, "")?;
            }
            None => s.add("*", &pair, "", "delta_tvd", String::new(), None, note)?,
        }
    }
    for f in &r.forest {
        let note = f.failure.as_deref().unwrap_or("");
        match &f.evaluation {
            Some(e) => {
                s.add(&f.question, "forest", "", &format!("train_{}", e.metric), opt(e.train_score), Some(e.n_train), &e.undefined.join("; "))?;
                s.add(&f.question, "forest", "", &format!("test_{}", e.metric), opt(e.test_score), Some(e.n_test), "")?;
                s.add(&f.question, "forest", "", "tvd", num(e.test_tvd), Some(e.n_test), "")?;
            }
            None => s.add(&f.question, "forest", "", "test_score", String::new(), None, note)?,
        }
    }
    diagnostics_rows(&mut s, &r.diagnostics)?;
    s.0.finish(written)?;

    for q in &r.questions {
        for c in &q.conditions {
            let path = dir.join("frequencies").join(format!("{}__{}.csv", slug(&q.code), slug(c.condition.as_str())));
            if let Some(f) = &c.frequencies {
                let mut t = Table::new(path, &["label", "ground_truth", "predicted"])?;
                for ((l, g), p) in f.labels.iter().zip(&f.ground_truth).zip(&f.predicted) {
                    t.row([l.clone(), g.to_string(), p.to_string()])?;
                }
                t.finish(written)?;
            } else {
                let mut t = Table::new(path, &["bin_low", "bin_high", "ground_truth", "predicted"])?;
                if let Some(d) = &c.density {
                    for (i, (g, p)) in d.ground_truth.iter().zip(&d.predicted).enumerate() {
                        t.row([num(d.edges[i]), num(d.edges[i + 1]), num(*g), num(*p)])?;
                    }
                }
                t.finish(written)?;
            }
        }
    }
    Ok(())
}

fn individual_plot(r: &IndividualReport, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut freq = Table::new(dir.join("category_frequencies.csv"), &["question", "condition", "label", "ground_truth_share", "predicted_share"])?;
    let mut dens = Table::new(dir.join("binned_density.csv"), &["question", "condition", "bin_low", "bin_high", "ground_truth", "predicted"])?;
    let mut terc = Table::new(
        dir.join("tercile_means.csv"),
        &["question", "condition", "category", "mean_under_ground_truth", "n_ground_truth", "mean_under_predicted", "n_predicted"],
    )?;
    let mut ages = Table::new(dir.join("age_group_means.csv"), &["question", "condition", "band", "n", "mean_ground_truth", "mean_predicted"])?;
    let mut ent = Table::new(dir.join("entropy.csv"), &["question", "condition", "ground_truth_entropy", "predicted_entropy"])?;
    for q in &r.questions {
        for c in &q.conditions {
            let cond = c.condition.as_str();
            ent.row([q.code.clone(), cond.into(), opt(c.ground_truth_entropy), opt(c.predicted_entropy)])?;
            if let Some(f) = &c.frequencies {
                let (ng, np): (usize, usize) = (f.ground_truth.iter().sum(), f.predicted.iter().sum());
                let share = |k: usize, n: usize| if n == 0 { String::new() } else { num(k as f64 / n as f64) };
                for ((l, g), p) in f.labels.iter().zip(&f.ground_truth).zip(&f.predicted) {
                    freq.row([q.code.clone(), cond.into(), l.clone(), share(*g, ng), share(*p, np)])?;
                }
            }
            if let Some(d) = &c.density {
                for (i, (g, p)) in d.ground_truth.iter().zip(&d.predicted).enumerate() {
                    dens.row([q.code.clone(), cond.into(), num(d.edges[i]), num(d.edges[i + 1]), num(*g), num(*p)])?;
                }
            }
            for t in c.terciles.iter().flatten() {
                terc.row([
                    q.code.clone(),
                    cond.into(),
                    format!("{:?}", t.category).to_lowercase(),
                    opt(t.mean_under_gt),
                    t.n_gt.to_string(),
                    opt(t.mean_under_pred),
                    t.n_pred.to_string(),
                ])?;
            }
            for a in &c.age_groups {
                ages.row([q.code.clone(), cond.into(), a.band.clone(), a.n.to_string(), opt(a.mean_ground_truth), opt(a.mean_predicted)])?;
            }
        }
    }
    let mut div = Table::new(dir.join("diversity.csv"), &["source", "unique_profiles", "total", "ratio", "top10_coverage"])?;
    for d in &r.diversity {
        match &d.result {
            Some(x) => div.row([d.source.clone(), x.unique_profiles.to_string(), x.total.to_string(), num(x.ratio), num(x.top10_coverage)])?,
            None => div.row([d.source.clone(), String::new(), String::new(), String::new(), String::new()])?,
        }
    }
    for t in [freq, dens, terc, ages, ent, div] {
        t.finish(written)?;
    }
    Ok(())
}

fn country_delimited(r: &CountryReport, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut s = Summary::new(dir)?;
    for row in &r.rows {
        let note = if row.dropped > 0 { format!("{} dropped", row.dropped) } else { String::new() };
        s.add(&row.question, row.condition.as_str(), &row.country, "tvd", opt(row.tvd), Some(row.n), &note)?;
    }
    diagnostics_rows(&mut s, &r.diagnostics)?;
    s.0.finish(written)?;
    let mut pairs: Vec<(&str, &str)> = r.rows.iter().map(|x| (x.question.as_str(), x.condition.as_str())).collect();
    pairs.dedup();
    for (q, c) in pairs {
        let mut t = Table::new(
            dir.join("frequencies").join(format!("{}__{}.csv", slug(q), slug(c))),
            &["country", "label", "simulated", "reference"],
        )?;
        for row in r.rows.iter().filter(|x| x.question == q && x.condition.as_str() == c) {
            for o in &row.options {
                t.row([row.country.clone(), o.label.clone(), num(o.simulated), num(o.reference)])?;
            }
        }
        t.finish(written)?;
    }
    Ok(())
}

fn country_plot(r: &CountryReport, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut t = Table::new(dir.join("country_shares.csv"), &["question", "condition", "country", "label", "simulated", "reference"])?;
    for row in &r.rows {
        for o in &row.options {
            t.row([row.question.clone(), row.condition.as_str().into(), row.country.clone(), o.label.clone(), num(o.simulated), num(o.reference)])?;
        }
    }
    t.finish(written)
}

fn regression_delimited(r: &RegressionReport, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut s = Summary::new(dir)?;
    for t in &r.original {
        s.add(&t.term, "original", "", "reference_value", num(t.value), None, "")?;
    }
    for c in &r.conditions {
        let cond = c.condition.as_str();
        for sc in &c.scales {
            s.add(&sc.name, cond, "", "mean", opt(sc.mean), Some(sc.n), "")?;
            s.add(&sc.name, cond, "", "sd", opt(sc.sd), Some(sc.n), "")?;
            s.add(&sc.name, cond, "", "deletions", sc.deletions.to_string(), None, "")?;
            s.add(&sc.name, cond, "", "entropy", opt(sc.entropy), Some(sc.n), "")?;
            s.add(&sc.name, cond, "", "alpha_raw", opt(sc.alpha.as_ref().map(|a| a.alpha_raw)), sc.alpha.as_ref().map(|a| a.n), "")?;
            s.add(&sc.name, cond, "", "alpha_std", opt(sc.alpha.as_ref().map(|a| a.alpha_std)), None, "")?;
            s.add(&sc.name, cond, "", "mean_inter_item_r", opt(sc.alpha.as_ref().map(|a| a.mean_inter_item_r)), None, "")?;
            s.add(&sc.name, cond, "", "icc1", opt(sc.icc.as_ref().map(|i| i.icc)), sc.icc.as_ref().map(|i| i.n_groups), "")?;
        }
        if let Some(d) = &c.diversity {
            s.add("*", cond, "", "diversity_ratio", num(d.ratio), Some(d.total), "")?;
        }
        match &c.regression {
            Some(reg) => {
                for level in &reg.levels {
                    let lvl = format!("level{}", level.level);
                    for t in &level.terms {
                        s.add(&t.name, cond, &lvl, "beta_std", num(t.beta_std), Some(reg.n), "")?;
                        s.add(&t.name, cond, &lvl, "t", num(t.t), None, "")?;
                        s.add(&t.name, cond, &lvl, "p", num(t.p), None, "")?;
                    }
                    s.add("*", cond, &lvl, "r_squared", num(level.r_squared), Some(reg.n), "")?;
                }
            }
            None => s.add("*", cond, "", "r_squared", String::new(), None, &c.failures.join("; "))?,
        }
        for cell in c.slopes.iter().flat_map(|x| x.cells.iter()) {
            let stratum = format!("ftp={:?}|kfp={:?}", cell.ftp, cell.knowledge).to_lowercase();
            s.add("slope", cond, &stratum, "beta", num(cell.beta), None, "")?;
            s.add("slope", cond, &stratum, "t", num(cell.t), None, "")?;
            s.add("slope", cond, &stratum, "p", num(cell.p), None, "")?;
        }
    }
    diagnostics_rows(&mut s, &r.diagnostics)?;
    s.0.finish(written)
}

fn regression_plot(r: &RegressionReport, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut scales = Table::new(dir.join("scale_diagnostics.csv"), &["condition", "scale", "mean", "sd", "entropy", "icc1", "alpha_std"])?;
    let mut items = Table::new(dir.join("item_entropy.csv"), &["condition", "item", "entropy"])?;
    let mut div = Table::new(dir.join("diversity.csv"), &["condition", "unique_profiles", "total", "ratio", "top10_coverage"])?;
    let mut slopes = Table::new(
        dir.join("simple_slopes.csv"),
        &["condition", "ftp", "knowledge", "beta", "slope", "risk_low", "outcome_at_risk_low", "risk_high", "outcome_at_risk_high"],
    )?;
    let mut coef = Table::new(dir.join("regression.csv"), &["condition", "level", "term", "beta_std", "t", "p"])?;
    for c in &r.conditions {
        let cond = c.condition.as_str();
        for s in &c.scales {
            scales.row([
                cond.into(),
                s.name.clone(),
                opt(s.mean),
                opt(s.sd),
                opt(s.entropy),
                opt(s.icc.as_ref().map(|i| i.icc)),
                opt(s.alpha.as_ref().map(|a| a.alpha_std)),
            ])?;
        }
        for (item, e) in &c.item_entropy {
            items.row([cond.into(), item.clone(), opt(*e)])?;
        }
        if let Some(d) = &c.diversity {
            div.row([cond.into(), d.unique_profiles.to_string(), d.total.to_string(), num(d.ratio), num(d.top10_coverage)])?;
        }
        if let Some(sl) = &c.slopes {
            let (lo, hi) = (-sl.risk_sd, sl.risk_sd);
            for cell in &sl.cells {
                slopes.row([
                    cond.into(),
                    format!("{:?}", cell.ftp).to_lowercase(),
                    format!("{:?}", cell.knowledge).to_lowercase(),
                    num(cell.beta),
                    num(cell.slope),
                    num(lo),
                    num(cell.intercept + cell.slope * lo),
                    num(hi),
                    num(cell.intercept + cell.slope * hi),
                ])?;
            }
        }
        if let Some(reg) = &c.regression {
            for level in &reg.levels {
                for t in &level.terms {
                    coef.row([cond.into(), level.level.to_string(), t.name.clone(), num(t.beta_std), num(t.t), num(t.p)])?;
                }
            }
        }
    }
    for t in [scales, items, div, slopes, coef] {
        t.finish(written)?;
    }
    Ok(())
}
