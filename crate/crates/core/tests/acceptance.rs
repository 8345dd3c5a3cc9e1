//! End-to-end acceptance checks. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anchorsim::agent::{leakage_violations, AgentProfile, Condition, ResponseMode, TargetQuestion};
use anchorsim::corpus::{AnswerValue, Instrument, RespondentRecord, SurveyCorpus, SurveyItem};
use anchorsim::fixtures::{panel_corpus, LITERACY_CORRECT};
use anchorsim::forest::{
    evaluate, grid_search_train, preprocess, ForestGrid, ForestModel, ForestParams, PreprocessOptions, Targets,
};
use anchorsim::gateway::{parse_answer, simulate_mock, MockPolicy};
use anchorsim::inference::{participant_bootstrap, BootstrapConfig, Panel, PanelCell, PanelQuestion};
use anchorsim::metrics::{
    alpha_standardized, icc1, item_entropy, pct_change, tvd_binned, tvd_discrete, DistributionSummary, LogBase,
    Support,
};
use anchorsim::psychometrics::{hierarchical_regression, RegressionRoles, ScaleScores};
use anchorsim::study::{emit_report, Density, ReportFormat, Study, StudyReport};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, StudentsT};

use common::{audit, forbidden_texts, shipped_config, tree_bytes};

const ALL_FORMATS: [ReportFormat; 3] = [ReportFormat::Delimited, ReportFormat::StructuredRecords, ReportFormat::PlotData];

fn within(elapsed: Duration, limit: Duration, what: &str) {
    assert!(elapsed < limit, "{what} took {elapsed:?}, limit {limit:?}");
}

// ---------------------------------------------------------------- criterion 1

/// Normalized random mass over `k` slots, with some exact zeros.
fn random_mass(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() }).collect();
    if w.iter().all(|x| *x == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// `max_A |P(A) - Q(A)|` over every subset of the union of labels.
fn subset_oracle(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>) -> f64 {
    let mut union: Vec<&String> = p.keys().chain(q.keys()).collect();
    union.sort();
    union.dedup();
    let diff: Vec<f64> = union
        .iter()
        .map(|l| p.get(*l).copied().unwrap_or(0.0) - q.get(*l).copied().unwrap_or(0.0))
        .collect();
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << diff.len()) {
        let s: f64 = (0..diff.len()).filter(|i| mask & (1 << i) != 0).map(|i| diff[i]).sum();
        best = best.max(s.abs());
    }
    best
}

/// Histogram TVD with edges over the pooled range and bins found by linear scan.
fn binned_oracle(gt: &[f64], pred: &[f64], k: usize) -> f64 {
    let lo = gt.iter().chain(pred).cloned().fold(f64::INFINITY, f64::min);
    let hi = gt.iter().chain(pred).cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return 0.0;
    }
    let edges: Vec<f64> = (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect();
    let bin = |x: f64| (0..k).rev().find(|&i| x >= edges[i]).unwrap_or(0);
    let hist = |xs: &[f64]| {
        let mut c = vec![0.0; k];
        for &x in xs {
            c[bin(x)] += 1.0;
        }
        c.into_iter().map(|v| v / xs.len() as f64).collect::<Vec<f64>>()
    };
    let (a, b) = (hist(gt), hist(pred));
    0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn criterion_1() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..1000 {
        let universe: Vec<String> = (0..rng.random_range(1..=10)).map(|i| format!("opt{i}")).collect();
        let mut pick = || {
            let mut labels: Vec<String> = universe.iter().filter(|_| rng.random_bool(0.8)).cloned().collect();
            if labels.is_empty() {
                labels.push(universe[0].clone());
            }
            labels.shuffle(&mut rng);
            let mass = random_mass(&mut rng, labels.len());
            (labels, mass)
        };
        let (lp, mp) = pick();
        let (lq, mq) = pick();
        let p = DistributionSummary::new(Support::Labels(lp.clone()), mp.clone(), 100).unwrap();
        let q = DistributionSummary::new(Support::Labels(lq.clone()), mq.clone(), 100).unwrap();
        let got = tvd_discrete(&p, &q).unwrap();
        let oracle = subset_oracle(&lp.into_iter().zip(mp).collect(), &lq.into_iter().zip(mq).collect());
        assert!((got - oracle).abs() <= 1e-12, "categorical tvd {got} vs oracle {oracle}");
    }
    for i in 0..100 {
        let gt: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..100.0f64).round()).collect();
        let shift = i as f64 * 0.5;
        let pred: Vec<f64> = (0..10_000)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                50.0 + shift * 0.1 + 15.0 * z
            })
            .collect();
        for k in [10, 50] {
            let got = tvd_binned(&gt, &pred, k).unwrap();
            let oracle = binned_oracle(&gt, &pred, k);
            assert!((got - oracle).abs() <= 1e-12, "binned tvd {got} vs oracle {oracle}");
        }
    }
    within(start.elapsed(), Duration::from_secs(30), "tvd oracle comparison");
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() {
    // (item, demographic TVD, survey-anchored TVD, reported change)
    let rows: [(&str, f64, f64, &str); 15] = [
        ("PH003", 0.514, 0.132, "-74.3"),
        ("CF103", 0.321, 0.190, "-40.8"),
        ("EP026", 0.456, 0.287, "-37.1"),
        ("BR015", 0.606, 0.463, "-23.6"),
        ("IT003", 0.408, 0.340, "-16.7"),
        ("HC889", 0.638, 0.145, "-77.3"),
        ("CO007", 0.455, 0.263, "-42.2"),
        ("CF820", 0.248, 0.280, "12.9"),
        ("MH002", 0.293, 0.307, "4.8"),
        ("AC012", 0.248, 0.251, "1.2"),
        ("FTP01", 0.469, 0.436, "-7.0"),
        ("FTP02", 0.494, 0.334, "-32.4"),
        ("FRT01", 0.160, 0.108, "-32.5"),
        ("FTP03", 0.435, 0.284, "-34.7"),
        ("FK01", 0.581, 0.374, "-35.6"),
    ];
    for (item, demo, survey, expected) in rows {
        let got = format!("{:.1}", pct_change(demo, survey).unwrap());
        assert_eq!(got, expected, "{item}");
    }
    assert!(pct_change(0.0, 0.2).is_err());
}

// ---------------------------------------------------------------- criterion 3

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let mut u: f64 = rng.random();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Both conditions draw from one distribution, so the true TVD difference is zero.
/// That distribution differs from the truth everywhere, which keeps TVD smooth.
fn null_panel(rng: &mut ChaCha8Rng, n: usize) -> Panel {
    let labels = ["a", "b", "c", "d"];
    let truth_w = [0.4, 0.3, 0.2, 0.1];
    let pred_w = [0.1, 0.2, 0.3, 0.4];
    let questions: Vec<PanelQuestion> =
        (0..3).map(|q| PanelQuestion { code: format!("Q{q}"), numeric: false }).collect();
    let cat = |i: usize| AnswerValue::Categorical(labels[i].to_string());
    let cells = (0..n)
        .map(|_| {
            (0..questions.len())
                .map(|_| {
                    Some(PanelCell {
                        truth: cat(draw(rng, &truth_w)),
                        a: Some(cat(draw(rng, &pred_w))),
                        b: Some(cat(draw(rng, &pred_w))),
                    })
                })
                .collect()
        })
        .collect();
    Panel { questions, participants: (0..n).map(|i| format!("p{i}")).collect(), cells }
}

fn criterion_3() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let reps = 1000;
    let mut excluded = 0;
    for r in 0..reps {
        let panel = null_panel(&mut rng, 150);
        let cfg = BootstrapConfig { iterations: 1000, confidence: 0.95, seed: r as u64, k_bins: 50 };
        let res = participant_bootstrap(&panel, &cfg).unwrap();
        if res.ci_low > 0.0 || res.ci_high < 0.0 {
            excluded += 1;
        }
    }
    let rate = excluded as f64 / reps as f64;
    println!("    null exclusion rate {rate:.3} over {reps} panels");
    assert!((rate - 0.05).abs() <= 0.03, "null CI excludes zero in {rate:.3} of panels");

    // Planted effect: uniform guesses against echoed truth on five panel questions.
    let corpus = panel_corpus(200, 3030).unwrap();
    let targets: Vec<(&str, ResponseMode)> = vec![
        ("FTP01", ResponseMode::Continuous0To100),
        ("FTP02", ResponseMode::Continuous0To100),
        ("FTP03", ResponseMode::DiscreteOptions),
        ("FRT01", ResponseMode::DiscreteOptions),
        ("FK01", ResponseMode::DiscreteOptions),
    ];
    let questions: Vec<PanelQuestion> = targets
        .iter()
        .map(|(c, _)| PanelQuestion {
            code: c.to_string(),
            numeric: corpus.instrument().get(c).unwrap().is_numeric(),
        })
        .collect();
    let mut cells = Vec::new();
    for (i, record) in corpus.respondents().iter().enumerate() {
        let mut row = Vec::new();
        for (q, (code, mode)) in targets.iter().enumerate() {
            let Some(truth) = record.answer(code) else {
                row.push(None);
                continue;
            };
            let item = corpus.instrument().get(code).unwrap().clone();
            let target = TargetQuestion::new(item.clone(), *mode).unwrap();
            let profile = AgentProfile {
                respondent_id: record.respondent_id.clone(),
                condition: Condition::SurveyAnchored,
                context: Vec::new(),
                withheld_item: Some(code.to_string()),
            };
            let answer = |policy: &MockPolicy, seed: u64| {
                let raw = simulate_mock(&profile, &target, policy, Some(truth), seed).unwrap();
                parse_answer(&raw, &item, *mode)
            };
            let seed = (i * 16 + q) as u64;
            row.push(Some(PanelCell {
                truth: truth.clone(),
                a: Some(answer(&MockPolicy::UniformRandom, seed)),
                b: Some(answer(&MockPolicy::EchoTruth, seed)),
            }));
        }
        cells.push(row);
    }
    let panel = Panel {
        questions,
        participants: corpus.respondents().iter().map(|r| r.respondent_id.clone()).collect(),
        cells,
    };
    let res = participant_bootstrap(&panel, &BootstrapConfig { iterations: 5000, seed: 31, ..Default::default() })
        .unwrap();
    println!(
        "    planted delta {:.3}, 95% CI [{:.3}, {:.3}]",
        res.mean_delta_tvd, res.ci_low, res.ci_high
    );
    assert!(res.ci_low > 0.0, "uniform guessing must be worse than echoed truth");
    assert!(res.significant);
    within(start.elapsed(), Duration::from_secs(300), "bootstrap calibration");
}

// ---------------------------------------------------------------- criterion 4

/// Least squares by Gaussian elimination on the normal equations.
fn normal_equations(y: &[f64], columns: &[Vec<f64>]) -> Vec<f64> {
    let p = columns.len() + 1;
    let x = |i: usize, j: usize| if j == 0 { 1.0 } else { columns[j - 1][i] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..y.len() {
        for r in 0..p {
            for c in 0..p {
                a[r][c] += x(i, r) * x(i, c);
            }
            a[r][p] += x(i, r) * y[i];
        }
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..p).map(|r| a[r][p] / a[r][r]).collect()
}

fn criterion_4() {
    let start = Instant::now();
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let (b_k, b_f, b_r, b_kfr) = (0.5, 0.25, 0.15, -0.2);
    let noise_var = 1.0 - (b_k * b_k + b_f * b_f + b_r * b_r + b_kfr * b_kfr);
    let analytic_r2 = 1.0 - noise_var;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let (k, f, r) = (z(), z(), z());
        let y = b_k * k + b_f * f + b_r * r + b_kfr * k * f * r + noise_var.sqrt() * z();
        values.push(vec![Some(y), Some(k), Some(f), Some(r)]);
    }
    let scores = ScaleScores {
        scales: ["RS", "KFP", "FTP", "FRT"].map(String::from).to_vec(),
        agents: (0..n).map(|i| format!("a{i}")).collect(),
        values,
        deletions: BTreeMap::new(),
    };
    let fit = hierarchical_regression(&scores, &RegressionRoles::default()).unwrap();
    let top = &fit.levels[2];
    let b = |name: &str| top.all_terms.iter().find(|t| t.name == name).unwrap();
    for (name, planted) in [("KFP", b_k), ("FTP", b_f), ("FRT", b_r), ("KFP:FTP:FRT", b_kfr)] {
        let got = b(name).b;
        assert!((got - planted).abs() <= 0.03, "{name}: {got} vs planted {planted}");
    }
    for name in ["KFP:FTP", "KFP:FRT", "FTP:FRT"] {
        assert!(b(name).b.abs() <= 0.03, "{name} should vanish, got {}", b(name).b);
    }
    assert!((top.r_squared - analytic_r2).abs() <= 0.02, "R2 {} vs {analytic_r2}", top.r_squared);

    // Second route: normal equations on the same centered design.
    let col = |j: usize| scores.values.iter().map(|r| r[j].unwrap()).collect::<Vec<f64>>();
    let y = col(0);
    let centered: Vec<Vec<f64>> = (1..4)
        .map(|j| {
            let c = col(j);
            let m = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let (k, f, r) = (&centered[0], &centered[1], &centered[2]);
    let prod = |cols: &[&Vec<f64>]| (0..n).map(|i| cols.iter().map(|c| c[i]).product()).collect::<Vec<f64>>();
    let design = vec![
        k.clone(),
        f.clone(),
        r.clone(),
        prod(&[k, f]),
        prod(&[k, r]),
        prod(&[f, r]),
        prod(&[k, f, r]),
    ];
    let ne = normal_equations(&y, &design);
    for (t, want) in top.all_terms.iter().zip(&ne[1..]) {
        assert!((t.b - want).abs() <= 1e-8, "{}: {} vs normal equations {want}", t.name, t.b);
    }

    // p-values against an independent Student t implementation.
    for level in &fit.levels {
        let dist = StudentsT::new(0.0, 1.0, level.df_resid as f64).unwrap();
        for t in &level.all_terms {
            let oracle = 2.0 * (1.0 - dist.cdf(t.t.abs()));
            assert!((t.p - oracle).abs() <= 1e-6, "{} p {} vs {oracle}", t.name, t.p);
        }
    }
    let mut grid_rng = ChaCha8Rng::seed_from_u64(405);
    for _ in 0..2000 {
        let df = grid_rng.random_range(1..500) as f64;
        let t: f64 = grid_rng.random_range(-8.0..8.0);
        let oracle = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()));
        let got = anchorsim::psychometrics::tdist::t_two_sided_p(t, df);
        assert!((got - oracle).abs() <= 1e-6, "p(t={t}, df={df}) {got} vs {oracle}");
    }
    within(start.elapsed(), Duration::from_secs(60), "regression recovery");
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() {
    for k in 2..=30 {
        assert_eq!(alpha_standardized(k, 1.0), 1.0, "k = {k}");
    }
    assert!((alpha_standardized(6, 0.62) - 0.907).abs() <= 0.001);

    let uniform: Vec<u8> = (0..700).map(|i| (i % 7) as u8 + 1).collect();
    let h = item_entropy(&uniform, LogBase::Natural).unwrap();
    assert!((h - 7f64.ln()).abs() <= 1e-9, "uniform entropy {h}");
    assert_eq!(item_entropy(&[4u8; 50], LogBase::Natural).unwrap(), 0.0);

    let groups: Vec<usize> = (0..120).map(|i| i / 12).collect();
    let constant_within: Vec<f64> = groups.iter().map(|g| *g as f64 * 0.7 + 1.0).collect();
    let icc = icc1(&constant_within, &groups).unwrap().icc;
    assert!((icc - 1.0).abs() <= 1e-9, "icc {icc}");

    // Strongly grouped scores, then group labels permuted at random.
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let groups: Vec<usize> = (0..600).map(|i| i / 30).collect();
    let scores: Vec<f64> = groups
        .iter()
        .map(|g| {
            let e: f64 = rng.sample(StandardNormal);
            *g as f64 + e
        })
        .collect();
    assert!(icc1(&scores, &groups).unwrap().icc > 0.9);
    let mut permuted = groups.clone();
    let reps = 200;
    let mut total = 0.0;
    for _ in 0..reps {
        permuted.shuffle(&mut rng);
        total += icc1(&scores, &permuted).unwrap().icc;
    }
    let mean = total / reps as f64;
    assert!(mean.abs() <= 0.05, "permutation-null icc {mean}");
}

// ---------------------------------------------------------------- criterion 6

/// Half the absolute mass difference over the outer `tail` bins on each side.
fn tail_tvd(d: &Density, tail: usize) -> f64 {
    let k = d.ground_truth.len();
    let norm = |v: &[f64]| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let (g, p) = (norm(&d.ground_truth), norm(&d.predicted));
    (0..k).filter(|&i| i < tail || i >= k - tail).map(|i| (g[i] - p[i]).abs()).sum::<f64>() * 0.5
}

fn criterion_6() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped_config("individual.toml", dir.path());
    cfg.conditions = vec![Condition::Demo7, Condition::SurveyAnchored];
    cfg.evaluation.bootstrap_pairs = vec![(Condition::Demo7, Condition::SurveyAnchored)];
    cfg.evaluation.pct_change_pairs = vec![(Condition::Demo7, Condition::SurveyAnchored)];
    cfg.bootstrap.iterations = 200;
    cfg.forest.enabled = false;
    let study = Study::prepare(cfg).unwrap();
    let backend = study.backend().unwrap();
    let out = study.elicit(backend.as_ref(), None).unwrap();
    let StudyReport::Individual(report) = study.evaluate(&out.records).unwrap() else {
        panic!("individual study expected");
    };
    let (central, echo) = (Condition::Demo7, Condition::SurveyAnchored);

    let mean_entropy = |c: Condition| {
        let hs: Vec<f64> = report.questions.iter().map(|q| report.result(&q.code, c).unwrap().predicted_entropy.unwrap()).collect();
        hs.iter().sum::<f64>() / hs.len() as f64
    };
    let (h_central, h_echo) = (mean_entropy(central), mean_entropy(echo));
    println!("    mean item entropy: central {h_central:.3}, echo {h_echo:.3}");
    assert!(h_central < h_echo);

    let ratio = |source: &str| {
        report.diversity.iter().find(|d| d.source == source).unwrap().result.as_ref().unwrap().ratio
    };
    let (d_central, d_echo) = (ratio(central.as_str()), ratio(echo.as_str()));
    println!("    diversity ratio: central {d_central:.3}, echo {d_echo:.3}");
    assert!(d_central < d_echo);

    let numeric: Vec<&str> = report.questions.iter().filter(|q| q.numeric).map(|q| q.code.as_str()).collect();
    assert!(!numeric.is_empty());
    for code in numeric {
        let (rc, re) = (report.result(code, central).unwrap(), report.result(code, echo).unwrap());
        let (dc, de) = (rc.density.as_ref().unwrap(), re.density.as_ref().unwrap());
        let tail = dc.ground_truth.len() / 10;
        let (tc, te) = (tail_tvd(dc, tail), tail_tvd(de, tail));
        println!("    {code} tail-bin tvd: central {tc:.3}, echo {te:.3}; binned tvd {:.3} vs {:.3}", rc.tvd.unwrap(), re.tvd.unwrap());
        assert!(tc > te, "{code}: tail-bin tvd {tc} not above {te}");
        assert!(rc.tvd.unwrap() > re.tvd.unwrap());
        let mass = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            (v[..tail].iter().sum::<f64>() + v[v.len() - tail..].iter().sum::<f64>()) / s
        };
        assert!(mass(&dc.predicted) < mass(&dc.ground_truth), "{code}: central tendency should thin the tails");
    }

    let lit = report.result("FK01", central).unwrap().frequencies.as_ref().unwrap();
    let share = |counts: &[usize]| {
        let i = lit.labels.iter().position(|l| l == LITERACY_CORRECT).unwrap();
        counts[i] as f64 / counts.iter().sum::<usize>() as f64
    };
    let (pred, truth) = (share(&lit.predicted), share(&lit.ground_truth));
    println!("    literacy correct: hyper-accurate {pred:.3}, ground truth {truth:.3}");
    assert!(pred >= 0.99 && truth < 0.60);
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() {
    let mut prompts = 0;
    for name in ["individual.toml", "country.toml", "regression.toml"] {
        let dir = tempfile::tempdir().unwrap();
        let study = Study::prepare(shipped_config(name, dir.path())).unwrap();
        let diag = study.preparation();
        assert!(!study.tasks.is_empty());
        assert_eq!(diag.prompts_audited, study.tasks.len(), "{name}");
        assert!(diag.leakage_violations.is_empty(), "{name}: {:?}", diag.leakage_violations.first());
        let forbidden = forbidden_texts(&study);
        let hits = audit(&study, &forbidden);
        assert!(hits.is_empty(), "{name}: {:?}", hits.first());
        for t in &study.tasks {
            let refs: Vec<&str> = forbidden.iter().map(|(_, s)| s.as_str()).collect();
            assert!(leakage_violations(t.bundle.context_section(), &refs).is_empty());
        }
        prompts += study.tasks.len();
    }
    println!("    {prompts} prompts audited, 0 violations");

    // Negative control: without the duplicate-item exclusion the audit must fire.
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped_config("individual.toml", dir.path());
    cfg.exclusions.clear();
    let study = Study::prepare(cfg).unwrap();
    let dup = study.corpus.instrument().get("cf015_").unwrap().question_text.clone();
    let hits = audit(&study, &[("cf015_".into(), dup.clone())]);
    assert!(!hits.is_empty(), "audit failed to see an unexcluded duplicate item");
    assert!(hits.iter().all(|(_, _, c)| c == "cf015_"));
    assert_eq!(leakage_violations(&format!("Q: {dup}\nA: x"), &[dup.as_str()]), vec![dup.as_str()]);
}

// ---------------------------------------------------------------- criterion 8

fn separable_corpus(n: usize, seed: u64) -> SurveyCorpus {
    let items = vec![
        SurveyItem::numeric("X1", "signal", 0.0, 10.0),
        SurveyItem::numeric("X2", "noise", 0.0, 10.0),
        SurveyItem::categorical("COLOR", "colour", &["red", "green", "blue"]),
        SurveyItem::categorical("Y", "class", &["low", "high"]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let respondents = (0..n)
        .map(|i| {
            let x1: f64 = (rng.random_range(0.0..10.0f64) * 10.0).round() / 10.0;
            let mut answers = BTreeMap::new();
            answers.insert("X1".to_string(), AnswerValue::Numeric(x1));
            answers.insert("X2".to_string(), AnswerValue::Numeric(rng.random_range(0.0..10.0f64).round()));
            let color = ["red", "green", "blue"][rng.random_range(0..3)];
            answers.insert("COLOR".to_string(), AnswerValue::Categorical(color.into()));
            let y = if x1 < 5.0 { "low" } else { "high" };
            answers.insert("Y".to_string(), AnswerValue::Categorical(y.into()));
            RespondentRecord {
                respondent_id: format!("r{i:04}"),
                country: "France".into(),
                age: rng.random_range(50..90),
                answers,
            }
        })
        .collect();
    SurveyCorpus::new(Instrument::new(items).unwrap(), respondents, "separable").unwrap()
}

/// Weighted Gini of splitting `rows` at `threshold`, counted directly.
fn split_impurity(x: &[f64], y: &[usize], rows: &[usize], threshold: f64) -> f64 {
    let gini = |side: Vec<usize>| {
        if side.is_empty() {
            return 0.0;
        }
        let n = side.len() as f64;
        let ones = side.iter().filter(|&&r| y[r] == 1).count() as f64;
        n * (1.0 - (ones / n).powi(2) - ((n - ones) / n).powi(2))
    };
    let left: Vec<usize> = rows.iter().copied().filter(|&r| x[r] <= threshold).collect();
    let right: Vec<usize> = rows.iter().copied().filter(|&r| x[r] > threshold).collect();
    (gini(left) + gini(right)) / rows.len() as f64
}

fn stump_oracle_check(rng: &mut ChaCha8Rng) {
    let n = rng.random_range(2..=100);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
    let flip = rng.random_range(0.0..0.4);
    let y: Vec<usize> = x.iter().map(|v| usize::from((*v >= 9.0) != rng.random_bool(flip))).collect();
    let rows_x: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
    let all: Vec<usize> = (0..n).collect();
    let params = ForestParams { n_estimators: 1, max_depth: 1, min_samples_split: 2, min_samples_leaf: 1 };
    let trees = ForestModel::fit(&rows_x, Targets::Classes { y: &y, n_classes: 2 }, &all, params, rng.random()).unwrap();
    let tree = &trees[0];
    let rows = &tree.sample_rows;

    let mut distinct: Vec<f64> = rows.iter().map(|&r| x[r]).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let parent = split_impurity(&x, &y, rows, f64::INFINITY);
    let candidates: Vec<(f64, f64)> = distinct
        .windows(2)
        .map(|w| {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            (t, split_impurity(&x, &y, rows, t))
        })
        .collect();
    let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let should_split = !candidates.is_empty() && best < parent - 1e-12 * parent.max(1.0);

    let root = &tree.nodes[0];
    assert_eq!(root.feature.is_some(), should_split, "split decision; parent {parent}, best {best}");
    if !should_split {
        return;
    }
    let got = split_impurity(&x, &y, rows, root.threshold);
    assert!((got - best).abs() <= 1e-12, "stump impurity {got} vs exhaustive {best}");
    let near: Vec<f64> = candidates.iter().filter(|c| c.1 <= best + 1e-9).map(|c| c.0).collect();
    if near.len() == 1 {
        assert_eq!(root.threshold, near[0]);
    }
    for (side, keep) in [(root.left, true), (root.right, false)] {
        let members: Vec<usize> = rows.iter().copied().filter(|&r| (x[r] <= root.threshold) == keep).collect();
        let ones = members.iter().filter(|&&r| y[r] == 1).count() as f64 / members.len() as f64;
        let leaf = &tree.nodes[side];
        assert!(leaf.feature.is_none());
        assert!((leaf.value[1] - ones).abs() <= 1e-12);
    }
}

fn criterion_8() {
    let corpus = separable_corpus(600, 808);
    let opts = PreprocessOptions { seed: 808, ..Default::default() };
    let matrix = preprocess(&corpus, "Y", &opts).unwrap();
    let search = grid_search_train(&matrix, &ForestGrid::default(), 808).unwrap();
    let eval = evaluate(&search.best, &matrix).unwrap();
    let f1 = eval.test_score.unwrap();
    println!("    separable test weighted F1 {f1:.3}");
    assert_eq!(eval.metric, "weighted_f1");
    assert!(f1 >= 0.9);

    let mut rng = ChaCha8Rng::seed_from_u64(809);
    for _ in 0..500 {
        stump_oracle_check(&mut rng);
    }

    let corpus = panel_corpus(400, 2021).unwrap();
    let opts = PreprocessOptions { seed: 810, ..Default::default() };
    let matrix = preprocess(&corpus, "FTP03", &opts).unwrap();
    let start = Instant::now();
    let search = grid_search_train(&matrix, &ForestGrid::default(), 810).unwrap();
    let elapsed = start.elapsed();
    println!("    {} grid fits in {elapsed:.1?}", search.table.len());
    assert_eq!(search.table.len(), 108);
    within(elapsed, Duration::from_secs(120), "forest grid search");
}

// ---------------------------------------------------------------- criterion 9

fn run_into(name: &str, dir: &std::path::Path) -> Study {
    let study = Study::prepare(shipped_config(name, dir)).unwrap();
    let report = study.run().unwrap();
    emit_report(&report, &ALL_FORMATS, dir).unwrap();
    study
}

fn criterion_9() {
    for name in ["individual.toml", "country.toml", "regression.toml"] {
        let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let study = run_into(name, a.path());
        run_into(name, b.path());
        let (first, second) = (tree_bytes(a.path()), tree_bytes(b.path()));
        assert!(first.len() > 3, "{name}: too few files written");
        assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>(), "{name}");
        for (path, bytes) in &first {
            assert!(bytes == &second[path], "{name}: {} differs between equal-seed runs", path.display());
        }

        let replayed = study.replay(&study.log_path()).unwrap();
        emit_report(&replayed, &ALL_FORMATS, c.path()).unwrap();
        let third = tree_bytes(c.path());
        for (path, bytes) in &third {
            assert!(bytes == &first[path], "{name}: replayed {} differs", path.display());
        }
        assert_eq!(third.len() + 1, first.len(), "{name}: replay should write everything but the log");
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn()); 9] = [
        ("tvd oracle equivalence", criterion_1),
        ("percent change reproduction", criterion_2),
        ("bootstrap calibration", criterion_3),
        ("regression recovery", criterion_4),
        ("psychometric identities", criterion_5),
        ("pathology detection", criterion_6),
        ("leakage audit", criterion_7),
        ("random forest", criterion_8),
        ("determinism and replay", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|info| eprintln!("    {info}")));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let ok = panic::catch_unwind(AssertUnwindSafe(check)).is_ok();
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({:.1?})",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
