//! Three-level moderated regression of saving on knowledge, time perspective
//! and risk tolerance, plus the conditional slopes that decompose the
//! three-way interaction.
//!
//! Predictors are mean-centered before products are formed. Level 1 holds the
//! three main effects, level 2 adds the pairwise products, level 3 adds the
//! triple product. Each level's terms are reported from that level's own fit.

use serde::{Deserialize, Serialize};

use super::ols::{ols, OlsFit};
use super::tdist::t_two_sided_p;
use super::ScaleScores;
use crate::error::{Error, Result};

/// Recorded in every result so downstream readers know which fit produced a β.
pub const BETA_CONVENTION: &str = "staged: b * sd(x) / sd(y) from the fit of the level that introduces the term";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionRoles {
    pub outcome: String,
    pub knowledge: String,
    pub ftp: String,
    pub risk: String,
}

impl Default for RegressionRoles {
    fn default() -> Self {
        RegressionRoles {
            outcome: "RS".into(),
            knowledge: "KFP".into(),
            ftp: "FTP".into(),
            risk: "FRT".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub name: String,
    pub b: f64,
    pub beta_std: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFit {
    pub level: u8,
    /// Only the terms this level introduces.
    pub terms: Vec<TermEstimate>,
    /// Every term of this level's model.
    pub all_terms: Vec<TermEstimate>,
    pub r_squared: f64,
    pub df_resid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub levels: Vec<LevelFit>,
    /// Full level-3 model.
    pub r_squared: f64,
    pub n: usize,
    pub convention: String,
}

impl RegressionResult {
    pub fn term(&self, name: &str) -> Option<&TermEstimate> {
        self.levels.iter().flat_map(|l| l.terms.iter()).find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pole {
    High,
    Low,
}

impl Pole {
    fn sign(self) -> f64 {
        match self {
            Pole::High => 1.0,
            Pole::Low => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCell {
    pub ftp: Pole,
    pub knowledge: Pole,
    /// Raw conditional slope of the outcome on risk tolerance.
    pub slope: f64,
    /// `slope * sd(risk) / sd(outcome)`.
    pub beta: f64,
    /// Fitted outcome at the mean of risk tolerance for this cell.
    pub intercept: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleSlopesResult {
    pub band: f64,
    /// Order: (high, high), (high, low), (low, high), (low, low) as (ftp, knowledge).
    pub cells: [SlopeCell; 4],
    pub n: usize,
    /// Sample SD of risk tolerance, for drawing each cell's line over ±1 SD.
    pub risk_sd: f64,
}

impl SimpleSlopesResult {
    pub fn cell(&self, ftp: Pole, knowledge: Pole) -> &SlopeCell {
        self.cells
            .iter()
            .find(|c| c.ftp == ftp && c.knowledge == knowledge)
            .expect("all four cells present")
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1).
fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

struct Design {
    y: Vec<f64>,
    /// K, F, R, K:F, K:R, F:R, K:F:R, all built from centered predictors.
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
}

fn design(scores: &ScaleScores, roles: &RegressionRoles) -> Result<Design> {
    let names = [&roles.outcome, &roles.knowledge, &roles.ftp, &roles.risk];
    let cols = scores.complete_columns(&names.map(String::as_str))?;
    let n = cols[0].len();
    if n <= 8 {
        return Err(Error::InsufficientData(format!("{n} complete agents for 8 coefficients")));
    }
    let mut centered = Vec::with_capacity(3);
    for (col, name) in cols[1..].iter().zip(&names[1..]) {
        let m = mean(col);
        let c: Vec<f64> = col.iter().map(|v| v - m).collect();
        if c.iter().all(|v| *v == 0.0) {
            return Err(Error::ConstantPredictor { column: name.to_string() });
        }
        centered.push(c);
    }
    if sd(&cols[0]) == 0.0 {
        return Err(Error::ConstantPredictor { column: roles.outcome.clone() });
    }
    let (k, f, r) = (&centered[0], &centered[1], &centered[2]);
    let prod2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<f64>>();
    let kfr: Vec<f64> = (0..n).map(|i| k[i] * f[i] * r[i]).collect();
    let (kn, fname, rn) = (&roles.knowledge, &roles.ftp, &roles.risk);
    Ok(Design {
        y: cols[0].clone(),
        columns: vec![
            k.clone(),
            f.clone(),
            r.clone(),
            prod2(k, f),
            prod2(k, r),
            prod2(f, r),
            kfr,
        ],
        names: vec![
            kn.clone(),
            fname.clone(),
            rn.clone(),
            format!("{kn}:{fname}"),
            format!("{kn}:{rn}"),
            format!("{fname}:{rn}"),
            format!("{kn}:{fname}:{rn}"),
        ],
    })
}

const LEVEL_WIDTHS: [usize; 3] = [3, 6, 7];

fn fit_level(d: &Design, width: usize) -> Result<OlsFit> {
    ols(&d.y, &d.columns[..width], &d.names[..width])
}

fn estimates(d: &Design, fit: &OlsFit) -> Vec<TermEstimate> {
    let sdy = sd(&d.y);
    (1..fit.coefficients.len())
        .map(|j| TermEstimate {
            name: fit.names[j].clone(),
            b: fit.coefficients[j],
            beta_std: fit.coefficients[j] * sd(&d.columns[j - 1]) / sdy,
            se: fit.std_errors[j],
            t: fit.t_values[j],
            p: fit.p_values[j],
        })
        .collect()
}

pub fn hierarchical_regression(scores: &ScaleScores, roles: &RegressionRoles) -> Result<RegressionResult> {
    let d = design(scores, roles)?;
    let mut levels = Vec::with_capacity(3);
    let mut prev = 0;
    for (i, &width) in LEVEL_WIDTHS.iter().enumerate() {
        let fit = fit_level(&d, width)?;
        let all_terms = estimates(&d, &fit);
        levels.push(LevelFit {
            level: i as u8 + 1,
            terms: all_terms[prev..width].to_vec(),
            all_terms,
            r_squared: fit.r_squared,
            df_resid: fit.df_resid,
        });
        prev = width;
    }
    Ok(RegressionResult {
        r_squared: levels[2].r_squared,
        levels,
        n: d.y.len(),
        convention: BETA_CONVENTION.to_string(),
    })
}

/// Conditional slope of the outcome on risk tolerance with time perspective
/// and knowledge held at `±band` sample SDs from their means, from the level-3 fit.
pub fn simple_slopes(scores: &ScaleScores, roles: &RegressionRoles, band: f64) -> Result<SimpleSlopesResult> {
    if !(band.is_finite() && band > 0.0) {
        return Err(Error::Config(format!("slope band must be positive, got {band}")));
    }
    let d = design(scores, roles)?;
    let fit = fit_level(&d, 7)?;
    let (sk, sf) = (sd(&d.columns[0]), sd(&d.columns[1]));
    let scale = sd(&d.columns[2]) / sd(&d.y);
    let b = &fit.coefficients;
    // Coefficient indices with the intercept at 0: R=3, K:R=5, F:R=6, K:F:R=7.
    let cell = |ftp: Pole, knowledge: Pole| {
        let k0 = knowledge.sign() * band * sk;
        let f0 = ftp.sign() * band * sf;
        let mut a = [0.0; 8];
        a[3] = 1.0;
        a[5] = k0;
        a[6] = f0;
        a[7] = k0 * f0;
        let slope: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let intercept = b[0] + b[1] * k0 + b[2] * f0 + b[4] * k0 * f0;
        let var: f64 = (0..8)
            .map(|i| (0..8).map(|j| a[i] * fit.covariance[i][j] * a[j]).sum::<f64>())
            .sum();
        let se = var.max(0.0).sqrt();
        let t = if se > 0.0 { slope / se } else if slope == 0.0 { 0.0 } else { slope.signum() * f64::INFINITY };
        SlopeCell {
            ftp,
            knowledge,
            slope,
            beta: slope * scale,
            intercept,
            se,
            t,
            p: t_two_sided_p(t, fit.df_resid as f64),
        }
    };
    Ok(SimpleSlopesResult {
        band,
        cells: [
            cell(Pole::High, Pole::High),
            cell(Pole::High, Pole::Low),
            cell(Pole::Low, Pole::High),
            cell(Pole::Low, Pole::Low),
        ],
        n: d.y.len(),
        risk_sd: sd(&d.columns[2]),
    })
}
