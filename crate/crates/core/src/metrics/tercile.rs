//! Tercile-mean validation of continuous 0-100 predictions.
//!
//! Values are grouped into Low `[0, 33.33]`, Middle `(33.33, 66.66]` and High
//! `(66.66, 100]`, once by the true value and once by the predicted value. Both
//! groupings average the true values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOW_UPPER: f64 = 33.33;
pub const MIDDLE_UPPER: f64 = 66.66;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tercile {
    Low,
    Middle,
    High,
}

impl Tercile {
    pub const ALL: [Tercile; 3] = [Tercile::Low, Tercile::Middle, Tercile::High];

    /// Values below 0 fall in Low and above 100 in High.
    pub fn of(v: f64) -> Tercile {
        if v <= LOW_UPPER {
            Tercile::Low
        } else if v <= MIDDLE_UPPER {
            Tercile::Middle
        } else {
            Tercile::High
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TercileRow {
    pub category: Tercile,
    /// Mean true value among respondents whose true value is in the category.
    pub mean_under_gt: Option<f64>,
    pub n_gt: usize,
    /// Mean true value among respondents whose prediction is in the category.
    pub mean_under_pred: Option<f64>,
    pub n_pred: usize,
}

pub fn tercile_mean_validation(gt: &[f64], pred: &[f64]) -> Result<Vec<TercileRow>> {
    if gt.len() != pred.len() {
        return Err(Error::Validation("tercile validation needs paired values".into()));
    }
    let mut acc = [(0.0, 0usize, 0.0, 0usize); 3];
    for (g, p) in gt.iter().zip(pred) {
        let a = &mut acc[Tercile::of(*g) as usize];
        a.0 += g;
        a.1 += 1;
        let b = &mut acc[Tercile::of(*p) as usize];
        b.2 += g;
        b.3 += 1;
    }
    let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    Ok(Tercile::ALL
        .iter()
        .map(|&c| {
            let (sg, ng, sp, np) = acc[c as usize];
            TercileRow {
                category: c,
                mean_under_gt: mean(sg, ng),
                n_gt: ng,
                mean_under_pred: mean(sp, np),
                n_pred: np,
            }
        })
        .collect())
}
