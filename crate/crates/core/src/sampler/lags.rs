use crate::error::{Error, Result};
use crate::gc::{decide_network, inclusion_probabilities, DecisionConfig};
use serde::{Deserialize, Serialize};

use super::PosteriorDraws;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagReport {
    pub active: Vec<bool>,
    /// Largest inclusion probability among the `K²` coefficients of each lag.
    pub max_inclusion: Vec<f64>,
    /// Posterior probability that the RMS coefficient of the lag slice is at
    /// least `δ/2`.
    pub slice_inclusion: Vec<f64>,
    pub row_norm_mean: Vec<f64>,
    pub row_norm_median: Vec<f64>,
}

impl LagReport {
    /// Highest active lag, or zero when none is active.
    pub fn selected_order(&self) -> usize {
        self.active.iter().rposition(|a| *a).map_or(0, |l| l + 1)
    }
}

/// A lag is active when the slice as a whole passes the decision rule (RMS of
/// `A_ℓ` at least `δ/2` with probability `≥ t*`) and at least one of its
/// coefficients is included. A lag whose `β3` row is zero has an all-zero
/// slice and is never active.
pub fn select_lags(draws: &PosteriorDraws, cfg: &DecisionConfig) -> Result<LagReport> {
    if draws.b_fixed.is_empty() {
        return Err(Error::InvalidArgument("no posterior draws".into()));
    }
    let v = inclusion_probabilities(&draws.b_fixed, cfg.delta)?;
    let net = decide_network(&v, cfg)?;
    let lags = v.lags();
    let k = v.k();
    let slice_inclusion: Vec<f64> = (0..lags)
        .map(|l| {
            let hits = draws
                .b_fixed
                .iter()
                .filter(|b| {
                    let ms = b.columns(l * k, k).iter().map(|x| x * x).sum::<f64>() / (k * k) as f64;
                    ms.sqrt() >= cfg.delta / 2.0
                })
                .count();
            hits as f64 / draws.b_fixed.len() as f64
        })
        .collect();
    let t_star = cfg.t_star();
    let active = net.active_lags().into_iter().zip(&slice_inclusion).map(|(a, s)| a && *s >= t_star).collect();
    let max_inclusion = (0..lags).map(|l| v.lag_slice(l).iter().cloned().fold(0.0, f64::max)).collect();
    let mut row_norm_mean = vec![0.0; lags];
    let mut row_norm_median = vec![0.0; lags];
    if !draws.beta3_row_norms.is_empty() {
        for l in 0..lags {
            let mut xs: Vec<f64> = draws.beta3_row_norms.iter().map(|r| r[l]).collect();
            row_norm_mean[l] = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.sort_by(f64::total_cmp);
            row_norm_median[l] = xs[xs.len() / 2];
        }
    }
    Ok(LagReport { active, max_inclusion, slice_inclusion, row_norm_mean, row_norm_median })
}
