use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

use super::PanelState;

/// Running sums of factor column norms over the current window.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnNormWindow {
    pub count: usize,
    pub sums: [Vec<f64>; 3],
    pub dev_sums: Vec<Vec<f64>>,
}

impl ColumnNormWindow {
    pub fn new(state: &PanelState) -> Self {
        let [r1, r2, r3] = state.ranks();
        Self { count: 0, sums: [vec![0.0; r1], vec![0.0; r2], vec![0.0; r3]], dev_sums: vec![vec![0.0; r1]; state.beta1_dev.len()] }
    }

    pub fn reset(&mut self, state: &PanelState) {
        *self = Self::new(state);
    }

    pub fn record(&mut self, state: &PanelState) {
        let shape_ok = self.sums.iter().map(|s| s.len()).eq(state.ranks()) && self.dev_sums.len() == state.beta1_dev.len();
        if !shape_ok {
            self.reset(state);
        }
        for (s, b) in self.sums.iter_mut().zip([&state.beta1, &state.beta2, &state.beta3]) {
            for (acc, c) in s.iter_mut().zip(b.column_iter()) {
                *acc += c.norm();
            }
        }
        for (s, d) in self.dev_sums.iter_mut().zip(&state.beta1_dev) {
            for (acc, c) in s.iter_mut().zip(d.column_iter()) {
                *acc += c.norm();
            }
        }
        self.count += 1;
    }

    fn mean(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|s| s / self.count as f64).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankReport {
    pub before: [usize; 3],
    pub after: [usize; 3],
    /// Zero-based indices (in the pre-pruning numbering) removed per factor.
    pub removed: [Vec<usize>; 3],
}

impl RankReport {
    pub fn changed(&self) -> bool {
        self.before != self.after
    }
}

/// Drops every column whose windowed mean norm is below `threshold` times
/// the largest windowed column norm of the same factor, or exactly zero. A panel loading
/// column goes only when the fixed part and every subject deviation are
/// below the cut. Fails without modifying `state` if a factor would lose
/// all of its columns.
pub fn prune_ranks(state: &mut PanelState, window: &ColumnNormWindow, threshold: f64) -> Result<RankReport> {
    if window.count == 0 {
        return Err(Error::InvalidArgument("empty pruning window".into()));
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("prune threshold must be >= 0, got {threshold}")));
    }
    let ranks = state.ranks();
    let shape_ok = window.sums.iter().map(|s| s.len()).eq(ranks) && window.dev_sums.len() == state.beta1_dev.len();
    if !shape_ok {
        return Err(Error::Dimension("pruning window does not match the state's ranks".into()));
    }
    let devs: Vec<Vec<f64>> = window.dev_sums.iter().map(|s| window.mean(s)).collect();
    let mut removed: [Vec<usize>; 3] = Default::default();
    for j in 0..3 {
        let fixed = window.mean(&window.sums[j]);
        let mut reference = fixed.iter().cloned().fold(0.0, f64::max);
        if j == 0 {
            reference = devs.iter().flatten().cloned().fold(reference, f64::max);
        }
        let cut = threshold * reference;
        let below = |x: f64| x < cut || x == 0.0;
        removed[j] = (0..ranks[j]).filter(|&r| below(fixed[r]) && (j != 0 || devs.iter().all(|d| below(d[r])))).collect();
        if removed[j].len() == ranks[j] {
            return Err(Error::RankZero(format!("every column of factor {} is below the pruning threshold", j + 1)));
        }
    }
    for j in 0..3 {
        for &r in removed[j].iter().rev() {
            state.remove_column(j, r)?;
        }
    }
    Ok(RankReport { before: ranks, after: state.ranks(), removed })
}
