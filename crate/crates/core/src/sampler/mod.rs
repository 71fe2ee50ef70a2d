//! Gibbs sampler for the Tucker-decomposed VAR, single-subject and panel.

mod chain;
mod design;
mod lags;
mod prune;
mod state;
mod steps;

pub use chain::{fit, pool_draws, resume_chains, run_chains, Chain, PosteriorDraws};
pub use design::{build_h_matrix, lag_window, likelihood_mean, ModelData, SubjectDesign, Workspace};
pub use lags::{select_lags, LagReport};
pub use prune::{prune_ranks, ColumnNormWindow, RankReport};
pub use state::PanelState;
pub use steps::{gibbs_sweep, run_step, Step, SWEEP_ORDER};

use crate::error::{Error, Result};
use crate::priors::PriorConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub lags: usize,
    pub ranks: [usize; 3],
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub prune_enabled: bool,
    /// Relative to the largest windowed column norm of the same factor.
    pub prune_threshold: f64,
    pub prune_window: usize,
    pub prior: PriorConfig,
    /// Panel deviations and intercepts; ignored for a single subject.
    pub random_effects: bool,
    /// Keep every thinned subject transition matrix, not only their means.
    pub store_subject_draws: bool,
    /// Flag draws whose companion matrix has spectral radius ≥ 1.
    pub check_stability: bool,
}

impl SamplerConfig {
    pub fn new(lags: usize, ranks: [usize; 3]) -> Self {
        Self {
            lags,
            ranks,
            iterations: 5000,
            burn_in: 2500,
            thin: 5,
            seed: 0,
            prune_enabled: true,
            prune_threshold: 1e-3,
            prune_window: 50,
            prior: PriorConfig::default(),
            random_effects: true,
            store_subject_draws: false,
            check_stability: true,
        }
    }

    /// Checks the counts and the rank bounds for `k` series.
    pub fn validate(&self, k: usize) -> Result<()> {
        let [r1, r2, r3] = self.ranks;
        if self.lags == 0 {
            return Err(Error::InvalidArgument("lag order must be positive".into()));
        }
        if r1 == 0 || r2 == 0 || r3 == 0 || r1 > k || r2 > k || r3 > self.lags {
            return Err(Error::Dimension(format!("ranks ({r1}, {r2}, {r3}) must be positive and within (K={k}, K={k}, L={})", self.lags)));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::InvalidArgument(format!("iterations ({}) must exceed burn-in ({})", self.iterations, self.burn_in)));
        }
        if self.thin == 0 || self.prune_window == 0 {
            return Err(Error::InvalidArgument("thin and prune window must be positive".into()));
        }
        if !(self.prune_threshold >= 0.0) || !self.prune_threshold.is_finite() {
            return Err(Error::InvalidArgument(format!("prune threshold must be >= 0, got {}", self.prune_threshold)));
        }
        self.prior.validate()
    }

    /// `(iterations − burn_in) / thin`.
    pub fn draw_count(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}
