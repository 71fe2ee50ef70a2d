use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{std_normal, HyperState, PriorConfig};
use crate::tensor::{kronecker, mode_n_matricize, Matrix, Tensor3, TuckerFactors, Vector};
use crate::var::PanelData;

use super::SamplerConfig;

const INIT_SD: f64 = 0.1;

/// Every sampled quantity of one chain.
///
/// `beta1_dev[i]` is the subject deviation, so subject `i` loads on
/// `beta1 + beta1_dev[i]`. Single-subject states have no deviations and a
/// single all-zero `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelState {
    pub beta1: Matrix,
    pub beta1_dev: Vec<Matrix>,
    pub beta2: Matrix,
    pub beta3: Matrix,
    pub core: Tensor3,
    pub nu: Vector,
    pub alpha: Vec<Vector>,
    pub hyper: HyperState,
}

impl PanelState {
    pub fn k(&self) -> usize {
        self.beta1.nrows()
    }

    pub fn lags(&self) -> usize {
        self.beta3.nrows()
    }

    pub fn ranks(&self) -> [usize; 3] {
        self.core.dims()
    }

    pub fn subjects(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_panel(&self) -> bool {
        !self.beta1_dev.is_empty()
    }

    /// `β1 + β1_dev[i]`.
    pub fn subject_loading(&self, i: usize) -> Matrix {
        match self.beta1_dev.get(i) {
            Some(d) => &self.beta1 + d,
            None => self.beta1.clone(),
        }
    }

    pub fn fixed_factors(&self) -> TuckerFactors {
        TuckerFactors { core: self.core.clone(), beta1: self.beta1.clone(), beta2: self.beta2.clone(), beta3: self.beta3.clone() }
    }

    /// `G_(1) (β3 ⊗ β2)ᵀ`, the `R1 × KL` block shared by every subject.
    pub fn shared_block(&self) -> Matrix {
        let g1 = mode_n_matricize(&self.core, 1).expect("core is a valid tensor");
        g1 * kronecker(&self.beta3, &self.beta2).transpose()
    }

    pub fn fixed_b(&self) -> Matrix {
        &self.beta1 * self.shared_block()
    }

    pub fn subject_b(&self, i: usize) -> Matrix {
        self.subject_loading(i) * self.shared_block()
    }

    /// `(B_fixed, [B_i])` with one shared-block evaluation.
    pub fn all_b(&self) -> (Matrix, Vec<Matrix>) {
        let s = self.shared_block();
        let fixed = &self.beta1 * &s;
        let subjects = (0..self.subjects()).map(|i| self.subject_loading(i) * &s).collect();
        (fixed, subjects)
    }

    /// `G ×3 (1ᵀβ3)` contracted against `β1_i` and `β2`: `Σ_ℓ A_{i,ℓ}`.
    pub fn subject_lag_sum(&self, i: usize) -> Matrix {
        let [r1, r2, r3] = self.ranks();
        let colsum: Vec<f64> = (0..r3).map(|c| self.beta3.column(c).sum()).collect();
        let gsum = Matrix::from_fn(r1, r2, |a, b| (0..r3).map(|c| self.core.at(a, b, c) * colsum[c]).sum());
        self.subject_loading(i) * gsum * self.beta2.transpose()
    }

    pub fn validate(&self) -> Result<()> {
        self.fixed_factors().validate()?;
        let k = self.k();
        let r1 = self.ranks()[0];
        if self.nu.len() != k {
            return Err(Error::Dimension(format!("intercept has length {}, expected {k}", self.nu.len())));
        }
        if self.alpha.is_empty() || self.alpha.iter().any(|a| a.len() != k) {
            return Err(Error::Dimension("subject intercepts missing or of wrong length".into()));
        }
        if self.is_panel() && self.beta1_dev.len() != self.alpha.len() {
            return Err(Error::Dimension("one loading deviation per subject required".into()));
        }
        if self.beta1_dev.iter().any(|d| d.shape() != (k, r1)) {
            return Err(Error::Dimension("loading deviation shape differs from beta1".into()));
        }
        let (fixed, subjects) = self.all_b();
        if fixed.iter().chain(subjects.iter().flat_map(|b| b.iter())).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: "state", detail: "reconstructed transition matrix".into() });
        }
        Ok(())
    }

    /// Starting point: factors and core `N(0, 0.1²)`, `ν` the pooled sample
    /// mean, `α_i` each subject's mean minus the pooled mean, scales at one.
    pub fn initialize<R: Rng + ?Sized>(data: &PanelData, cfg: &SamplerConfig, rng: &mut R) -> Result<Self> {
        data.validate()?;
        let k = data.k();
        cfg.validate(k)?;
        let n = data.n();
        let panel = n > 1 && cfg.random_effects;
        let [r1, r2, r3] = cfg.ranks;
        let mut normal = |rows: usize, cols: usize| Matrix::from_fn(rows, cols, |_, _| INIT_SD * std_normal(rng));
        let beta1 = normal(k, r1);
        let beta2 = normal(k, r2);
        let beta3 = normal(cfg.lags, r3);
        let beta1_dev = if panel { (0..n).map(|_| normal(k, r1)).collect() } else { Vec::new() };
        let core = Tensor3::from_fn(cfg.ranks, |_, _, _| INIT_SD * std_normal(rng))?;

        let means: Vec<Vector> = (0..n).map(|i| data.train(i).row_mean().transpose()).collect();
        let mut nu = means.iter().fold(Vector::zeros(k), |acc, m| acc + m) / n as f64;
        if nu.iter().any(|v| !v.is_finite()) {
            nu = Vector::zeros(k);
        }
        let alpha = if panel { means.iter().map(|m| m - &nu).collect() } else { vec![Vector::zeros(k); n.min(1)] };
        let hyper = HyperState::ones(k, cfg.lags, cfg.ranks, if panel { n } else { 1 }, cfg.prior);
        let state = Self { beta1, beta1_dev, beta2, beta3, core, nu, alpha, hyper };
        state.validate()?;
        Ok(state)
    }

    /// Joint draw of every parameter from the prior hierarchy.
    pub fn draw_prior<R: Rng + ?Sized>(
        k: usize,
        lags: usize,
        ranks: [usize; 3],
        subjects: usize,
        prior: PriorConfig,
        rng: &mut R,
    ) -> Result<Self> {
        prior.validate()?;
        let hyper = HyperState::draw_prior(k, lags, ranks, subjects, prior, rng);
        let sigma2 = hyper.sigma2;
        let factor = |j: usize, rows: usize, rng: &mut R| {
            let f = &hyper.factors[j];
            Matrix::from_fn(rows, ranks[j], |a, r| (f.local.tau2[(a, r)] * f.lambda2 * sigma2 / f.psi[r]).sqrt() * std_normal(rng))
        };
        let beta1 = factor(0, k, rng);
        let beta2 = factor(1, k, rng);
        let beta3 = factor(2, lags, rng);
        let psi1 = &hyper.factors[0].psi;
        let beta1_dev = hyper
            .beta1_dev
            .iter()
            .map(|s| Matrix::from_fn(k, ranks[0], |a, r| (s.tau2[(a, r)] * hyper.lambda2_dev * sigma2 / psi1[r]).sqrt() * std_normal(rng)))
            .collect();
        let mut core = Tensor3::zeros(ranks)?;
        for (v, t) in core.values_mut().iter_mut().zip(hyper.core.tau2.values()) {
            *v = (t * hyper.core.lambda2 * sigma2).sqrt() * std_normal(rng);
        }
        let nu = Vector::from_fn(k, |a, _| (hyper.nu.tau2[a] * hyper.nu.lambda2 * sigma2).sqrt() * std_normal(rng));
        let alpha = if hyper.is_panel() {
            (0..subjects).map(|_| Vector::from_fn(k, |_, _| (hyper.lambda2_alpha * sigma2).sqrt() * std_normal(rng))).collect()
        } else {
            vec![Vector::zeros(k)]
        };
        Ok(Self { beta1, beta1_dev, beta2, beta3, core, nu, alpha, hyper })
    }

    /// Removes column `r` of factor `j` (zero-based) with its core slice
    /// and shrinkage parameters.
    pub fn remove_column(&mut self, j: usize, r: usize) -> Result<()> {
        let ranks = self.ranks();
        if j > 2 || r >= ranks[j] {
            return Err(Error::Index(format!("column {r} of factor {j} out of range for ranks {ranks:?}")));
        }
        if ranks[j] == 1 {
            return Err(Error::RankZero(format!("factor {} would lose its last column", j + 1)));
        }
        let keep: Vec<usize> = (0..ranks[j]).filter(|c| *c != r).collect();
        match j {
            0 => {
                self.beta1 = self.beta1.clone().remove_column(r);
                for d in self.beta1_dev.iter_mut() {
                    *d = d.clone().remove_column(r);
                }
                for s in self.hyper.beta1_dev.iter_mut() {
                    s.remove_column(r);
                }
            }
            1 => self.beta2 = self.beta2.clone().remove_column(r),
            _ => self.beta3 = self.beta3.clone().remove_column(r),
        }
        self.hyper.factors[j].remove_column(r);
        self.core = self.core.select(j + 1, &keep)?;
        self.hyper.core.tau2 = self.hyper.core.tau2.select(j + 1, &keep)?;
        self.hyper.core.phi = self.hyper.core.phi.select(j + 1, &keep)?;
        Ok(())
    }
}
