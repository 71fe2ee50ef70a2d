//! Horseshoe / multiplicative-gamma-process shrinkage hierarchy.
//!
//! Every half-Cauchy scale is represented through the inverse-gamma auxiliary
//! pair `a ~ Inv-Ga(1/2, 1/A²)`, `x² | a ~ Inv-Ga(1/2, 1/a)`, which makes all
//! scale conditionals inverse-gamma. Factor columns additionally carry the
//! cumulative-product weights `ψ_r = δ_1 ⋯ δ_r` with `δ_1 ~ Ga(a1, 1)` and
//! `δ_r ~ Ga(a2, 1)` for `r ≥ 2`, so later columns are shrunk harder.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3, Vector};

/// Lower bound applied to every sampled scale.
pub const SCALE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub a1: f64,
    pub a2: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { a1: 2.1, a2: 3.1, a_sigma: 1.0, b_sigma: 1.0 }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.a1, self.a2, self.a_sigma, self.b_sigma].iter().all(|v| v.is_finite() && *v > 0.0);
        if !ok {
            return Err(Error::InvalidArgument(format!("prior hyperparameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// `Ga(shape, rate)` draw.
pub fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("gamma shape must be positive");
    let x: f64 = g.sample(rng);
    (x / rate).max(SCALE_FLOOR)
}

/// `Inv-Ga(shape, scale)` draw, floored at [`SCALE_FLOOR`].
pub fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("inverse-gamma shape must be positive");
    let x: f64 = g.sample(rng);
    (scale / x).max(SCALE_FLOOR)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws `x²` with `x ~ C⁺(0, scale)` through the auxiliary hierarchy and
/// returns `(x², auxiliary)`.
pub fn sample_half_cauchy_sq<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> (f64, f64) {
    let aux = inv_gamma(0.5, 1.0 / (scale * scale), rng);
    (inv_gamma(0.5, 1.0 / aux, rng), aux)
}

/// `x² | a ~ Inv-Ga(1/2, 1/a)`.
pub fn sample_sq_given_aux<R: Rng + ?Sized>(aux: f64, rng: &mut R) -> f64 {
    inv_gamma(0.5, 1.0 / aux, rng)
}

/// Conditional of a local scale `τ²` given its auxiliary and `n` Gaussian
/// coefficients whose summed `θ²/(other scale factors)` is `sum_sq`:
/// `Inv-Ga((1+n)/2, 1/φ + sum_sq/2)`.
pub fn update_scale<R: Rng + ?Sized>(aux: f64, count: usize, sum_sq: f64, rng: &mut R) -> f64 {
    inv_gamma(0.5 * (1.0 + count as f64), 1.0 / aux + 0.5 * sum_sq, rng)
}

/// Conditional of an auxiliary `φ` given its scale: `Inv-Ga(1, 1/A² + 1/x²)`.
pub fn update_aux<R: Rng + ?Sized>(scale_sq: f64, outer_scale: f64, rng: &mut R) -> f64 {
    inv_gamma(1.0, 1.0 / (outer_scale * outer_scale) + 1.0 / scale_sq, rng)
}

/// Cumulative products of the increments.
pub fn mgps_psi(delta: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = delta.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::InvalidArgument(format!("MGPS increments must be positive, got {bad}")));
    }
    Ok(delta
        .iter()
        .scan(1.0, |acc, d| {
            *acc *= d;
            Some(*acc)
        })
        .collect())
}

/// Increments from their prior: `δ_1 ~ Ga(a1, 1)`, `δ_r ~ Ga(a2, 1)`.
pub fn draw_prior_delta<R: Rng + ?Sized>(columns: usize, prior: &PriorConfig, rng: &mut R) -> Vec<f64> {
    (0..columns).map(|r| gamma(if r == 0 { prior.a1 } else { prior.a2 }, 1.0, rng)).collect()
}

/// Shrinkage coefficient `κ = 1/(1 + σ²_β)`.
pub fn kappa(sigma2_beta: f64) -> f64 {
    1.0 / (1.0 + sigma2_beta)
}

/// Local scales `τ²` and their auxiliaries `φ`, one per factor entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalScales {
    pub tau2: Matrix,
    pub phi: Matrix,
}

impl LocalScales {
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self { tau2: Matrix::from_element(rows, cols, 1.0), phi: Matrix::from_element(rows, cols, 1.0) }
    }

    pub fn draw_prior<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut s = Self::ones(rows, cols);
        for v in 0..rows * cols {
            let (t, a) = sample_half_cauchy_sq(1.0, rng);
            s.tau2[v] = t;
            s.phi[v] = a;
        }
        s
    }

    pub fn remove_column(&mut self, r: usize) {
        self.tau2 = self.tau2.clone().remove_column(r);
        self.phi = self.phi.clone().remove_column(r);
    }
}

/// Hyperparameters of one factor matrix `β_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorHyper {
    pub local: LocalScales,
    pub lambda2: f64,
    pub delta: Vec<f64>,
    pub psi: Vec<f64>,
}

impl FactorHyper {
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self { local: LocalScales::ones(rows, cols), lambda2: 1.0, delta: vec![1.0; cols], psi: vec![1.0; cols] }
    }

    pub fn refresh_psi(&mut self) {
        self.psi = mgps_psi(&self.delta).expect("increments are floored positive");
    }

    pub fn remove_column(&mut self, r: usize) {
        self.local.remove_column(r);
        self.delta.remove(r);
        self.refresh_psi();
    }
}

/// Elementwise horseshoe scales for the core tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreHyper {
    pub tau2: Tensor3,
    pub phi: Tensor3,
    pub lambda2: f64,
}

/// Elementwise horseshoe scales for the intercept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterceptHyper {
    pub tau2: Vector,
    pub phi: Vector,
    pub lambda2: f64,
}

/// Every shrinkage parameter of one chain.
///
/// For panels, `beta1_dev` holds separate local scales per subject deviation
/// and `lambda2_dev` their global scale; the deviations share `ψ` with the
/// fixed loading `factors[0]`. Random intercepts `α_i` have entries
/// `N(0, λ²_α σ²_ε)`. All global scales hang off the common auxiliary `ξ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperState {
    pub factors: [FactorHyper; 3],
    pub beta1_dev: Vec<LocalScales>,
    pub lambda2_dev: f64,
    pub core: CoreHyper,
    pub nu: InterceptHyper,
    pub lambda2_alpha: f64,
    pub xi: f64,
    pub sigma2: f64,
    pub prior: PriorConfig,
}

impl HyperState {
    /// All scales at one. `subjects > 1` enables the panel scales.
    pub fn ones(k: usize, lags: usize, ranks: [usize; 3], subjects: usize, prior: PriorConfig) -> Self {
        let dev = if subjects > 1 { subjects } else { 0 };
        Self {
            factors: [FactorHyper::ones(k, ranks[0]), FactorHyper::ones(k, ranks[1]), FactorHyper::ones(lags, ranks[2])],
            beta1_dev: (0..dev).map(|_| LocalScales::ones(k, ranks[0])).collect(),
            lambda2_dev: 1.0,
            core: CoreHyper {
                tau2: Tensor3::from_fn(ranks, |_, _, _| 1.0).expect("positive ranks"),
                phi: Tensor3::from_fn(ranks, |_, _, _| 1.0).expect("positive ranks"),
                lambda2: 1.0,
            },
            nu: InterceptHyper { tau2: Vector::from_element(k, 1.0), phi: Vector::from_element(k, 1.0), lambda2: 1.0 },
            lambda2_alpha: 1.0,
            xi: 1.0,
            sigma2: 1.0,
            prior,
        }
    }

    pub fn is_panel(&self) -> bool {
        !self.beta1_dev.is_empty()
    }

    /// Number of global scales attached to `ξ`.
    pub fn global_count(&self) -> usize {
        if self.is_panel() {
            7
        } else {
            5
        }
    }

    pub fn inverse_global_sum(&self) -> f64 {
        let mut s = self.factors.iter().map(|f| 1.0 / f.lambda2).sum::<f64>() + 1.0 / self.core.lambda2 + 1.0 / self.nu.lambda2;
        if self.is_panel() {
            s += 1.0 / self.lambda2_dev + 1.0 / self.lambda2_alpha;
        }
        s
    }

    /// Joint prior draw of every scale (and `σ²_ε ~ Inv-Ga(a_σ, b_σ)`).
    pub fn draw_prior<R: Rng + ?Sized>(k: usize, lags: usize, ranks: [usize; 3], subjects: usize, prior: PriorConfig, rng: &mut R) -> Self {
        let mut h = Self::ones(k, lags, ranks, subjects, prior);
        h.xi = inv_gamma(0.5, 1.0, rng);
        let xi = h.xi;
        for (j, f) in h.factors.iter_mut().enumerate() {
            let rows = if j == 2 { lags } else { k };
            f.local = LocalScales::draw_prior(rows, ranks[j], rng);
            f.lambda2 = sample_sq_given_aux(xi, rng);
            f.delta = draw_prior_delta(ranks[j], &prior, rng);
            f.refresh_psi();
        }
        for d in h.beta1_dev.iter_mut() {
            *d = LocalScales::draw_prior(k, ranks[0], rng);
        }
        if h.is_panel() {
            h.lambda2_dev = sample_sq_given_aux(xi, rng);
            h.lambda2_alpha = sample_sq_given_aux(xi, rng);
        }
        for v in 0..h.core.tau2.values().len() {
            let (t, a) = sample_half_cauchy_sq(1.0, rng);
            h.core.tau2.values_mut()[v] = t;
            h.core.phi.values_mut()[v] = a;
        }
        h.core.lambda2 = sample_sq_given_aux(xi, rng);
        for v in 0..k {
            let (t, a) = sample_half_cauchy_sq(1.0, rng);
            h.nu.tau2[v] = t;
            h.nu.phi[v] = a;
        }
        h.nu.lambda2 = sample_sq_given_aux(xi, rng);
        h.sigma2 = inv_gamma(prior.a_sigma, prior.b_sigma, rng);
        h
    }

    /// Prior variance `τ²_{j,k,r} λ²_j σ²_ε / ψ_{j,r}` of a factor entry.
    /// `j` is zero-based.
    pub fn beta_variance(&self, j: usize, k: usize, r: usize) -> f64 {
        let f = &self.factors[j];
        f.local.tau2[(k, r)] * f.lambda2 * self.sigma2 / f.psi[r]
    }

    pub fn check_psi(&self) -> bool {
        self.factors.iter().all(|f| {
            let expect = mgps_psi(&f.delta).unwrap_or_default();
            expect.len() == f.psi.len() && expect.iter().zip(&f.psi).all(|(a, b)| a == b)
        })
    }
}

/// Draw of `β_{j,k,r} ~ N(0, τ²λ²σ²/ψ)` under `hyper` (zero-based indices).
pub fn draw_prior_beta_entry<R: Rng + ?Sized>(j: usize, k: usize, r: usize, hyper: &HyperState, rng: &mut R) -> Result<f64> {
    let f = hyper.factors.get(j).ok_or_else(|| Error::Index(format!("factor index {j} outside 0..3")))?;
    if k >= f.local.tau2.nrows() || r >= f.local.tau2.ncols() {
        return Err(Error::Index(format!("entry ({k}, {r}) outside factor {j}")));
    }
    Ok(hyper.beta_variance(j, k, r).sqrt() * std_normal(rng))
}
