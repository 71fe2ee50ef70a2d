#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tdvar_core::priors::PriorConfig;
use tdvar_core::sampler::{gibbs_sweep, run_step, ModelData, PanelState, Step, Workspace};
use tdvar_core::{Matrix, Tensor3, TuckerFactors, Vector};

/// Transition matrices `A_ℓ` of subject `i`, rebuilt through the tensor
/// library rather than the sampler's unfolding.
pub fn oracle_lag_matrices(state: &PanelState, i: usize) -> Vec<Matrix> {
    let loading = if state.is_panel() { &state.beta1 + &state.beta1_dev[i] } else { state.beta1.clone() };
    let f = TuckerFactors::new(state.core.clone(), loading, state.beta2.clone(), state.beta3.clone()).unwrap();
    let t = f.reconstruct().unwrap();
    (0..state.lags()).map(|l| t.frontal_slice(l).unwrap()).collect()
}

fn oracle_alpha(state: &PanelState, i: usize) -> Vector {
    if state.is_panel() {
        state.alpha[i].clone()
    } else {
        Vector::zeros(state.k())
    }
}

/// One-step means `ν + α_i + Σ_ℓ A_ℓ (y_{t-ℓ} − α_i)` for rows `L..T`.
pub fn oracle_means(state: &PanelState, y: &Matrix, i: usize) -> Matrix {
    let lags = state.lags();
    let a = oracle_lag_matrices(state, i);
    let alpha = oracle_alpha(state, i);
    let mut out = Matrix::zeros(y.nrows() - lags, y.ncols());
    for t in lags..y.nrows() {
        let mut m = &state.nu + &alpha;
        for (l, al) in a.iter().enumerate() {
            let x = y.row(t - l - 1).transpose() - &alpha;
            m += al * x;
        }
        out.set_row(t - lags, &m.transpose());
    }
    out
}

/// Replaces rows `L..T` of each series by a draw from the model given `state`.
pub fn simulate_given(state: &PanelState, series: &mut [Matrix], rng: &mut ChaCha8Rng) {
    let lags = state.lags();
    let sd = state.hyper.sigma2.sqrt();
    for (i, y) in series.iter_mut().enumerate() {
        let a = oracle_lag_matrices(state, i);
        let alpha = oracle_alpha(state, i);
        for t in lags..y.nrows() {
            let mut m = &state.nu + &alpha;
            for (l, al) in a.iter().enumerate() {
                m += al * (y.row(t - l - 1).transpose() - &alpha);
            }
            for j in 0..y.ncols() {
                y[(t, j)] = m[j] + sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
}

fn ln_normal(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * x * x / var
}

fn ln_inv_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

fn ln_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Full log joint density `log p(y, θ)` written out term by term.
pub fn log_joint(state: &PanelState, series: &[Matrix], prior: &PriorConfig) -> f64 {
    let h = &state.hyper;
    let s2 = h.sigma2;
    let mut lp = 0.0;
    for (i, y) in series.iter().enumerate() {
        let m = oracle_means(state, y, i);
        let lags = state.lags();
        for t in 0..m.nrows() {
            for j in 0..m.ncols() {
                lp += ln_normal(y[(t + lags, j)] - m[(t, j)], s2);
            }
        }
    }
    let factors = [&state.beta1, &state.beta2, &state.beta3];
    for (j, b) in factors.iter().enumerate() {
        let f = &h.factors[j];
        let mut psi = 1.0;
        for r in 0..b.ncols() {
            psi *= f.delta[r];
            let shape = if r == 0 { prior.a1 } else { prior.a2 };
            lp += ln_gamma_density(f.delta[r], shape, 1.0);
            for a in 0..b.nrows() {
                lp += ln_normal(b[(a, r)], f.local.tau2[(a, r)] * f.lambda2 * s2 / psi);
                lp += ln_inv_gamma(f.local.tau2[(a, r)], 0.5, 1.0 / f.local.phi[(a, r)]);
                lp += ln_inv_gamma(f.local.phi[(a, r)], 0.5, 1.0);
            }
        }
        lp += ln_inv_gamma(f.lambda2, 0.5, 1.0 / h.xi);
    }
    let psi1: Vec<f64> = h.factors[0]
        .delta
        .iter()
        .scan(1.0, |acc, d| {
            *acc *= d;
            Some(*acc)
        })
        .collect();
    for (dev, sc) in state.beta1_dev.iter().zip(&h.beta1_dev) {
        for r in 0..dev.ncols() {
            for a in 0..dev.nrows() {
                lp += ln_normal(dev[(a, r)], sc.tau2[(a, r)] * h.lambda2_dev * s2 / psi1[r]);
                lp += ln_inv_gamma(sc.tau2[(a, r)], 0.5, 1.0 / sc.phi[(a, r)]);
                lp += ln_inv_gamma(sc.phi[(a, r)], 0.5, 1.0);
            }
        }
    }
    for ((g, t), p) in state.core.values().iter().zip(h.core.tau2.values()).zip(h.core.phi.values()) {
        lp += ln_normal(*g, t * h.core.lambda2 * s2);
        lp += ln_inv_gamma(*t, 0.5, 1.0 / p);
        lp += ln_inv_gamma(*p, 0.5, 1.0);
    }
    lp += ln_inv_gamma(h.core.lambda2, 0.5, 1.0 / h.xi);
    for a in 0..state.k() {
        lp += ln_normal(state.nu[a], h.nu.tau2[a] * h.nu.lambda2 * s2);
        lp += ln_inv_gamma(h.nu.tau2[a], 0.5, 1.0 / h.nu.phi[a]);
        lp += ln_inv_gamma(h.nu.phi[a], 0.5, 1.0);
    }
    lp += ln_inv_gamma(h.nu.lambda2, 0.5, 1.0 / h.xi);
    if state.is_panel() {
        for al in &state.alpha {
            for v in al.iter() {
                lp += ln_normal(*v, h.lambda2_alpha * s2);
            }
        }
        lp += ln_inv_gamma(h.lambda2_dev, 0.5, 1.0 / h.xi);
        lp += ln_inv_gamma(h.lambda2_alpha, 0.5, 1.0 / h.xi);
    }
    lp += ln_inv_gamma(h.xi, 0.5, 1.0);
    lp += ln_inv_gamma(s2, prior.a_sigma, prior.b_sigma);
    lp
}

/// Kolmogorov–Smirnov distance between `draws` and the density proportional
/// to `exp(log_density)`, integrated numerically on a grid covering the draws.
/// Positive parameters are gridded in `log x`.
pub fn ks_against_grid(draws: &mut [f64], positive: bool, log_density: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len();
    let to_u = |x: f64| if positive { x.ln() } else { x };
    let from_u = |u: f64| if positive { u.exp() } else { u };
    let (lo, hi) = (to_u(draws[0]), to_u(draws[n - 1]));
    let pad = 0.5 * (hi - lo).max(1e-6);
    let (lo, hi) = (lo - pad, hi + pad);
    let m = 20_000;
    let du = (hi - lo) / m as f64;
    let us: Vec<f64> = (0..=m).map(|i| lo + i as f64 * du).collect();
    let lds: Vec<f64> = us.iter().map(|u| log_density(from_u(*u)) + if positive { *u } else { 0.0 }).collect();
    let top = lds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = lds.iter().map(|l| (l - top).exp()).collect();
    let mut cdf = vec![0.0; m + 1];
    for i in 1..=m {
        cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * du;
    }
    let total = cdf[m];
    let cdf_at = |x: f64| {
        let pos = ((to_u(x) - lo) / du).clamp(0.0, m as f64);
        let i = (pos.floor() as usize).min(m - 1);
        let frac = pos - i as f64;
        (cdf[i] + frac * (cdf[i + 1] - cdf[i])) / total
    };
    let mut d: f64 = 0.0;
    for (i, x) in draws.iter().enumerate() {
        let f = cdf_at(*x);
        d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    d
}

/// Bounded or light-tailed summaries of the full parameter state.
pub fn monitored(state: &PanelState) -> Vec<(String, f64)> {
    let h = &state.hyper;
    let mut out = vec![("ln sigma2".to_string(), h.sigma2.ln())];
    let b = state.fixed_b();
    for (idx, v) in b.iter().enumerate() {
        out.push((format!("atan B[{idx}]"), v.atan()));
    }
    if state.is_panel() {
        out.push(("atan B_0[0]".into(), state.subject_b(0)[0].atan()));
        out.push(("atan alpha_0[0]".into(), state.alpha[0][0].atan()));
        out.push(("shrink lambda2_dev".into(), 1.0 / (1.0 + h.lambda2_dev)));
        out.push(("shrink lambda2_alpha".into(), 1.0 / (1.0 + h.lambda2_alpha)));
    }
    for (a, v) in state.nu.iter().enumerate() {
        out.push((format!("atan nu[{a}]"), v.atan()));
    }
    for j in 0..3 {
        out.push((format!("shrink lambda2_{}", j + 1), 1.0 / (1.0 + h.factors[j].lambda2)));
    }
    out.push(("shrink lambda2_core".into(), 1.0 / (1.0 + h.core.lambda2)));
    out.push(("shrink lambda2_nu".into(), 1.0 / (1.0 + h.nu.lambda2)));
    out.push(("shrink xi".into(), 1.0 / (1.0 + h.xi)));
    out.push(("shrink tau2 beta1[0,0]".into(), 1.0 / (1.0 + h.factors[0].local.tau2[(0, 0)])));
    out.push(("shrink tau2 core[0]".into(), 1.0 / (1.0 + h.core.tau2.values()[0])));
    out.push(("shrink delta1".into(), 1.0 / (1.0 + h.factors[0].delta[0])));
    out.push(("atan beta1[0,0]".into(), state.beta1[(0, 0)].atan()));
    out.push(("atan core[0]".into(), state.core.values()[0].atan()));
    out
}

pub struct InvarianceSetup {
    pub k: usize,
    pub lags: usize,
    pub ranks: [usize; 3],
    pub subjects: usize,
    pub t: usize,
    pub prior: PriorConfig,
}

impl InvarianceSetup {
    fn presample(&self) -> Vec<Matrix> {
        (0..self.subjects)
            .map(|i| Matrix::from_fn(self.t, self.k, |t, j| if t < self.lags { 0.5 - 0.3 * (i + j + t) as f64 } else { 0.0 }))
            .collect()
    }

    fn prior_state(&self, rng: &mut ChaCha8Rng) -> PanelState {
        PanelState::draw_prior(self.k, self.lags, self.ranks, self.subjects, self.prior, rng).unwrap()
    }
}

/// Largest data magnitude kept by [`joint_invariance`]. Beyond it the
/// residuals of an explosive draw are dominated by rounding.
pub const DATA_CEILING: f64 = 1e9;

/// Monitored summaries before and after a run of Gibbs sweeps. Each
/// replicate draws `(θ, y)` from the joint, keeps it when `|y| ≤ DATA_CEILING`,
/// and applies `sweeps` sweeps with `y` held fixed. Both the start and the end
/// are then draws from `p(θ | y ∈ E)` when every sweep leaves `p(θ | y)`
/// invariant. `perturb` runs after every sweep (negative controls).
pub struct Invariance {
    pub names: Vec<String>,
    pub before: Vec<Vec<f64>>,
    pub after: Vec<Vec<f64>>,
    pub rejected: usize,
}

pub fn joint_invariance(
    setup: &InvarianceSetup,
    n: usize,
    sweeps: usize,
    rng: &mut ChaCha8Rng,
    perturb: Option<fn(&mut PanelState)>,
) -> Invariance {
    let mut out = Invariance { names: Vec::new(), before: Vec::new(), after: Vec::new(), rejected: 0 };
    while out.before.len() < n {
        let mut state = setup.prior_state(rng);
        let mut series = setup.presample();
        simulate_given(&state, &mut series, rng);
        if series.iter().any(|y| y.amax() > DATA_CEILING) {
            out.rejected += 1;
            continue;
        }
        let start = monitored(&state);
        let model = ModelData::from_series(&series, setup.lags).unwrap();
        let mut ws = Workspace::new(&state, &model).unwrap();
        for _ in 0..sweeps {
            gibbs_sweep(&mut state, &model, &mut ws, rng).unwrap();
            if let Some(f) = perturb {
                f(&mut state);
            }
        }
        if out.names.is_empty() {
            out.names = start.iter().map(|(k, _)| k.clone()).collect();
        }
        out.before.push(start.into_iter().map(|(_, v)| v).collect());
        out.after.push(monitored(&state).into_iter().map(|(_, v)| v).collect());
    }
    out
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Paired z-scores for the first and second moments of every monitored
/// quantity.
pub fn invariance_scores(inv: &Invariance) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (q, name) in inv.names.iter().enumerate() {
        for power in [1, 2] {
            let d: Vec<f64> = inv.before.iter().zip(&inv.after).map(|(a, b)| b[q].powi(power) - a[q].powi(power)).collect();
            let (m, v) = mean_var(&d);
            let z = if v > 0.0 { m / (v / d.len() as f64).sqrt() } else { 0.0 };
            out.push((format!("{name}^{power}"), z));
        }
    }
    out
}

/// Two-sided standard-normal critical value at family level `alpha` split
/// over `m` tests.
pub fn bonferroni_critical(alpha: f64, m: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha / (2.0 * m as f64))
}

/// A moderate one-series panel state: every block is a scalar, so each
/// conditional is one-dimensional.
pub fn scalar_panel_state() -> PanelState {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let prior = PriorConfig::default();
    let mut s = PanelState::draw_prior(1, 1, [1, 1, 1], 2, prior, &mut rng).unwrap();
    s.beta1[(0, 0)] = 0.8;
    s.beta2[(0, 0)] = 0.9;
    s.beta3[(0, 0)] = 0.7;
    s.core = Tensor3::from_vec([1, 1, 1], vec![1.1]).unwrap();
    s.beta1_dev = vec![Matrix::from_element(1, 1, 0.1), Matrix::from_element(1, 1, -0.15)];
    s.nu = Vector::from_element(1, 0.4);
    s.alpha = vec![Vector::from_element(1, 0.3), Vector::from_element(1, -0.2)];
    let h = &mut s.hyper;
    h.sigma2 = 0.5;
    h.xi = 0.8;
    h.lambda2_dev = 0.6;
    h.lambda2_alpha = 1.3;
    for f in h.factors.iter_mut() {
        f.lambda2 = 1.2;
        f.local.tau2.fill(0.9);
        f.local.phi.fill(1.1);
        f.delta.fill(1.5);
        f.refresh_psi();
    }
    for d in h.beta1_dev.iter_mut() {
        d.tau2.fill(0.7);
        d.phi.fill(1.4);
    }
    h.core.lambda2 = 0.9;
    h.core.tau2.values_mut().fill(1.2);
    h.core.phi.values_mut().fill(0.8);
    h.nu.lambda2 = 1.1;
    h.nu.tau2.fill(0.6);
    h.nu.phi.fill(1.3);
    s
}

pub fn scalar_panel_data(state: &PanelState) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut series = vec![Matrix::from_element(30, 1, 0.2), Matrix::from_element(30, 1, -0.1)];
    simulate_given(state, &mut series, &mut rng);
    series
}

pub type Coord = (Step, bool, fn(&PanelState) -> f64, fn(&mut PanelState, f64));

pub fn coordinates() -> Vec<Coord> {
    vec![
        (Step::Sigma2, true, |s| s.hyper.sigma2, |s, x| s.hyper.sigma2 = x),
        (Step::LocalScales, true, |s| s.hyper.factors[0].local.tau2[(0, 0)], |s, x| s.hyper.factors[0].local.tau2[(0, 0)] = x),
        (Step::GlobalScales, true, |s| s.hyper.factors[1].lambda2, |s, x| s.hyper.factors[1].lambda2 = x),
        (Step::Delta, true, |s| s.hyper.factors[0].delta[0], |s, x| s.hyper.factors[0].delta[0] = x),
        (Step::Beta1, false, |s| s.beta1[(0, 0)], |s, x| s.beta1[(0, 0)] = x),
        (Step::Beta2, false, |s| s.beta2[(0, 0)], |s, x| s.beta2[(0, 0)] = x),
        (Step::Beta3, false, |s| s.beta3[(0, 0)], |s, x| s.beta3[(0, 0)] = x),
        (Step::Core, false, |s| s.core.values()[0], |s, x| s.core.values_mut()[0] = x),
        (Step::Intercept, false, |s| s.nu[0], |s, x| s.nu[0] = x),
        (Step::RandomIntercepts, false, |s| s.alpha[0][0], |s, x| s.alpha[0][0] = x),
        (Step::Auxiliaries, true, |s| s.hyper.factors[0].local.phi[(0, 0)], |s, x| s.hyper.factors[0].local.phi[(0, 0)] = x),
        (Step::Xi, true, |s| s.hyper.xi, |s, x| s.hyper.xi = x),
    ]
}

/// KS distance between repeated single-block updates from a frozen state and
/// the grid posterior of the full log joint along that coordinate.
pub fn isolated_ks(coord: &Coord, draws: usize, seed: u64) -> f64 {
    let (step, positive, get, set) = *coord;
    let state = scalar_panel_state();
    let series = scalar_panel_data(&state);
    let model = ModelData::from_series(&series, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut s = state.clone();
        let mut ws = Workspace::new(&s, &model).unwrap();
        run_step(step, &mut s, &model, &mut ws, &mut rng).unwrap();
        xs.push(get(&s));
    }
    let prior = state.hyper.prior;
    ks_against_grid(&mut xs, positive, |x| {
        let mut s = state.clone();
        set(&mut s, x);
        log_joint(&s, &series, &prior)
    })
}

/// The small panel used for the joint invariance check.
pub fn invariance_setup() -> InvarianceSetup {
    InvarianceSetup { k: 2, lags: 1, ranks: [2, 2, 1], subjects: 2, t: 4, prior: PriorConfig::default() }
}
