//! VAR(L) process mechanics: companion form, stability, stationary means,
//! simulation of single-subject and panel data, truth generators, and an
//! ordinary-least-squares baseline.

use nalgebra::linalg::Schur;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cube::LagCube;
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};

pub const DEFAULT_BURN_IN: usize = 200;
/// Target spectral radius used when a generated system has to be rescaled.
pub const RESCALE_TARGET: f64 = 0.9;
const RANDOM_EFFECT_RETRIES: usize = 200;

/// Transition matrices `B = [A_1 … A_L]` (`K × KL`), intercept `ν` and noise
/// variance `σ²_ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarParams {
    pub b: Matrix,
    pub nu: Vector,
    pub sigma2: f64,
}

impl VarParams {
    pub fn new(b: Matrix, nu: Vector, sigma2: f64) -> Result<Self> {
        let p = Self { b, nu, sigma2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.b.nrows();
        if k == 0 || self.b.ncols() == 0 || self.b.ncols() % k != 0 {
            return Err(Error::Dimension(format!("B must be K x KL, got {} x {}", self.b.nrows(), self.b.ncols())));
        }
        if self.nu.len() != k {
            return Err(Error::Dimension(format!("intercept has length {}, expected {k}", self.nu.len())));
        }
        // Zero noise is allowed for deterministic paths.
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("noise variance must be >= 0, got {}", self.sigma2)));
        }
        if self.b.iter().chain(self.nu.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite VAR coefficient".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.b.nrows()
    }

    pub fn lags(&self) -> usize {
        self.b.ncols() / self.b.nrows()
    }

    /// `A_ℓ` for zero-based `lag`.
    pub fn lag_matrix(&self, lag: usize) -> Matrix {
        let k = self.k();
        self.b.columns(lag * k, k).into_owned()
    }

    /// `Σ_ℓ A_ℓ`.
    pub fn lag_sum(&self) -> Matrix {
        let k = self.k();
        (0..self.lags()).fold(Matrix::zeros(k, k), |acc, l| acc + self.b.columns(l * k, k))
    }
}

/// Shared VAR parameters plus per-subject transition deviations and intercepts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelParams {
    pub shared: VarParams,
    pub b_random: Vec<Matrix>,
    pub alpha: Vec<Vector>,
}

impl PanelParams {
    pub fn validate(&self) -> Result<()> {
        self.shared.validate()?;
        if self.b_random.is_empty() || self.b_random.len() != self.alpha.len() {
            return Err(Error::Dimension(format!(
                "need N >= 1 matching random effects, got {} transitions and {} intercepts",
                self.b_random.len(),
                self.alpha.len()
            )));
        }
        let shape = self.shared.b.shape();
        for (i, (b, a)) in self.b_random.iter().zip(&self.alpha).enumerate() {
            if b.shape() != shape || a.len() != self.shared.k() {
                return Err(Error::Dimension(format!("subject {i} random effects do not match shared shape")));
            }
        }
        Ok(())
    }

    pub fn subjects(&self) -> usize {
        self.b_random.len()
    }

    /// `B_i = B_fixed + B_random_i` together with `ν` and `σ²_ε`.
    pub fn subject_params(&self, i: usize) -> VarParams {
        VarParams { b: &self.shared.b + &self.b_random[i], nu: self.shared.nu.clone(), sigma2: self.shared.sigma2 }
    }
}

/// `N` subjects, each a `T × K` series. The last `holdout` rows of every
/// subject are reserved for out-of-sample evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelData {
    pub subjects: Vec<Matrix>,
    pub holdout: usize,
    pub names: Vec<String>,
}

impl PanelData {
    pub fn new(subjects: Vec<Matrix>, holdout: usize) -> Result<Self> {
        let k = subjects.first().map(|s| s.ncols()).unwrap_or(0);
        let names = (1..=k).map(|i| format!("y{i}")).collect();
        Self::with_names(subjects, holdout, names)
    }

    pub fn with_names(subjects: Vec<Matrix>, holdout: usize, names: Vec<String>) -> Result<Self> {
        let d = Self { subjects, holdout, names };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.subjects.first().ok_or_else(|| Error::Dimension("panel has no subjects".into()))?;
        let (t, k) = first.shape();
        if k == 0 || t == 0 {
            return Err(Error::Dimension("empty series".into()));
        }
        for (i, s) in self.subjects.iter().enumerate() {
            if s.shape() != (t, k) {
                return Err(Error::Dimension(format!("subject {i} has shape {:?}, expected ({t}, {k})", s.shape())));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("subject {i} contains non-finite values")));
            }
        }
        if self.names.len() != k {
            return Err(Error::Dimension(format!("{} series names for {k} series", self.names.len())));
        }
        if self.holdout >= t {
            return Err(Error::InvalidArgument(format!("holdout {} leaves no training data (T = {t})", self.holdout)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.subjects.len()
    }

    pub fn t(&self) -> usize {
        self.subjects[0].nrows()
    }

    pub fn k(&self) -> usize {
        self.subjects[0].ncols()
    }

    /// Number of rows used for fitting.
    pub fn train_len(&self) -> usize {
        self.t() - self.holdout
    }

    pub fn train(&self, i: usize) -> Matrix {
        self.subjects[i].rows(0, self.train_len()).into_owned()
    }
}

/// Which `a_{ℓ,j,k}` are nonzero in a generating system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcTruth {
    pub edges: LagCube<bool>,
}

impl GcTruth {
    pub fn from_params(p: &VarParams) -> Self {
        let k = p.k();
        Self { edges: LagCube::from_fn(p.lags(), k, |l, r, c| p.b[(r, l * k + c)] != 0.0) }
    }

    /// Extends (with absent edges) or truncates to `lags` lags.
    pub fn padded(&self, lags: usize) -> Self {
        let k = self.edges.k();
        let have = self.edges.lags();
        Self { edges: LagCube::from_fn(lags, k, |l, r, c| l < have && *self.edges.get(l, r, c)) }
    }
}

/// Fixed-effects truth plus one truth per subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelTruth {
    pub fixed: GcTruth,
    pub subjects: Vec<GcTruth>,
}

/// `KL × KL` companion matrix.
pub fn companion_matrix(p: &VarParams) -> Matrix {
    let k = p.k();
    let kl = p.b.ncols();
    let mut a = Matrix::zeros(kl, kl);
    a.rows_mut(0, k).copy_from(&p.b);
    for i in k..kl {
        a[(i, i - k)] = 1.0;
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stability {
    pub stable: bool,
    pub spectral_radius: f64,
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    if m.nrows() == 1 {
        return Ok(m[(0, 0)].abs());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenSolver)?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn is_stable(p: &VarParams) -> Result<Stability> {
    let radius = spectral_radius(&companion_matrix(p))?;
    Ok(Stability { stable: radius < 1.0, spectral_radius: radius })
}

/// Limit mean of `y_t = ν + α + B(x_t − α̃) + ε_t`, i.e. `(I − Σ A_ℓ)⁻¹ ν + α`.
pub fn stationary_mean(p: &VarParams, alpha: &Vector) -> Result<Vector> {
    if alpha.len() != p.k() {
        return Err(Error::Dimension(format!("alpha has length {}, expected {}", alpha.len(), p.k())));
    }
    let s = is_stable(p)?;
    if !s.stable {
        return Err(Error::Unstable { radius: s.spectral_radius });
    }
    let m = Matrix::identity(p.k(), p.k()) - p.lag_sum();
    let mean = m.lu().solve(&p.nu).ok_or(Error::Unstable { radius: s.spectral_radius })?;
    Ok(mean + alpha)
}

/// Drives the recursion `y_t = ν + α + B(x_t − α̃) + ε_t` with the supplied
/// noise rows (already scaled). Lags before the first row are set to `ν + α`.
pub fn simulate_with_noise(p: &VarParams, alpha: &Vector, noise: &Matrix) -> Matrix {
    let k = p.k();
    let lags = p.lags();
    let steps = noise.nrows();
    let start = &p.nu + alpha;
    let mut y = Matrix::zeros(steps, k);
    let mut mean = Vector::zeros(k);
    for t in 0..steps {
        mean.copy_from(&p.nu);
        mean += alpha;
        for l in 0..lags {
            let a = p.b.columns(l * k, k);
            if t > l {
                let lagged = y.row(t - l - 1).transpose() - alpha;
                mean.gemv(1.0, &a, &lagged, 1.0);
            } else {
                let lagged = &start - alpha;
                mean.gemv(1.0, &a, &lagged, 1.0);
            }
        }
        for j in 0..k {
            y[(t, j)] = mean[j] + noise[(t, j)];
        }
    }
    y
}

/// Same recursion run through the VAR(1) companion form and projected back
/// with `J = [I_K : 0 : … : 0]`.
pub fn simulate_companion_with_noise(p: &VarParams, alpha: &Vector, noise: &Matrix) -> Matrix {
    let k = p.k();
    let kl = p.b.ncols();
    let a = companion_matrix(p);
    let mu = Vector::from_fn(kl, |i, _| alpha[i % k]);
    let mut v = Vector::zeros(kl);
    v.rows_mut(0, k).copy_from(&p.nu);
    let start = &p.nu + alpha;
    let mut state = Vector::from_fn(kl, |i, _| start[i % k]);
    let mut y = Matrix::zeros(noise.nrows(), k);
    for t in 0..noise.nrows() {
        let mut next = &v + &mu + &a * (&state - &mu);
        for j in 0..k {
            next[j] += noise[(t, j)];
            y[(t, j)] = next[j];
        }
        state = next;
    }
    y
}

fn noise_matrix(rows: usize, k: usize, sigma2: f64, rng: &mut impl Rng) -> Matrix {
    let sd = sigma2.sqrt();
    let mut m = Matrix::zeros(rows, k);
    for t in 0..rows {
        for j in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            m[(t, j)] = sd * z;
        }
    }
    m
}

fn simulate_stream(p: &VarParams, alpha: &Vector, length: usize, burn_in: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let noise = noise_matrix(length + burn_in, p.k(), p.sigma2, rng);
    let full = simulate_with_noise(p, alpha, &noise);
    full.rows(burn_in, length).into_owned()
}

/// Simulates `length` observations after discarding `burn_in` steps.
/// Deterministic in `seed`.
pub fn simulate(p: &VarParams, alpha: &Vector, length: usize, burn_in: usize, seed: u64) -> Result<Matrix> {
    p.validate()?;
    if alpha.len() != p.k() {
        return Err(Error::Dimension(format!("alpha has length {}, expected {}", alpha.len(), p.k())));
    }
    let s = is_stable(p)?;
    if !s.stable {
        return Err(Error::Unstable { radius: s.spectral_radius });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(simulate_stream(p, alpha, length, burn_in, &mut rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelSimConfig {
    pub subjects: usize,
    /// Observations per subject, including the holdout tail.
    pub length: usize,
    pub holdout: usize,
    pub burn_in: usize,
    /// Standard deviation of `B_random_i` entries, relative to the RMS of `B_fixed`.
    pub random_scale: f64,
    /// Standard deviation of the entries of `α_i`.
    pub alpha_scale: f64,
}

impl Default for PanelSimConfig {
    fn default() -> Self {
        Self { subjects: 1, length: 150, holdout: 0, burn_in: DEFAULT_BURN_IN, random_scale: 0.0, alpha_scale: 0.0 }
    }
}

/// Simulates a panel around shared dynamics. Subject `i` draws its noise from
/// stream `i` of the seed, so a one-subject panel reproduces [`simulate`].
/// With more than one subject every `B_i` is checked for stability and its
/// random effect redrawn until stable.
pub fn simulate_panel(shared: &VarParams, cfg: &PanelSimConfig, seed: u64) -> Result<(PanelData, PanelParams, PanelTruth)> {
    shared.validate()?;
    if cfg.subjects == 0 {
        return Err(Error::InvalidArgument("panel needs at least one subject".into()));
    }
    if !(cfg.random_scale >= 0.0) || !(cfg.alpha_scale >= 0.0) {
        return Err(Error::InvalidArgument("random effect scales must be >= 0".into()));
    }
    let s = is_stable(shared)?;
    if !s.stable {
        return Err(Error::Unstable { radius: s.spectral_radius });
    }
    let k = shared.k();
    let rms = (shared.b.iter().map(|v| v * v).sum::<f64>() / shared.b.len() as f64).sqrt();
    let mut effects_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_e11ec7);
    let single = cfg.subjects == 1;

    let mut b_random = Vec::with_capacity(cfg.subjects);
    let mut alpha = Vec::with_capacity(cfg.subjects);
    for i in 0..cfg.subjects {
        let sd = if single { 0.0 } else { cfg.random_scale * rms };
        let mut attempt = 0;
        let br = loop {
            let candidate = Matrix::from_fn(k, shared.b.ncols(), |_, _| sd * effects_rng.sample::<f64, _>(StandardNormal));
            let subject = VarParams { b: &shared.b + &candidate, ..shared.clone() };
            if is_stable(&subject)?.stable {
                break candidate;
            }
            attempt += 1;
            if attempt >= RANDOM_EFFECT_RETRIES {
                return Err(Error::RetryExhausted {
                    attempts: attempt,
                    what: format!("stable random transitions for subject {i} (random_scale {})", cfg.random_scale),
                });
            }
        };
        b_random.push(br);
        let asd = if single { 0.0 } else { cfg.alpha_scale };
        alpha.push(Vector::from_fn(k, |_, _| asd * effects_rng.sample::<f64, _>(StandardNormal)));
    }
    let params = PanelParams { shared: shared.clone(), b_random, alpha };

    let mut series = Vec::with_capacity(cfg.subjects);
    for i in 0..cfg.subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        series.push(simulate_stream(&params.subject_params(i), &params.alpha[i], cfg.length, cfg.burn_in, &mut rng));
    }
    let truth = PanelTruth {
        fixed: GcTruth::from_params(shared),
        subjects: (0..cfg.subjects).map(|i| GcTruth::from_params(&params.subject_params(i))).collect(),
    };
    Ok((PanelData::new(series, cfg.holdout)?, params, truth))
}

/// Applies `B ← B·(c/ρ)` with `c = RESCALE_TARGET` while the companion spectral
/// radius `ρ` is at or above one. With more than one lag the radius is not
/// homogeneous in the scale of `B`, so the step repeats until it lands below one.
/// Returns the final radius.
pub fn enforce_stability(b: &mut Matrix) -> Result<f64> {
    let k = b.nrows();
    let radius_of = |b: &Matrix| {
        let p = VarParams { b: b.clone(), nu: Vector::zeros(k), sigma2: 0.0 };
        spectral_radius(&companion_matrix(&p))
    };
    let mut radius = radius_of(b)?;
    while radius >= 1.0 {
        *b *= RESCALE_TARGET / radius;
        radius = radius_of(b)?;
    }
    Ok(radius)
}

fn signed_magnitude(rng: &mut impl Rng) -> f64 {
    let m = rng.random_range(0.5..1.0);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

const BLOCK_TARGET_RADIUS: f64 = 0.97;
const BLOCK_LAG_WEIGHTS: [f64; 4] = [1.0, -0.5, 0.3, 0.2];

fn block_lag_weight(l: usize) -> f64 {
    match BLOCK_LAG_WEIGHTS.get(l) {
        Some(w) => *w,
        None => 0.2 * 0.5f64.powi((l + 1 - BLOCK_LAG_WEIGHTS.len()) as i32),
    }
}

/// Scales `b` so the companion spectral radius equals `target` (bisection on
/// the scale factor). `target` must lie in `(0, 1)`.
pub fn scale_to_radius(b: &mut Matrix, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!("target radius must be in (0, 1), got {target}")));
    }
    let k = b.nrows();
    let radius_at = |s: f64| {
        let p = VarParams { b: &*b * s, nu: Vector::zeros(k), sigma2: 0.0 };
        spectral_radius(&companion_matrix(&p))
    };
    if radius_at(1.0)? == 0.0 {
        return Err(Error::InvalidArgument("cannot rescale a nilpotent coefficient matrix".into()));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while radius_at(hi)? < target {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if radius_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    *b *= lo;
    enforce_stability(b)
}

/// Block-diagonal truth: every `A_ℓ` has a zero lower-right `K/2 × K/2`
/// quadrant. The upper-left quadrant carries a strong diagonal (0.9) and weak
/// cross links (±0.3·U(0.5,1)), the upper-right quadrant ±0.3·U(0.5,1), the
/// lower-left quadrant ±U(0.5,1). Lag `ℓ` is weighted by 1, -0.5, 0.3, 0.2
/// (halving afterwards), then the whole system is scaled to companion radius
/// 0.97. Intercepts are standard normal and `σ²_ε = 1`.
pub fn make_block_diagonal_truth(k: usize, l_true: usize, seed: u64) -> Result<(VarParams, GcTruth)> {
    if k == 0 || k % 2 != 0 {
        return Err(Error::InvalidArgument(format!("block-diagonal truth needs an even K, got {k}")));
    }
    if l_true == 0 {
        return Err(Error::InvalidArgument("L_true must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = k / 2;
    let mut b = Matrix::zeros(k, k * l_true);
    for l in 0..l_true {
        let w = block_lag_weight(l);
        for c in 0..k {
            for r in 0..k {
                if r >= h && c >= h {
                    continue;
                }
                let m = signed_magnitude(&mut rng);
                let v = if r == c {
                    0.9
                } else if r < h {
                    0.3 * m
                } else {
                    m
                };
                b[(r, l * k + c)] = w * v;
            }
        }
    }
    scale_to_radius(&mut b, BLOCK_TARGET_RADIUS)?;
    let nu = Vector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let p = VarParams::new(b, nu, 1.0)?;
    let truth = GcTruth::from_params(&p);
    Ok((p, truth))
}

const NETWORK_TARGET_RADIUS: f64 = 0.95;
const NETWORK_P_ACTIVE: f64 = 0.6;
const NETWORK_P_ACROSS: f64 = 0.2;

/// Sparse community-structured truth shaped like a connectivity network
/// recovered by a low-rank fit. Each node belongs to one of `communities`
/// contiguous groups and is, independently, an active receiver and an active
/// sender with probability 0.6 (loading ±U(0.5,1) on its own community).
/// Communities drive themselves and, with probability 0.2, one another
/// (weight ±0.5·U(0.5,1)). So `A_ℓ = w_ℓ β_recv M β_sendᵀ` with the lag
/// weights of [`make_block_diagonal_truth`], scaled to companion radius 0.95.
pub fn make_network_truth(k: usize, l_true: usize, communities: usize, seed: u64) -> Result<(VarParams, GcTruth)> {
    if k == 0 || l_true == 0 || communities == 0 || communities > k {
        return Err(Error::InvalidArgument(format!("invalid network truth parameters K={k}, L_true={l_true}, communities={communities}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let community = |i: usize| i * communities / k;
    let mut recv = Matrix::zeros(k, communities);
    let mut send = Matrix::zeros(k, communities);
    for i in 0..k {
        if rng.random_bool(NETWORK_P_ACTIVE) {
            recv[(i, community(i))] = signed_magnitude(&mut rng);
        }
        if rng.random_bool(NETWORK_P_ACTIVE) {
            send[(i, community(i))] = signed_magnitude(&mut rng);
        }
    }
    let mut m = Matrix::zeros(communities, communities);
    for c in 0..communities {
        for r in 0..communities {
            if r == c {
                m[(r, c)] = 1.0;
            } else if rng.random_bool(NETWORK_P_ACROSS) {
                m[(r, c)] = 0.5 * signed_magnitude(&mut rng);
            }
        }
    }
    let block = &recv * &m * send.transpose();
    let mut b = Matrix::zeros(k, k * l_true);
    for l in 0..l_true {
        b.columns_mut(l * k, k).copy_from(&(&block * block_lag_weight(l)));
    }
    if b.iter().all(|x| *x == 0.0) {
        return Err(Error::InvalidArgument("network truth has no active edges; try another seed".into()));
    }
    scale_to_radius(&mut b, NETWORK_TARGET_RADIUS)?;
    let nu = Vector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let p = VarParams::new(b, nu, 1.0)?;
    let truth = GcTruth::from_params(&p);
    Ok((p, truth))
}

/// Outcome of the least-squares baseline.
#[derive(Clone, Debug, PartialEq)]
pub enum OlsFit {
    Estimate(VarParams),
    /// The design Gram matrix is singular (or there are fewer rows than regressors).
    NotComputable,
}

impl OlsFit {
    pub fn estimate(&self) -> Option<&VarParams> {
        match self {
            OlsFit::Estimate(p) => Some(p),
            OlsFit::NotComputable => None,
        }
    }
}

/// Stacks `(1, y_{t-1}, …, y_{t-L})` for `t = L..T`.
pub fn lagged_design(y: &Matrix, lags: usize) -> Matrix {
    let (t, k) = y.shape();
    let n = t.saturating_sub(lags);
    Matrix::from_fn(n, 1 + k * lags, |row, col| {
        if col == 0 {
            1.0
        } else {
            let l = (col - 1) / k;
            let j = (col - 1) % k;
            y[(row + lags - l - 1, j)]
        }
    })
}

/// Equation-by-equation least squares of `y_t` on an intercept and `x_t`.
pub fn fit_ols(y: &Matrix, lags: usize) -> Result<OlsFit> {
    let (t, k) = y.shape();
    if lags == 0 {
        return Err(Error::InvalidArgument("need at least one lag".into()));
    }
    if t <= lags {
        return Err(Error::InvalidArgument(format!("T = {t} must exceed L = {lags}")));
    }
    let x = lagged_design(y, lags);
    let n = x.nrows();
    let p = x.ncols();
    if n < p {
        return Ok(OlsFit::NotComputable);
    }
    let target = y.rows(lags, n).into_owned();
    let gram = x.transpose() * &x;
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= max * 1e-12 {
        return Ok(OlsFit::NotComputable);
    }
    let Some(chol) = gram.cholesky() else {
        return Ok(OlsFit::NotComputable);
    };
    let coef = chol.solve(&(x.transpose() * &target)); // p × K
    let resid = &target - &x * &coef;
    let dof = (n - p).max(1) as f64;
    let sigma2 = resid.iter().map(|v| v * v).sum::<f64>() / (dof * k as f64);
    let nu = coef.row(0).transpose();
    let b = coef.rows(1, p - 1).transpose();
    Ok(OlsFit::Estimate(VarParams::new(b, nu, sigma2)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ar(coefs: &[f64], nu: f64, sigma2: f64) -> VarParams {
        VarParams::new(Matrix::from_row_slice(1, coefs.len(), coefs), Vector::from_element(1, nu), sigma2).unwrap()
    }

    #[test]
    fn companion_examples() {
        assert_eq!(companion_matrix(&ar(&[0.5], 0.0, 1.0)), Matrix::from_element(1, 1, 0.5));
        let c = companion_matrix(&ar(&[0.5, 0.4], 0.0, 1.0));
        assert_eq!(c, Matrix::from_row_slice(2, 2, &[0.5, 0.4, 1.0, 0.0]));
        let a = Matrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let p = VarParams::new(a.clone(), Vector::zeros(2), 1.0).unwrap();
        assert_eq!(companion_matrix(&p), a);
    }

    #[test]
    fn stability_examples() {
        let s = is_stable(&ar(&[0.5], 0.0, 1.0)).unwrap();
        assert!(s.stable);
        assert!((s.spectral_radius - 0.5).abs() < 1e-15);
        let s = is_stable(&ar(&[1.0], 0.0, 1.0)).unwrap();
        assert!(!s.stable);
        assert_eq!(s.spectral_radius, 1.0);
        // z^2 - 0.5 z - 0.4 = 0
        let disc = (0.25f64 + 1.6).sqrt();
        let roots = [((0.5 + disc) / 2.0).abs(), ((0.5 - disc) / 2.0).abs()];
        let s = is_stable(&ar(&[0.5, 0.4], 0.0, 1.0)).unwrap();
        assert!(s.stable);
        assert!((s.spectral_radius - roots[0].max(roots[1])).abs() < 1e-12);
        assert!((roots[0] - 0.93).abs() < 0.01 && (roots[1] - 0.43).abs() < 0.01);
    }

    #[test]
    fn stationary_mean_examples() {
        let p = VarParams::new(Matrix::zeros(2, 2), Vector::from_vec(vec![1.0, -2.0]), 1.0).unwrap();
        let alpha = Vector::from_vec(vec![0.5, 0.5]);
        assert_eq!(stationary_mean(&p, &alpha).unwrap(), Vector::from_vec(vec![1.5, -1.5]));
        let p = ar(&[0.5], 1.0, 1.0);
        assert!((stationary_mean(&p, &Vector::zeros(1)).unwrap()[0] - 2.0).abs() < 1e-14);
        assert!((stationary_mean(&p, &Vector::from_element(1, 3.0)).unwrap()[0] - 5.0).abs() < 1e-14);
        assert!(matches!(stationary_mean(&ar(&[1.2], 1.0, 1.0), &Vector::zeros(1)), Err(Error::Unstable { .. })));
    }

    #[test]
    fn simulate_noiseless_cases() {
        let p = VarParams::new(Matrix::zeros(2, 2), Vector::from_vec(vec![1.0, 2.0]), 0.0).unwrap();
        let y = simulate(&p, &Vector::zeros(2), 10, 0, 1).unwrap();
        assert!(y.row_iter().all(|r| r[0] == 1.0 && r[1] == 2.0));
        let y = simulate(&ar(&[0.5], 1.0, 0.0), &Vector::zeros(1), 5, DEFAULT_BURN_IN, 1).unwrap();
        assert!(y.iter().all(|v| (v - 2.0).abs() < 1e-12));
        // Without burn-in the fixed-point iteration is visible: 1, 1.5, 1.75, …
        let y = simulate(&ar(&[0.5], 1.0, 0.0), &Vector::zeros(1), 3, 0, 1).unwrap();
        assert_eq!(y.as_slice(), &[1.5, 1.75, 1.875]);
    }

    #[test]
    fn simulate_is_deterministic_and_rejects_unstable() {
        let p = ar(&[0.5, 0.2], 0.3, 1.0);
        let a = simulate(&p, &Vector::zeros(1), 50, 10, 42).unwrap();
        let b = simulate(&p, &Vector::zeros(1), 50, 10, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate(&p, &Vector::zeros(1), 50, 10, 43).unwrap());
        assert!(simulate(&ar(&[1.1], 0.0, 1.0), &Vector::zeros(1), 5, 0, 1).is_err());
    }

    #[test]
    fn direct_and_companion_recursions_agree() {
        let (p, _) = make_block_diagonal_truth(4, 3, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = noise_matrix(60, 4, 1.0, &mut rng);
        let alpha = Vector::from_vec(vec![0.3, -0.2, 1.0, 0.0]);
        let a = simulate_with_noise(&p, &alpha, &noise);
        let b = simulate_companion_with_noise(&p, &alpha, &noise);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn block_diagonal_truth_structure() {
        for seed in 0..5 {
            let (p, truth) = make_block_diagonal_truth(10, 4, seed).unwrap();
            let s = is_stable(&p).unwrap();
            assert!(s.stable);
            assert!((s.spectral_radius - 0.97).abs() < 1e-9);
            for l in 0..4 {
                let a = p.lag_matrix(l);
                for r in 5..10 {
                    for c in 5..10 {
                        assert_eq!(a[(r, c)], 0.0);
                        assert!(!truth.edges.get(l, r, c));
                    }
                }
                assert!(truth.edges.get(l, 0, 9));
                assert!(truth.edges.get(l, 9, 0));
            }
            assert_eq!(truth.edges.iter().filter(|e| **e).count(), 4 * 75);
        }
        assert!(make_block_diagonal_truth(9, 2, 0).is_err());
    }

    #[test]
    fn scale_to_radius_hits_target() {
        let mut b = Matrix::from_row_slice(2, 4, &[3.0, 1.0, 0.5, 0.0, -1.0, 2.0, 0.0, 0.7]);
        let r = scale_to_radius(&mut b, 0.8).unwrap();
        assert!((r - 0.8).abs() < 1e-9);
        let mut small = Matrix::from_element(1, 1, 0.01);
        assert!((scale_to_radius(&mut small, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!(scale_to_radius(&mut Matrix::zeros(2, 2), 0.5).is_err());
        assert!(scale_to_radius(&mut small, 1.0).is_err());
    }

    #[test]
    fn panel_degenerate_cases() {
        let (p, truth) = make_block_diagonal_truth(4, 2, 1).unwrap();
        let cfg = PanelSimConfig { subjects: 3, length: 40, ..Default::default() };
        let (data, params, pt) = simulate_panel(&p, &cfg, 7).unwrap();
        assert_eq!(data.n(), 3);
        assert!(params.b_random.iter().all(|b| b.iter().all(|v| *v == 0.0)));
        assert!(pt.subjects.iter().all(|s| *s == truth));
        assert_ne!(data.subjects[0], data.subjects[1]);

        let cfg = PanelSimConfig { subjects: 1, length: 40, burn_in: 25, random_scale: 0.5, alpha_scale: 1.0, ..Default::default() };
        let (data, _, _) = simulate_panel(&p, &cfg, 11).unwrap();
        assert_eq!(data.subjects[0], simulate(&p, &Vector::zeros(4), 40, 25, 11).unwrap());
    }

    #[test]
    fn panel_random_effects_are_stable() {
        let (p, _) = make_block_diagonal_truth(6, 2, 3).unwrap();
        let cfg = PanelSimConfig { subjects: 4, length: 30, random_scale: 0.2, alpha_scale: 0.5, ..Default::default() };
        let (_, params, truth) = simulate_panel(&p, &cfg, 3).unwrap();
        for i in 0..4 {
            assert!(is_stable(&params.subject_params(i)).unwrap().stable);
            assert!(params.b_random[i].iter().any(|v| *v != 0.0));
        }
        assert_eq!(truth.subjects.len(), 4);
        let cfg = PanelSimConfig { subjects: 4, length: 30, random_scale: 50.0, ..Default::default() };
        assert!(matches!(simulate_panel(&p, &cfg, 3), Err(Error::RetryExhausted { .. })));
    }

    fn excited_noiseless_path(p: &VarParams, kick: usize, len: usize, seed: u64) -> Matrix {
        let k = p.k();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = Matrix::zeros(kick + len, k);
        for t in 0..kick {
            for j in 0..k {
                noise[(t, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        simulate_with_noise(p, &Vector::zeros(k), &noise).rows(kick, len).into_owned()
    }

    #[test]
    fn ols_recovers_noiseless_system() {
        // Slowly decaying rotation: eigenvalues 0.95 e^{±0.4i}.
        let (c, s) = (0.95 * 0.4f64.cos(), 0.95 * 0.4f64.sin());
        let p = VarParams::new(Matrix::from_row_slice(2, 2, &[c, -s, s, c]), Vector::from_vec(vec![0.5, -1.0]), 0.0).unwrap();
        let y = excited_noiseless_path(&p, 5, 60, 1);
        let est = fit_ols(&y, 1).unwrap().estimate().cloned().expect("computable");
        assert!((&est.b - &p.b).abs().max() < 1e-6);
        assert!((&est.nu - &p.nu).abs().max() < 1e-6);

        // AR(2) with roots 0.9 and -0.8.
        let p = ar(&[0.1, 0.72], 0.3, 0.0);
        let y = excited_noiseless_path(&p, 5, 60, 2);
        let est = fit_ols(&y, 2).unwrap().estimate().cloned().expect("computable");
        assert!((&est.b - &p.b).abs().max() < 1e-6);
        assert!(est.sigma2 < 1e-12);
    }

    #[test]
    fn ols_not_computable_cases() {
        let y = Matrix::from_element(30, 2, 3.0);
        assert_eq!(fit_ols(&y, 1).unwrap(), OlsFit::NotComputable);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = Matrix::from_fn(150, 50, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert_eq!(fit_ols(&y, 6).unwrap(), OlsFit::NotComputable);
        assert!(fit_ols(&y, 150).is_err());
    }

    #[test]
    fn network_truth_is_sparse_and_stable() {
        let (p, truth) = make_network_truth(50, 2, 5, 1).unwrap();
        let s = is_stable(&p).unwrap();
        assert!(s.stable && (s.spectral_radius - 0.95).abs() < 1e-9);
        let density = truth.edges.iter().filter(|e| **e).count() as f64 / (2.0 * 2500.0);
        assert!(density > 0.05 && density < 0.4, "density {density}");
        // every lag shares the same support
        for r in 0..50 {
            for c in 0..50 {
                assert_eq!(truth.edges.get(0, r, c), truth.edges.get(1, r, c));
            }
        }
        assert!(make_network_truth(10, 1, 11, 0).is_err());
    }
}
