//! Granger-causality inference from posterior draws of the transition
//! matrices, the loss-minimizing decision rule, and evaluation metrics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cube::LagCube;
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};
use crate::var::GcTruth;

pub const DEFAULT_DELTA: f64 = 0.01;

/// Practical-zero window `δ` and false-positive weight `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub delta: f64,
    pub c: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA, c: 1.0 }
    }
}

impl DecisionConfig {
    pub fn new(delta: f64, c: f64) -> Result<Self> {
        let cfg = Self { delta, c };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }

    /// `t* = c/(c+1)`.
    pub fn t_star(&self) -> f64 {
        self.c / (self.c + 1.0)
    }
}

/// Per-lag inclusion probabilities and decisions plus the lag-wise OR.
#[derive(Clone, Debug, PartialEq)]
pub struct GcNetwork {
    pub inclusion: LagCube<f64>,
    pub decisions: LagCube<bool>,
    pub composite: DMatrix<bool>,
    pub t_star: f64,
}

impl GcNetwork {
    pub fn edge_count(&self) -> usize {
        self.decisions.iter().filter(|d| **d).count()
    }

    /// Lags with at least one included edge.
    pub fn active_lags(&self) -> Vec<bool> {
        (0..self.decisions.lags()).map(|l| self.decisions.lag_slice(l).iter().any(|d| *d)).collect()
    }
}

/// `v = 1 − P(|a| < δ/2 | data)` estimated from draws of `B = [A_1 … A_L]`.
pub fn inclusion_probabilities(draws: &[Matrix], delta: f64) -> Result<LagCube<f64>> {
    let first = draws.first().ok_or_else(|| Error::InvalidArgument("no posterior draws".into()))?;
    let k = first.nrows();
    if k == 0 || first.ncols() % k != 0 {
        return Err(Error::Dimension(format!("draws must be K x KL, got {:?}", first.shape())));
    }
    if draws.iter().any(|d| d.shape() != first.shape()) {
        return Err(Error::Dimension("draws have inconsistent shapes".into()));
    }
    let lags = first.ncols() / k;
    let half = delta / 2.0;
    let n = draws.len();
    Ok(LagCube::from_fn(lags, k, |l, r, c| {
        let excluded = draws.iter().filter(|d| d[(r, l * k + c)].abs() < half).count();
        (n - excluded) as f64 / n as f64
    }))
}

/// `d = I(v ≥ t*)` with `t* = c/(c+1)`.
pub fn decide_network(v: &LagCube<f64>, cfg: &DecisionConfig) -> Result<GcNetwork> {
    cfg.validate()?;
    if let Some(bad) = v.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("inclusion probability {bad} outside [0, 1]")));
    }
    let t_star = cfg.t_star();
    let decisions = v.map(|p| *p >= t_star);
    let k = v.k();
    let composite = DMatrix::from_fn(k, k, |r, c| (0..v.lags()).any(|l| *decisions.get(l, r, c)));
    Ok(GcNetwork { inclusion: v.clone(), decisions, composite, t_star })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectedLoss {
    pub false_positives: f64,
    pub false_negatives: f64,
    pub loss: f64,
}

/// Posterior expected false positives `Σ d(1−v)`, false negatives
/// `Σ (1−d)v`, and `c·FP̄ + FN̄`.
pub fn expected_loss(v: &[f64], d: &[bool], c: f64) -> Result<ExpectedLoss> {
    if v.len() != d.len() {
        return Err(Error::Dimension(format!("{} probabilities vs {} decisions", v.len(), d.len())));
    }
    let (fp, fn_) = v.iter().zip(d).fold((0.0, 0.0), |(fp, fn_), (p, d)| if *d { (fp + (1.0 - p), fn_) } else { (fp, fn_ + p) });
    Ok(ExpectedLoss { false_positives: fp, false_negatives: fn_, loss: c * fp + fn_ })
}

/// Rates in percent. `r2_in`/`r2_out` are `None` when not computable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tpr: f64,
    pub tnr: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub r2_in: Option<f64>,
    pub r2_out: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn confusion(est: &LagCube<bool>, truth: &GcTruth) -> Result<ConfusionCounts> {
    est.same_shape(&truth.edges)?;
    let mut c = ConfusionCounts::default();
    for (e, t) in est.iter().zip(truth.edges.iter()) {
        match (*e, *t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// TPR/TNR/FPR/FNR over every `(ℓ, j, k)` cell. A rate whose denominator
/// is empty is reported as NaN.
pub fn score_network(est: &LagCube<bool>, truth: &GcTruth) -> Result<MetricsReport> {
    let c = confusion(est, truth)?;
    let rate = |num: usize, den: usize| if den == 0 { f64::NAN } else { num as f64 / den as f64 };
    let tpr = rate(c.tp, c.tp + c.fn_);
    let tnr = rate(c.tn, c.tn + c.fp);
    Ok(MetricsReport { tpr: tpr * 100.0, tnr: tnr * 100.0, fpr: (1.0 - tnr) * 100.0, fnr: (1.0 - tpr) * 100.0, r2_in: None, r2_out: None })
}

/// `1 − Σ(y − ŷ)² / Σ(y − ȳ)²` pooled over all variables and times. `means`
/// defaults to the column means of `actual`. `None` when the total sum of
/// squares is zero.
pub fn r_squared(fitted: &Matrix, actual: &Matrix, means: Option<&Vector>) -> Result<Option<f64>> {
    if fitted.shape() != actual.shape() {
        return Err(Error::Dimension(format!("fitted {:?} vs actual {:?}", fitted.shape(), actual.shape())));
    }
    if actual.nrows() == 0 {
        return Ok(None);
    }
    let col_means;
    let means = match means {
        Some(m) => {
            if m.len() != actual.ncols() {
                return Err(Error::Dimension("means length differs from column count".into()));
            }
            m
        }
        None => {
            col_means = actual.row_mean().transpose();
            &col_means
        }
    };
    let mut sse = 0.0;
    let mut sst = 0.0;
    for c in 0..actual.ncols() {
        for r in 0..actual.nrows() {
            sse += (actual[(r, c)] - fitted[(r, c)]).powi(2);
            sst += (actual[(r, c)] - means[c]).powi(2);
        }
    }
    if sst == 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - sse / sst))
}

/// One-step-ahead predictions `ν + α + B(x_t − α̃)` for rows `start..end` of `y`.
pub fn one_step_predictions(y: &Matrix, b: &Matrix, nu: &Vector, alpha: &Vector, start: usize, end: usize) -> Result<Matrix> {
    let k = y.ncols();
    if b.nrows() != k || b.ncols() % k != 0 || nu.len() != k || alpha.len() != k {
        return Err(Error::Dimension("prediction parameters do not match the series".into()));
    }
    let lags = b.ncols() / k;
    if start < lags || end > y.nrows() || start > end {
        return Err(Error::InvalidArgument(format!("prediction rows {start}..{end} invalid for L = {lags}")));
    }
    let mut out = Matrix::zeros(end - start, k);
    for t in start..end {
        let mut m = nu + alpha;
        for l in 0..lags {
            let lagged = y.row(t - l - 1).transpose() - alpha;
            m.gemv(1.0, &b.columns(l * k, k), &lagged, 1.0);
        }
        out.row_mut(t - start).copy_from(&m.transpose());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub t_star: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// `0, 0.1, …, 1`.
pub fn default_roc_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

pub fn roc_sweep(v: &LagCube<f64>, truth: &GcTruth, grid: &[f64]) -> Result<Vec<RocPoint>> {
    v.same_shape(&truth.edges)?;
    grid.iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidArgument(format!("threshold {t} outside [0, 1]")));
            }
            let m = score_network(&v.map(|p| *p >= t), truth)?;
            Ok(RocPoint { t_star: t, fpr: m.fpr, tpr: m.tpr })
        })
        .collect()
}
