use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};
use crate::var::PanelData;

use super::PanelState;

/// Regression form of one subject: rows `t = L, …, T−1` of the training
/// series as targets and the stacked lags `x_t = (y_{t−1}; …; y_{t−L})`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectDesign {
    pub y: Matrix,
    pub x: Matrix,
    pub x_sum: Vector,
    pub xtx: Matrix,
}

impl SubjectDesign {
    pub fn new(series: &Matrix, lags: usize) -> Result<Self> {
        let (t, k) = series.shape();
        if t < lags {
            return Err(Error::Dimension(format!("series of length {t} is shorter than L = {lags}")));
        }
        let n = t - lags;
        let y = series.rows(lags, n).into_owned();
        let x = Matrix::from_fn(n, k * lags, |row, c| series[(row + lags - c / k - 1, c % k)]);
        let x_sum = x.row_sum().transpose();
        let xtx = x.tr_mul(&x);
        Ok(Self { y, x, x_sum, xtx })
    }

    pub fn rows(&self) -> usize {
        self.y.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelData {
    pub k: usize,
    pub lags: usize,
    pub subjects: Vec<SubjectDesign>,
}

impl ModelData {
    /// Uses the training rows of every subject.
    pub fn new(data: &PanelData, lags: usize) -> Result<Self> {
        data.validate()?;
        let series: Vec<Matrix> = (0..data.n()).map(|i| data.train(i)).collect();
        Self::from_series(&series, lags)
    }

    pub fn from_series(series: &[Matrix], lags: usize) -> Result<Self> {
        let k = series.first().map(|s| s.ncols()).ok_or_else(|| Error::Dimension("no subjects".into()))?;
        if lags == 0 {
            return Err(Error::InvalidArgument("lag order must be positive".into()));
        }
        if series.iter().any(|s| s.ncols() != k) {
            return Err(Error::Dimension("subjects have different numbers of series".into()));
        }
        let subjects = series.iter().map(|s| SubjectDesign::new(s, lags)).collect::<Result<_>>()?;
        Ok(Self { k, lags, subjects })
    }

    pub fn n(&self) -> usize {
        self.subjects.len()
    }

    pub fn total_rows(&self) -> usize {
        self.subjects.iter().map(|s| s.rows()).sum()
    }

    pub fn check_state(&self, state: &PanelState) -> Result<()> {
        if state.k() != self.k || state.lags() != self.lags {
            return Err(Error::Dimension(format!(
                "state has K={}, L={} but data has K={}, L={}",
                state.k(),
                state.lags(),
                self.k,
                self.lags
            )));
        }
        let ok = if state.is_panel() { state.subjects() == self.n() } else { state.subjects() == 1 };
        if !ok {
            return Err(Error::Dimension(format!("state has {} subjects, data {}", state.subjects(), self.n())));
        }
        Ok(())
    }
}

/// `K × L` matrix whose column `ℓ` is `y_{t−ℓ−1} − α` (zero-based `ℓ`).
pub fn lag_window(series: &Matrix, t: usize, lags: usize, alpha: &Vector) -> Result<Matrix> {
    if t < lags || t > series.nrows() || alpha.len() != series.ncols() {
        return Err(Error::Index(format!("no complete lag window at t = {t} for L = {lags}")));
    }
    Ok(Matrix::from_fn(series.ncols(), lags, |j, l| series[(t - l - 1, j)] - alpha[j]))
}

/// Coefficient matrix `H` with `μ_t = (terms without β_{j,·,r}) + H β_{j,·,r}`
/// for subject `subject`, where `window` is the centred lag matrix from
/// [`lag_window`] and `j` is zero-based.
pub fn build_h_matrix(state: &PanelState, window: &Matrix, j: usize, r: usize, subject: usize) -> Result<Matrix> {
    let [r1, r2, r3] = state.ranks();
    let k = state.k();
    if j > 2 || r >= state.ranks().get(j).copied().unwrap_or(0) {
        return Err(Error::Index(format!("column {r} of factor {j} out of range for ranks {:?}", state.ranks())));
    }
    if subject >= state.subjects() {
        return Err(Error::Index(format!("subject {subject} out of range")));
    }
    if window.shape() != (k, state.lags()) {
        return Err(Error::Dimension(format!("window must be {k} x {}, got {:?}", state.lags(), window.shape())));
    }
    let b1 = state.subject_loading(subject);
    let g = &state.core;
    Ok(match j {
        0 => {
            let inner = state.beta2.tr_mul(window) * &state.beta3;
            let mut c = 0.0;
            for q in 0..r3 {
                for p in 0..r2 {
                    c += g.at(r, p, q) * inner[(p, q)];
                }
            }
            Matrix::identity(k, k) * c
        }
        1 => {
            let slice = Matrix::from_fn(r1, r3, |a, q| g.at(a, r, q));
            b1 * slice * state.beta3.transpose() * window.transpose()
        }
        _ => {
            let slice = Matrix::from_fn(r1, r2, |a, p| g.at(a, p, r));
            b1 * slice * state.beta2.transpose() * window
        }
    })
}

/// Centred designs, residuals and centred cross products kept in sync with
/// a [`PanelState`] during a sweep.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    pub w: Vec<Matrix>,
    pub resid: Vec<Matrix>,
    pub sww: Vec<Matrix>,
}

impl Workspace {
    pub fn new(state: &PanelState, data: &ModelData) -> Result<Self> {
        data.check_state(state)?;
        let mut ws = Self::default();
        ws.refresh(state, data);
        Ok(ws)
    }

    /// Recomputes everything from scratch.
    pub fn refresh(&mut self, state: &PanelState, data: &ModelData) {
        let (_, bs) = state.all_b();
        self.w.clear();
        self.resid.clear();
        self.sww.clear();
        for (i, d) in data.subjects.iter().enumerate() {
            let alpha = subject_alpha(state, i);
            let (w, sww) = centred(d, alpha, data.lags);
            let b = if state.is_panel() { &bs[i] } else { &bs[0] };
            let mut resid = &d.y - &w * b.transpose();
            let shift = &state.nu + alpha;
            for mut row in resid.row_iter_mut() {
                row -= shift.transpose();
            }
            self.w.push(w);
            self.resid.push(resid);
            self.sww.push(sww);
        }
    }

    /// Recomputes the centred design of one subject after `α_i` moved.
    pub fn recentre(&mut self, state: &PanelState, data: &ModelData, i: usize) {
        let (w, sww) = centred(&data.subjects[i], subject_alpha(state, i), data.lags);
        self.w[i] = w;
        self.sww[i] = sww;
    }

    pub fn sse(&self) -> f64 {
        self.resid.iter().map(|r| r.norm_squared()).sum()
    }
}

pub(crate) fn subject_alpha(state: &PanelState, i: usize) -> &Vector {
    if state.is_panel() {
        &state.alpha[i]
    } else {
        &state.alpha[0]
    }
}

fn centred(d: &SubjectDesign, alpha: &Vector, lags: usize) -> (Matrix, Matrix) {
    let k = alpha.len();
    let stacked = Vector::from_fn(k * lags, |c, _| alpha[c % k]);
    let mut w = d.x.clone();
    for mut row in w.row_iter_mut() {
        row -= stacked.transpose();
    }
    let n = d.rows() as f64;
    let cross = &d.x_sum * stacked.transpose();
    let sww = &d.xtx - &cross - cross.transpose() + &stacked * stacked.transpose() * n;
    (w, sww)
}

/// `ν + α_i + B_i(x_t − α̃_i)` for every regression row of subject `i`.
pub fn likelihood_mean(state: &PanelState, data: &ModelData, i: usize) -> Result<Matrix> {
    data.check_state(state)?;
    let d = data.subjects.get(i).ok_or_else(|| Error::Index(format!("subject {i} out of range")))?;
    let alpha = subject_alpha(state, i);
    let (w, _) = centred(d, alpha, data.lags);
    let b = if state.is_panel() { state.subject_b(i) } else { state.fixed_b() };
    let mut mean = w * b.transpose();
    let shift = &state.nu + alpha;
    for mut row in mean.row_iter_mut() {
        row += shift.transpose();
    }
    Ok(mean)
}
