//! Dense three-way tensors and the Tucker algebra used by the coefficient model.
//!
//! Entries are stored with the first index varying fastest, and every
//! matricization lays out its columns with the lower-numbered remaining mode
//! varying fastest. Under this convention the mode-1 unfolding of a Tucker
//! product satisfies `B_(1) = β1 · G_(1) · (β3 ⊗ β2)ᵀ`.
//!
//! All indices in this module are zero-based; modes are numbered 1..=3.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: [usize; 3],
    values: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!("tensor dims must be positive, got {dims:?}")));
        }
        Ok(Self { dims, values: vec![0.0; dims[0] * dims[1] * dims[2]] })
    }

    pub fn from_vec(dims: [usize; 3], values: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!("tensor dims must be positive, got {dims:?}")));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Dimension(format!(
                "expected {} values for dims {dims:?}, got {}",
                dims[0] * dims[1] * dims[2],
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let idx = t.offset(i, j, k);
                    t.values[idx] = f(i, j, k);
                }
            }
        }
        Ok(t)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    fn check(&self, i: usize, j: usize, k: usize) -> Result<()> {
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return Err(Error::Index(format!("({i},{j},{k}) outside dims {:?}", self.dims)));
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        self.check(i, j, k)?;
        Ok(self.values[self.offset(i, j, k)])
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) -> Result<()> {
        self.check(i, j, k)?;
        let idx = self.offset(i, j, k);
        self.values[idx] = v;
        Ok(())
    }

    /// Unchecked accessor for hot loops; panics on out-of-range indices.
    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        self.values[self.offset(i, j, k)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize, k: usize) -> &mut f64 {
        let idx = self.offset(i, j, k);
        &mut self.values[idx]
    }

    /// Frontal slice `k` as an `I1 × I2` matrix.
    pub fn frontal_slice(&self, k: usize) -> Result<Matrix> {
        if k >= self.dims[2] {
            return Err(Error::Index(format!("slice {k} outside {} slices", self.dims[2])));
        }
        let n = self.dims[0] * self.dims[1];
        Ok(Matrix::from_column_slice(self.dims[0], self.dims[1], &self.values[k * n..(k + 1) * n]))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Keeps only the listed indices along `mode` (1..=3), in the given order.
    pub fn select(&self, mode: usize, keep: &[usize]) -> Result<Self> {
        check_mode(mode)?;
        let m = mode - 1;
        if keep.iter().any(|&i| i >= self.dims[m]) {
            return Err(Error::Index(format!("selection {keep:?} outside mode {mode} size {}", self.dims[m])));
        }
        let mut dims = self.dims;
        dims[m] = keep.len();
        Self::from_fn(dims, |i, j, k| {
            let mut idx = [i, j, k];
            idx[m] = keep[idx[m]];
            self.at(idx[0], idx[1], idx[2])
        })
    }
}

fn check_mode(n: usize) -> Result<()> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidArgument(format!("mode index must be 1, 2 or 3, got {n}")));
    }
    Ok(())
}

/// Column of the mode-`n` unfolding holding entry `(i, j, k)`.
#[inline]
fn unfold_position(dims: [usize; 3], n: usize, i: usize, j: usize, k: usize) -> (usize, usize) {
    match n {
        1 => (i, j + dims[1] * k),
        2 => (j, i + dims[0] * k),
        _ => (k, i + dims[0] * j),
    }
}

/// Mode-`n` unfolding: an `I_n × (product of the other dims)` matrix whose
/// columns are the mode-`n` fibers.
pub fn mode_n_matricize(t: &Tensor3, n: usize) -> Result<Matrix> {
    check_mode(n)?;
    let d = t.dims;
    let rows = d[n - 1];
    let cols = d.iter().product::<usize>() / rows;
    let mut out = Matrix::zeros(rows, cols);
    for k in 0..d[2] {
        for j in 0..d[1] {
            for i in 0..d[0] {
                let (r, c) = unfold_position(d, n, i, j, k);
                out[(r, c)] = t.at(i, j, k);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`mode_n_matricize`].
pub fn fold(m: &Matrix, n: usize, dims: [usize; 3]) -> Result<Tensor3> {
    check_mode(n)?;
    let rows = dims[n - 1];
    let cols = dims.iter().product::<usize>() / rows.max(1);
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Dimension(format!("cannot fold {}x{} into {dims:?} along mode {n}", m.nrows(), m.ncols())));
    }
    Tensor3::from_fn(dims, |i, j, k| {
        let (r, c) = unfold_position(dims, n, i, j, k);
        m[(r, c)]
    })
}

/// `t ×_n m` for `m` of shape `J × I_n`.
pub fn mode_n_product(t: &Tensor3, m: &Matrix, n: usize) -> Result<Tensor3> {
    check_mode(n)?;
    let d = t.dims;
    if m.ncols() != d[n - 1] {
        return Err(Error::Dimension(format!("mode-{n} product needs {} columns, matrix has {}", d[n - 1], m.ncols())));
    }
    let mut out_dims = d;
    out_dims[n - 1] = m.nrows();
    // Y_(n) = M · X_(n)
    let unfolded = m * mode_n_matricize(t, n)?;
    fold(&unfolded, n, out_dims)
}

/// Kronecker product `a ⊗ b`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// `u ∘ v ∘ w`, entry `(i,j,k) = u_i v_j w_k`.
pub fn outer3(u: &Vector, v: &Vector, w: &Vector) -> Result<Tensor3> {
    Tensor3::from_fn([u.len(), v.len(), w.len()], |i, j, k| u[i] * v[j] * w[k])
}

/// Core tensor plus the three factor matrices of a Tucker decomposition
/// `B = G ×1 β1 ×2 β2 ×3 β3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuckerFactors {
    pub core: Tensor3,
    pub beta1: Matrix,
    pub beta2: Matrix,
    pub beta3: Matrix,
}

impl TuckerFactors {
    pub fn new(core: Tensor3, beta1: Matrix, beta2: Matrix, beta3: Matrix) -> Result<Self> {
        let f = Self { core, beta1, beta2, beta3 };
        f.validate()?;
        Ok(f)
    }

    pub fn ranks(&self) -> [usize; 3] {
        self.core.dims()
    }

    /// Output dims `(K, K, L)`.
    pub fn output_dims(&self) -> [usize; 3] {
        [self.beta1.nrows(), self.beta2.nrows(), self.beta3.nrows()]
    }

    pub fn validate(&self) -> Result<()> {
        let [r1, r2, r3] = self.core.dims();
        let shape_ok = self.beta1.ncols() == r1 && self.beta2.ncols() == r2 && self.beta3.ncols() == r3;
        if !shape_ok {
            return Err(Error::Dimension(format!(
                "factor columns ({}, {}, {}) do not match core dims ({r1}, {r2}, {r3})",
                self.beta1.ncols(),
                self.beta2.ncols(),
                self.beta3.ncols()
            )));
        }
        let k = self.beta1.nrows();
        if self.beta2.nrows() != k {
            return Err(Error::Dimension(format!("beta1 has {k} rows but beta2 has {}", self.beta2.nrows())));
        }
        let l = self.beta3.nrows();
        if r1 > k || r2 > k || r3 > l || k == 0 || l == 0 {
            return Err(Error::Dimension(format!("ranks ({r1}, {r2}, {r3}) exceed bounds (K={k}, K={k}, L={l})")));
        }
        Ok(())
    }

    /// `G ×1 β1 ×2 β2 ×3 β3`.
    pub fn reconstruct(&self) -> Result<Tensor3> {
        tucker_reconstruct(self)
    }

    /// `β1 · G_(1) · (β3 ⊗ β2)ᵀ`, i.e. the `K × KL` matrix `[A_1 … A_L]`.
    pub fn mode1_matrix(&self) -> Result<Matrix> {
        self.validate()?;
        let g1 = mode_n_matricize(&self.core, 1)?;
        Ok(&self.beta1 * g1 * kronecker(&self.beta3, &self.beta2).transpose())
    }
}

pub fn tucker_reconstruct(f: &TuckerFactors) -> Result<Tensor3> {
    f.validate()?;
    let t = mode_n_product(&f.core, &f.beta1, 1)?;
    let t = mode_n_product(&t, &f.beta2, 2)?;
    mode_n_product(&t, &f.beta3, 3)
}
