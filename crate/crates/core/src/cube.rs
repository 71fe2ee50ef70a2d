use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Values indexed by `(lag, row, col)`, one `K × K` block per lag, matching
/// the layout of the transition matrices `A_1 … A_L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagCube<T> {
    lags: usize,
    k: usize,
    data: Vec<T>,
}

impl<T: Clone> LagCube<T> {
    pub fn filled(lags: usize, k: usize, value: T) -> Self {
        Self { lags, k, data: vec![value; lags * k * k] }
    }
}

impl<T> LagCube<T> {
    pub fn from_fn(lags: usize, k: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(lags * k * k);
        for l in 0..lags {
            for col in 0..k {
                for row in 0..k {
                    data.push(f(l, row, col));
                }
            }
        }
        Self { lags, k, data }
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    fn offset(&self, lag: usize, row: usize, col: usize) -> usize {
        lag * self.k * self.k + col * self.k + row
    }

    pub fn get(&self, lag: usize, row: usize, col: usize) -> &T {
        &self.data[self.offset(lag, row, col)]
    }

    pub fn set(&mut self, lag: usize, row: usize, col: usize, value: T) {
        let i = self.offset(lag, row, col);
        self.data[i] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    /// Iterates `((lag, row, col), value)`.
    pub fn indexed(&self) -> impl Iterator<Item = ((usize, usize, usize), &T)> {
        let k = self.k;
        self.data.iter().enumerate().map(move |(i, v)| {
            let lag = i / (k * k);
            let rem = i % (k * k);
            ((lag, rem % k, rem / k), v)
        })
    }

    pub fn lag_slice(&self, lag: usize) -> &[T] {
        &self.data[lag * self.k * self.k..(lag + 1) * self.k * self.k]
    }

    pub fn same_shape<U>(&self, other: &LagCube<U>) -> Result<()> {
        if self.lags != other.lags || self.k != other.k {
            return Err(Error::Dimension(format!("lag cube shapes differ: ({}, {}) vs ({}, {})", self.lags, self.k, other.lags, other.k)));
        }
        Ok(())
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> LagCube<U> {
        LagCube { lags: self.lags, k: self.k, data: self.data.iter().map(f).collect() }
    }
}
