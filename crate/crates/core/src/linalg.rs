//! Small dense and banded symmetric solvers used by the block updates.

use nalgebra::{DMatrix, DVector};

use crate::error::{FbdError, Result};

/// Symmetric matrix with half-bandwidth `bw`, lower band stored row-wise.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    // row i holds A(i, i - k) at i * (bw + 1) + k, k = 0..=bw
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        (k <= self.bw).then_some(hi * (self.bw + 1) + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to `A(i, j)` (and by symmetry `A(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("({i}, {j}) outside band {}", self.bw));
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[i * (self.bw + 1) + (i - j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Banded Cholesky factorisation; `None` if the matrix is not
    /// numerically positive definite.
    pub fn cholesky(&self) -> Option<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = self.data[i * w + (i - j)];
                for k in lo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        // reject factorisations whose pivots collapse relative to the largest
        let max_pivot = (0..n).map(|i| l[i * w]).fold(0.0, f64::max);
        let min_pivot = (0..n).map(|i| l[i * w]).fold(f64::INFINITY, f64::min);
        if min_pivot <= max_pivot * 1e-7 {
            return None;
        }
        Some(BandedCholesky { n, bw, l })
    }

    /// Solves `A x = b`, falling back to a dense pseudo-inverse if the band
    /// factorisation breaks down.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self.cholesky() {
            Some(c) => Ok(c.solve(b)),
            None => solve_sym_dense(self.to_dense(), b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= self.l[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= self.l[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        y
    }
}

/// Solves a symmetric positive semidefinite system, using Cholesky when it
/// succeeds and a truncated-SVD pseudo-inverse otherwise.
pub fn solve_sym_dense(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    if let Some(ch) = a.clone().cholesky() {
        let d = ch.l_dirty().diagonal();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        if min > max * 1e-7 {
            return Ok(ch.solve(&rhs).as_slice().to_vec());
        }
    }
    pinv_solve(a, &rhs)
}

/// Factorise once, solve for many right-hand sides.
pub enum SymFactor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Svd(nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, f64),
}

impl SymFactor {
    pub fn new(a: DMatrix<f64>) -> Self {
        if let Some(ch) = a.clone().cholesky() {
            let d = ch.l_dirty().diagonal();
            let max = d.iter().cloned().fold(0.0, f64::max);
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            if min > max * 1e-7 {
                return SymFactor::Cholesky(ch);
            }
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        SymFactor::Svd(svd, smax * 1e-13)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let rhs = DVector::from_column_slice(b);
        match self {
            SymFactor::Cholesky(ch) => Ok(ch.solve(&rhs).as_slice().to_vec()),
            SymFactor::Svd(svd, eps) => svd
                .solve(&rhs, *eps)
                .map(|x| x.as_slice().to_vec())
                .map_err(|e| FbdError::Singular(e.to_string())),
        }
    }
}

/// Least squares `min |B x - d|` for a fixed tall `B` and many `d`, through
/// a thin SVD. Singular values below `1e-8 * max` are discarded; callers
/// solve for a correction to the current estimate, so discarded directions
/// keep their values and the misfit still cannot rise.
pub struct LsFactor {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    inv_s: Vec<f64>,
}

impl LsFactor {
    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        let svd = b.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let inv_s = svd
            .singular_values
            .iter()
            .map(|&s| if s > 1e-8 * smax { 1.0 / s } else { 0.0 })
            .collect();
        match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => Ok(Self { u, v_t, inv_s }),
            _ => Err(FbdError::Singular("SVD did not return singular vectors".into())),
        }
    }

    pub fn solve(&self, d: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_column_slice(d);
        let mut c = self.u.tr_mul(&rhs);
        for (v, w) in c.iter_mut().zip(&self.inv_s) {
            *v *= w;
        }
        self.v_t.tr_mul(&c).as_slice().to_vec()
    }
}

fn pinv_solve(a: DMatrix<f64>, rhs: &DVector<f64>) -> Result<Vec<f64>> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(vec![0.0; rhs.len()]);
    }
    svd.solve(rhs, smax * 1e-13)
        .map(|x| x.as_slice().to_vec())
        .map_err(|e| FbdError::Singular(e.to_string()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_matches_dense() {
        let n = 12;
        let bw = 3;
        let mut a = BandedSym::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, 4.0 + i as f64 * 0.1);
            for k in 1..=bw {
                if i >= k {
                    a.add(i, i - k, 0.3 / k as f64 * if (i + k) % 2 == 0 { 1.0 } else { -1.0 });
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = a.solve(&b).unwrap();
        let xd = solve_sym_dense(a.to_dense(), &b).unwrap();
        for (u, v) in x.iter().zip(&xd) {
            assert!((u - v).abs() < 1e-12);
        }
        let back = a.mul_vec(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_falls_back_to_min_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let x = solve_sym_dense(a, &[2.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
