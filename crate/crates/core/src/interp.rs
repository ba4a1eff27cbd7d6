//! Parameter-space interpolation of reduced systems.
//!
//! SPD matrices are interpolated in the log-Euclidean sense: map to symmetric
//! logs, combine with Gaussian RBF cardinal weights, map back with the matrix
//! exponential. The RBF is augmented with a constant term so the weights sum
//! to one and constant data is reproduced exactly.

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen, LU};

use crate::error::{Error, Result};

/// Principal logarithm of a symmetric positive definite matrix.
pub fn spd_log(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Invalid(format!("matrix is not positive definite (eigenvalue {bad:e})")));
    }
    Ok(spectral_map(&eig, f64::ln))
}

/// Exponential of a symmetric matrix; always SPD.
pub fn spd_exp(s: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (s + s.transpose()) * 0.5;
    spectral_map(&SymmetricEigen::new(sym), f64::exp)
}

fn spectral_map(eig: &SymmetricEigen<f64, Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let m = q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Axis-aligned box used to normalize parameters to the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl ParamBox {
    pub fn bounding(points: &[(f64, f64)]) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::Invalid("no parameter points".into()))?;
        let mut lo = [first.0, first.1];
        let mut hi = lo;
        for p in points {
            lo = [lo[0].min(p.0), lo[1].min(p.1)];
            hi = [hi[0].max(p.0), hi[1].max(p.1)];
        }
        Ok(Self { lo, hi })
    }

    pub fn normalize(&self, p: (f64, f64)) -> [f64; 2] {
        let n = |v: f64, i: usize| {
            let w = self.hi[i] - self.lo[i];
            if w > 0.0 {
                (v - self.lo[i]) / w
            } else {
                v - self.lo[i]
            }
        };
        [n(p.0, 0), n(p.1, 1)]
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        (self.lo[0]..=self.hi[0]).contains(&p.0) && (self.lo[1]..=self.hi[1]).contains(&p.1)
    }
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Gaussian RBF `exp(-(eps d)^2)` with a constant augmentation, in cardinal form.
#[derive(Debug, Clone)]
pub struct GaussianRbf {
    centers: Vec<[f64; 2]>,
    eps: f64,
    ridge: f64,
    /// Unregularized saddle-point matrix `[[K, 1], [1^T, 0]]`.
    exact: DMatrix<f64>,
    /// LU of the ridge-shifted matrix.
    saddle: LU<f64, Dyn, Dyn>,
}

/// Refinement steps that pull ridge-regularized weights back onto the exact interpolant.
const MAX_REFINE: usize = 8;

/// Relative ridge added to the kernel diagonal.
pub const DEFAULT_RIDGE: f64 = 1e-12;

impl GaussianRbf {
    /// `1 / mean pairwise distance` of the centers.
    pub fn default_shape(centers: &[[f64; 2]]) -> Result<f64> {
        let n = centers.len();
        if n < 2 {
            return Err(Error::Invalid("RBF needs at least two centers".into()));
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                total += dist(&centers[i], &centers[j]);
            }
        }
        let mean = total / (n * (n - 1) / 2) as f64;
        if !(mean > 0.0) {
            return Err(Error::Invalid("RBF centers coincide".into()));
        }
        Ok(1.0 / mean)
    }

    pub fn new(centers: Vec<[f64; 2]>, eps: f64, ridge: f64) -> Result<Self> {
        let n = centers.len();
        if n < 2 {
            return Err(Error::Invalid("RBF needs at least two centers".into()));
        }
        if !(eps > 0.0) || !(ridge >= 0.0) {
            return Err(Error::Invalid("RBF shape must be positive and ridge non-negative".into()));
        }
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = kernel(eps, dist(&centers[i], &centers[j]));
            }
            m[(i, n)] = 1.0;
            m[(n, i)] = 1.0;
        }
        let exact = m.clone();
        // trace of the kernel block is n, so the trace-scaled ridge is `ridge` per diagonal entry
        let shift = ridge * (0..n).map(|i| m[(i, i)]).sum::<f64>() / n as f64;
        for i in 0..n {
            m[(i, i)] += shift;
        }
        let saddle = m.lu();
        if !saddle.is_invertible() {
            return Err(Error::Singular("RBF interpolation system".into()));
        }
        Ok(Self {
            centers,
            eps,
            ridge,
            exact,
            saddle,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    /// Weights `w` such that the interpolant at `q` is `sum_i w_i f_i`. They sum to one.
    pub fn cardinal_weights(&self, q: [f64; 2]) -> Vec<f64> {
        let n = self.centers.len();
        let mut rhs = DVector::zeros(n + 1);
        for (i, c) in self.centers.iter().enumerate() {
            rhs[i] = kernel(self.eps, dist(c, &q));
        }
        rhs[n] = 1.0;
        // The ridge keeps the factorization stable but biases the interpolant at
        // the nodes; iterative refinement against the exact system removes that bias
        // in the well-conditioned directions, which is where smooth data lives.
        let solve = |r: &DVector<f64>| self.saddle.solve(r).expect("saddle system checked invertible");
        let mut sol = solve(&rhs);
        let mut res = &rhs - &self.exact * &sol;
        let mut res_norm = res.norm();
        for _ in 0..MAX_REFINE {
            if res_norm <= f64::EPSILON * rhs.norm() {
                break;
            }
            let next = &sol + solve(&res);
            let next_res = &rhs - &self.exact * &next;
            if next_res.norm() >= res_norm {
                break;
            }
            sol = next;
            res_norm = next_res.norm();
            res = next_res;
        }
        sol.rows(0, n).iter().copied().collect()
    }
}

#[inline]
fn kernel(eps: f64, d: f64) -> f64 {
    (-(eps * d).powi(2)).exp()
}

/// `sum_i w_i M_i`.
pub fn weighted_sum(weights: &[f64], mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(mats[0].nrows(), mats[0].ncols());
    for (w, m) in weights.iter().zip(mats) {
        out += m * *w;
    }
    out
}
