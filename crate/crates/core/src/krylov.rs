//! Restarted GMRES over an abstract operator action.
//!
//! Arnoldi uses modified Gram-Schmidt with a second pass whenever the new
//! vector keeps more than `1e-10` (relative) of any earlier basis direction.
//! The least-squares problem is updated with Givens rotations. The initial
//! guess is always zero.

use nalgebra::DMatrix;

use crate::config::GmresConfig;
use crate::error::{Error, Result};
use crate::field::{dot, norm2};

/// Matrix-free linear operator `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let v = self * nalgebra::DVector::from_column_slice(x);
        y.copy_from_slice(v.as_slice());
        Ok(())
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (**self).apply(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub maxiter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            restart: 30,
            maxiter: 1000,
        }
    }
}

impl From<&GmresConfig> for GmresOptions {
    fn from(c: &GmresConfig) -> Self {
        Self {
            tol: c.tol,
            restart: c.restart,
            maxiter: c.maxiter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresReport {
    /// Arnoldi steps taken across all restart cycles.
    pub iterations: usize,
    /// True relative residual `||b - A x|| / ||b||` of the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    /// Operator applications: one per Arnoldi step plus one per residual refresh.
    pub sweep_count: usize,
    /// Least-squares residual estimate after each Arnoldi step.
    pub residual_history: Vec<f64>,
    /// Restart cycle index of each history entry.
    pub cycle_of_step: Vec<usize>,
}

const REORTH_THRESHOLD: f64 = 1e-10;

/// Solve `A x = b` from a zero initial guess.
pub fn gmres_solve<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    opts: &GmresOptions,
) -> Result<(Vec<f64>, GmresReport)> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::Dimension { expected: n, got: b.len() });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Invalid("GMRES tolerance must be positive".into()));
    }
    if opts.restart == 0 {
        return Err(Error::Invalid("GMRES restart must be at least 1".into()));
    }
    if let Some(index) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut report = GmresReport {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        sweep_count: 0,
        residual_history: Vec::new(),
        cycle_of_step: Vec::new(),
    };
    let mut x = vec![0.0; n];
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((x, report));
    }

    let m = opts.restart.min(n);
    let mut r = b.to_vec();
    let mut cycle = 0;
    loop {
        let beta = norm2(&r);
        report.relative_residual = beta / b_norm;
        if report.relative_residual <= opts.tol {
            report.converged = true;
            return Ok((x, report));
        }
        if report.iterations >= opts.maxiter {
            report.converged = false;
            return Ok((x, report));
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // column-major Hessenberg, column k has k + 2 entries
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut w = vec![0.0; n];
        let mut steps = 0;

        for k in 0..m {
            if report.iterations >= opts.maxiter {
                break;
            }
            op.apply(&basis[k], &mut w)?;
            report.sweep_count += 1;
            report.iterations += 1;
            if let Some(index) = w.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index });
            }

            let mut col = vec![0.0; k + 2];
            for (j, v) in basis.iter().enumerate() {
                let hj = dot(&w, v);
                col[j] = hj;
                axpy(-hj, v, &mut w);
            }
            let mut w_norm = norm2(&w);
            if w_norm > 0.0 {
                let loss = basis
                    .iter()
                    .map(|v| dot(&w, v).abs())
                    .fold(0.0, f64::max)
                    / w_norm;
                if loss > REORTH_THRESHOLD {
                    for (j, v) in basis.iter().enumerate() {
                        let hj = dot(&w, v);
                        col[j] += hj;
                        axpy(-hj, v, &mut w);
                    }
                    w_norm = norm2(&w);
                }
            }
            col[k + 1] = w_norm;

            for j in 0..k {
                let (a, bb) = (col[j], col[j + 1]);
                col[j] = cs[j] * a + sn[j] * bb;
                col[j + 1] = -sn[j] * a + cs[j] * bb;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            cs.push(c);
            sn.push(s);
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            h.push(col);
            steps = k + 1;

            let estimate = g[k + 1].abs() / b_norm;
            report.residual_history.push(estimate);
            report.cycle_of_step.push(cycle);
            let breakdown = w_norm <= f64::EPSILON * beta;
            if estimate <= opts.tol || breakdown {
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }

        // back substitution on the triangular factor
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for j in i + 1..steps {
                acc -= h[j][i] * y[j];
            }
            if h[i][i] == 0.0 {
                return Err(Error::Singular("GMRES Hessenberg factor is singular".into()));
            }
            y[i] = acc / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut x);
        }

        op.apply(&x, &mut w)?;
        report.sweep_count += 1;
        if let Some(index) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        for ((ri, bi), wi) in r.iter_mut().zip(b).zip(&w) {
            *ri = bi - wi;
        }
        cycle += 1;
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Identity(usize);
    impl LinearOperator for Identity {
        fn dim(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
            y.copy_from_slice(x);
            Ok(())
        }
    }

    struct Poisoned;
    impl LinearOperator for Poisoned {
        fn dim(&self) -> usize {
            3
        }
        fn apply(&self, _: &[f64], y: &mut [f64]) -> Result<()> {
            y.fill(f64::NAN);
            Ok(())
        }
    }

    fn random_system(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // I - K with ||K|| < 1, like the transport operator
        let k = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) * 0.9 / n as f64);
        let a = DMatrix::identity(n, n) - k;
        let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (a, b)
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = vec![1.0, -2.0, 3.0];
        let (x, rep) = gmres_solve(&Identity(3), &b, &GmresOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let (x, rep) = gmres_solve(&a, &[2.0, 3.0], &GmresOptions::default()).unwrap();
        assert!(rep.iterations <= 2);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_solve_and_counts_applications() {
        let (a, b) = random_system(60, 7);
        let opts = GmresOptions {
            tol: 1e-10,
            restart: 8,
            maxiter: 500,
        };
        let (x, rep) = gmres_solve(&a, &b, &opts).unwrap();
        assert!(rep.converged && rep.relative_residual <= 1e-10);
        let cycles = rep.cycle_of_step.last().unwrap() + 1;
        assert_eq!(rep.sweep_count, rep.iterations + cycles);
        let direct = a.clone().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for (xi, di) in x.iter().zip(direct.iter()) {
            assert!((xi - di).abs() < 1e-8);
        }
    }

    #[test]
    fn residual_estimate_monotone_within_cycle() {
        let (a, b) = random_system(40, 11);
        let opts = GmresOptions {
            tol: 1e-12,
            restart: 5,
            maxiter: 200,
        };
        let (_, rep) = gmres_solve(&a, &b, &opts).unwrap();
        for w in 1..rep.residual_history.len() {
            if rep.cycle_of_step[w] == rep.cycle_of_step[w - 1] {
                assert!(rep.residual_history[w] <= rep.residual_history[w - 1] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn restart_length_does_not_change_solution() {
        let (a, b) = random_system(50, 3);
        let tol = 1e-9;
        let solve = |restart| {
            gmres_solve(&a, &b, &GmresOptions { tol, restart, maxiter: 1000 }).unwrap().0
        };
        let (x20, x50) = (solve(20), solve(50));
        let diff = crate::field::relative_l2_error(&x20, &x50);
        assert!(diff <= 10.0 * tol, "{diff}");
    }

    #[test]
    fn non_convergence_is_flagged_not_raised() {
        let (a, b) = random_system(30, 5);
        let opts = GmresOptions {
            tol: 1e-14,
            restart: 2,
            maxiter: 3,
        };
        let (_, rep) = gmres_solve(&a, &b, &opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert!(rep.relative_residual > 1e-14);
    }

    #[test]
    fn nan_output_is_a_hard_error() {
        let err = gmres_solve(&Poisoned, &[1.0, 0.0, 0.0], &GmresOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (x, rep) = gmres_solve(&Identity(4), &[0.0; 4], &GmresOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(rep.sweep_count, 0);
    }
}
