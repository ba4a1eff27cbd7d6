//! Snapshot collection and POD basis construction.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::field::FieldLayout;
use crate::krylov::GmresOptions;
use crate::transport::{solve_fom, TransportProblem};

/// FOM solutions stored column-wise, one per training parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub layout: FieldLayout,
    pub columns: DMatrix<f64>,
    pub params: Vec<(f64, f64)>,
    /// Total sweeps spent by the FOM solves.
    pub sweeps: usize,
}

impl SnapshotMatrix {
    pub fn new(layout: FieldLayout, columns: DMatrix<f64>, params: Vec<(f64, f64)>) -> Result<Self> {
        if columns.ncols() != params.len() {
            return Err(Error::Invalid(format!(
                "{} snapshot columns for {} parameters",
                columns.ncols(),
                params.len()
            )));
        }
        if columns.nrows() != layout.len() {
            return Err(Error::Dimension {
                expected: layout.len(),
                got: columns.nrows(),
            });
        }
        if columns.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("snapshot matrix has non-finite entries".into()));
        }
        Ok(Self {
            layout,
            columns,
            params,
            sweeps: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Run one FOM solve per parameter. Columns come back in input order.
pub fn collect_snapshots(params: &[(f64, f64)], config: &ProblemConfig) -> Result<SnapshotMatrix> {
    if params.is_empty() {
        return Err(Error::Invalid("no snapshot parameters".into()));
    }
    for &(t1, t2) in params {
        for w in crate::config::extrapolation_warnings(t1, t2) {
            log::warn!("{w}");
        }
    }
    let opts = GmresOptions::from(&config.gmres);
    let solved: Vec<(Vec<f64>, usize)> = params
        .par_iter()
        .map(|&(theta1, theta2)| {
            let problem = TransportProblem::from_config(&config.with_params(theta1, theta2))?;
            let sol = solve_fom(&problem, &opts)?;
            if !sol.report.converged {
                return Err(Error::NotConverged {
                    theta1,
                    theta2,
                    residual: sol.report.relative_residual,
                });
            }
            Ok((sol.phi.into_vec(), sol.sweeps))
        })
        .collect::<Result<_>>()?;
    let n = solved[0].0.len();
    let mut columns = DMatrix::zeros(n, params.len());
    let mut sweeps = 0;
    for (j, (col, s)) in solved.iter().enumerate() {
        columns.column_mut(j).copy_from_slice(col);
        sweeps += s;
    }
    let layout = TransportProblem::from_config(config)?.layout();
    let mut x = SnapshotMatrix::new(layout, columns, params.to_vec())?;
    x.sweeps = sweeps;
    Ok(x)
}

/// How many modes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Rank(usize),
    /// Smallest rank whose retained information reaches the threshold.
    Information(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    /// `n x r` orthonormal modes.
    pub modes: DMatrix<f64>,
    /// Full singular spectrum, non-increasing.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub information: f64,
}

impl ReducedBasis {
    pub fn dim(&self) -> usize {
        self.modes.nrows()
    }

    /// Largest entry of `|U^T U - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.modes.tr_mul(&self.modes);
        (gram - DMatrix::identity(self.rank, self.rank)).abs().max()
    }
}

/// Fraction of squared singular-value energy kept by the first `r` modes.
pub fn info_retained(singular_values: &[f64], r: usize) -> Result<f64> {
    if r > singular_values.len() {
        return Err(Error::RankTooLarge {
            rank: r,
            columns: singular_values.len(),
        });
    }
    if r == 0 {
        return Ok(0.0);
    }
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let kept: f64 = singular_values[..r].iter().map(|s| s * s).sum();
    Ok(kept / total)
}

/// Left singular vectors of the snapshot matrix, via a thin QR followed by the SVD of `R`.
pub fn pod_basis(x: &SnapshotMatrix, criterion: Truncation) -> Result<ReducedBasis> {
    pod_basis_from_columns(&x.columns, criterion)
}

pub fn pod_basis_from_columns(x: &DMatrix<f64>, criterion: Truncation) -> Result<ReducedBasis> {
    let cols = x.ncols();
    if cols == 0 || x.iter().all(|&v| v == 0.0) {
        return Err(Error::Invalid("snapshot matrix is empty or identically zero".into()));
    }
    if cols > x.nrows() {
        return Err(Error::Invalid("more snapshots than degrees of freedom".into()));
    }
    let qr = x.clone().qr();
    let q = qr.q();
    let svd = qr.r().svd(true, false);
    let u_r = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();

    let rank = match criterion {
        Truncation::Rank(r) => {
            if r == 0 {
                return Err(Error::Invalid("rank must be at least 1".into()));
            }
            if r > cols {
                return Err(Error::RankTooLarge { rank: r, columns: cols });
            }
            r
        }
        Truncation::Information(threshold) => {
            if !(threshold > 0.0 && threshold <= 1.0) {
                return Err(Error::Invalid(format!("information threshold {threshold} not in (0, 1]")));
            }
            (1..=cols)
                .find(|&r| info_retained(&singular_values, r).map_or(false, |i| i >= threshold))
                .unwrap_or(cols)
        }
    };
    let mut u_sorted = DMatrix::zeros(cols, rank);
    for (j, &i) in order.iter().take(rank).enumerate() {
        u_sorted.set_column(j, &u_r.column(i));
    }
    let modes = q * u_sorted;
    let information = info_retained(&singular_values, rank)?;
    Ok(ReducedBasis {
        modes,
        singular_values,
        rank,
        information,
    })
}
