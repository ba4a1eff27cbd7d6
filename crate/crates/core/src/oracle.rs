//! Explicit dense assembly of the discrete transport operators for tiny problems.
//!
//! Element matrices here come from Gauss quadrature of the bilinear basis in
//! physical coordinates, with the upwind coupling built face by face from the
//! neighbour's basis evaluated at the same points. Nothing is shared with the
//! sweep's closed-form matrices, so the two routes check each other.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::transport::TransportProblem;

/// Largest angular-space dimension the oracle will assemble.
pub const ORACLE_LIMIT: usize = 20_000;

const NL: usize = 4;

/// Explicit matrix in canonical moment or angular ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec()
    }
}

/// Weak-form loss operator and the block-diagonal mass matrix, so that `L^-1 q = K^-1 M q`.
#[derive(Debug, Clone)]
pub struct DenseLoss {
    pub stiffness: DenseOperator,
    pub mass: DenseOperator,
}

impl DenseLoss {
    /// `L^-1 q` by a dense LU solve.
    pub fn apply_inverse(&self, q: &[f64]) -> Result<Vec<f64>> {
        let rhs = &self.mass.matrix * DVector::from_column_slice(q);
        let x = self
            .stiffness
            .matrix
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("dense loss operator".into()))?;
        Ok(x.as_slice().to_vec())
    }
}

fn gauss2() -> [(f64, f64); 2] {
    let h = 0.5 / 3f64.sqrt();
    [(0.5 - h, 0.5), (0.5 + h, 0.5)]
}

/// Bilinear basis of a cell at physical point (x, y): values and gradients.
struct CellGeom {
    x0: f64,
    y0: f64,
    hx: f64,
    hy: f64,
}

impl CellGeom {
    fn phi1(t: f64, i: usize) -> f64 {
        if i == 0 {
            1.0 - t
        } else {
            t
        }
    }

    fn value(&self, k: usize, x: f64, y: f64) -> f64 {
        let (s, t) = ((x - self.x0) / self.hx, (y - self.y0) / self.hy);
        Self::phi1(s, k % 2) * Self::phi1(t, k / 2)
    }

    fn grad(&self, k: usize, x: f64, y: f64) -> (f64, f64) {
        let (s, t) = ((x - self.x0) / self.hx, (y - self.y0) / self.hy);
        let dsx = if k.is_multiple_of(2) { -1.0 } else { 1.0 } / self.hx;
        let dty = if k / 2 == 0 { -1.0 } else { 1.0 } / self.hy;
        (dsx * Self::phi1(t, k / 2), Self::phi1(s, k % 2) * dty)
    }
}

fn check_size(problem: &TransportProblem) -> Result<usize> {
    let size = problem.layout().len() * problem.quadrature().len();
    if size > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            size,
            limit: ORACLE_LIMIT,
        });
    }
    Ok(size)
}

fn angular_index(problem: &TransportProblem, g: usize, a: usize, c: usize, k: usize) -> usize {
    let l = problem.layout();
    ((g * problem.quadrature().len() + a) * l.n_cells + c) * NL + k
}

/// Weak-form loss operator `K` (streaming + collision + upwind faces) and mass `M`.
pub fn assemble_dense_l(problem: &TransportProblem) -> Result<DenseLoss> {
    let size = check_size(problem)?;
    let mesh = problem.mesh();
    let quad = problem.quadrature();
    let xs = problem.cross_sections();
    let (hx, hy) = (mesh.cell_width, mesh.cell_height);
    let mut k_mat = DMatrix::zeros(size, size);
    let mut m_mat = DMatrix::zeros(size, size);
    let pts = gauss2();

    for g in 0..xs.n_groups {
        for (a, dir) in quad.directions().iter().enumerate() {
            for j in 0..mesh.ny {
                for i in 0..mesh.nx {
                    let c = mesh.cell(i, j);
                    let sigma = xs.material(mesh.material(c)).sigma_t[g];
                    let geom = CellGeom {
                        x0: i as f64 * hx,
                        y0: j as f64 * hy,
                        hx,
                        hy,
                    };
                    let row = |k| angular_index(problem, g, a, c, k);

                    for &(sx, wx) in &pts {
                        for &(sy, wy) in &pts {
                            let (x, y) = (geom.x0 + sx * hx, geom.y0 + sy * hy);
                            let w = wx * wy * hx * hy;
                            for kk in 0..NL {
                                let vk = geom.value(kk, x, y);
                                for ll in 0..NL {
                                    let vl = geom.value(ll, x, y);
                                    let (gx, gy) = geom.grad(ll, x, y);
                                    k_mat[(row(kk), row(ll))] += w * (vk * (dir.mu * gx + dir.eta * gy) + sigma * vk * vl);
                                    m_mat[(row(kk), row(ll))] += w * vk * vl;
                                }
                            }
                        }
                    }

                    // faces: (outward normal, neighbour, parametrization)
                    let faces: [((f64, f64), Option<(usize, usize)>); 4] = [
                        ((-1.0, 0.0), i.checked_sub(1).map(|ii| (ii, j))),
                        ((1.0, 0.0), (i + 1 < mesh.nx).then_some((i + 1, j))),
                        ((0.0, -1.0), j.checked_sub(1).map(|jj| (i, jj))),
                        ((0.0, 1.0), (j + 1 < mesh.ny).then_some((i, j + 1))),
                    ];
                    for (normal, nb) in faces {
                        let flux = dir.mu * normal.0 + dir.eta * normal.1;
                        if flux >= 0.0 {
                            continue;
                        }
                        let inflow = -flux;
                        for &(t, wt) in &pts {
                            let (x, y, len) = if normal.1 == 0.0 {
                                let x = if normal.0 < 0.0 { geom.x0 } else { geom.x0 + hx };
                                (x, geom.y0 + t * hy, hy)
                            } else {
                                let y = if normal.1 < 0.0 { geom.y0 } else { geom.y0 + hy };
                                (geom.x0 + t * hx, y, hx)
                            };
                            let w = wt * len * inflow;
                            for kk in 0..NL {
                                let vk = geom.value(kk, x, y);
                                for ll in 0..NL {
                                    k_mat[(row(kk), row(ll))] += w * vk * geom.value(ll, x, y);
                                }
                                if let Some((ni, nj)) = nb {
                                    let nc = mesh.cell(ni, nj);
                                    let ngeom = CellGeom {
                                        x0: ni as f64 * hx,
                                        y0: nj as f64 * hy,
                                        hx,
                                        hy,
                                    };
                                    for ll in 0..NL {
                                        let col = angular_index(problem, g, a, nc, ll);
                                        k_mat[(row(kk), col)] -= w * vk * ngeom.value(ll, x, y);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(DenseLoss {
        stiffness: DenseOperator { matrix: k_mat },
        mass: DenseOperator { matrix: m_mat },
    })
}

/// Discrete-to-moment map `D` (moment rows, angular columns).
pub fn assemble_dense_d(problem: &TransportProblem) -> Result<DenseOperator> {
    let size = check_size(problem)?;
    let l = problem.layout();
    let mut d = DMatrix::zeros(l.len(), size);
    for g in 0..l.n_groups {
        for (a, dir) in problem.quadrature().directions().iter().enumerate() {
            for c in 0..l.n_cells {
                for k in 0..NL {
                    d[(l.index(g, c, k), angular_index(problem, g, a, c, k))] = dir.weight;
                }
            }
        }
    }
    Ok(DenseOperator { matrix: d })
}

/// Moment-to-discrete times scattering, `M S` (angular rows, moment columns).
pub fn assemble_dense_ms(problem: &TransportProblem) -> Result<DenseOperator> {
    let size = check_size(problem)?;
    let l = problem.layout();
    let xs = problem.cross_sections();
    let mut ms = DMatrix::zeros(size, l.len());
    for g in 0..l.n_groups {
        for a in 0..problem.quadrature().len() {
            for c in 0..l.n_cells {
                let mat = xs.material(problem.mesh().material(c));
                for gp in 0..l.n_groups {
                    for k in 0..NL {
                        ms[(angular_index(problem, g, a, c, k), l.index(gp, c, k))] =
                            mat.sigma_s[gp][g] / (4.0 * PI);
                    }
                }
            }
        }
    }
    Ok(DenseOperator { matrix: ms })
}

/// Discretized isotropic external source in angular space.
pub fn assemble_dense_source(problem: &TransportProblem) -> Result<Vec<f64>> {
    let size = check_size(problem)?;
    let l = problem.layout();
    let xs = problem.cross_sections();
    let mut q = vec![0.0; size];
    for g in 0..l.n_groups {
        for a in 0..problem.quadrature().len() {
            for c in 0..l.n_cells {
                let s = xs.material(problem.mesh().material(c)).q_ext[g] / (4.0 * PI);
                for k in 0..NL {
                    q[angular_index(problem, g, a, c, k)] = s;
                }
            }
        }
    }
    Ok(q)
}

/// `I - D L^-1 M S` as an explicit moment-space matrix.
pub fn assemble_full_operator(problem: &TransportProblem) -> Result<DenseOperator> {
    let loss = assemble_dense_l(problem)?;
    let d = assemble_dense_d(problem)?;
    let ms = assemble_dense_ms(problem)?;
    let rhs = &loss.mass.matrix * &ms.matrix;
    let linv_ms = loss
        .stiffness
        .matrix
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("dense loss operator".into()))?;
    let n = problem.layout().len();
    Ok(DenseOperator {
        matrix: DMatrix::identity(n, n) - d.matrix * linv_ms,
    })
}

/// `D L^-1 Q_e` by dense solves.
pub fn dense_rhs(problem: &TransportProblem) -> Result<Vec<f64>> {
    let loss = assemble_dense_l(problem)?;
    let d = assemble_dense_d(problem)?;
    let psi = loss.apply_inverse(&assemble_dense_source(problem)?)?;
    Ok(d.apply(&psi))
}

/// LU solve with one step of iterative refinement.
pub fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let lu = a.clone().lu();
    let bv = DVector::from_column_slice(b);
    let mut x = lu
        .solve(&bv)
        .ok_or_else(|| Error::Singular("dense_solve: matrix is singular".into()))?;
    let r = &bv - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("dense_solve: non-finite solution".into()));
    }
    Ok(x.as_slice().to_vec())
}

/// Columns `A e_j` of any operator; a cross-check against direct assembly.
pub fn probe_operator<A: LinearOperator + ?Sized>(op: &A) -> Result<DMatrix<f64>> {
    let n = op.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col)?;
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(out)
}
