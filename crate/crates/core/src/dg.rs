//! Bilinear upwind discontinuous Galerkin on rectangles.
//!
//! Local basis functions are the nodal bilinear Lagrange functions at the cell
//! corners, numbered `k = 2 * iy + ix` with `(ix, iy)` in `{0, 1}^2`. For a
//! direction `(mu, eta)` the cell equation is
//!
//! ```text
//! (mu Gx + eta Gy + sigma_t M + sum_in |n.Omega| F_in) psi = M q + sum_in |n.Omega| C_in psi_upwind
//! ```
//!
//! where `F_in` is the inflow-face mass matrix and `C_in` couples to the
//! neighbour's trace on the shared face (zero for vacuum boundaries).

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use crate::xs::CrossSections;

pub const N_LOCAL: usize = 4;

/// Frobenius condition number above which a cell matrix counts as singular.
const MAX_CELL_CONDITION: f64 = 1e13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Left = 0,
    Right = 1,
    Bottom = 2,
    Top = 3,
}

/// Element matrices of one rectangular cell; they depend only on its size.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMatrices {
    pub width: f64,
    pub height: f64,
    pub mass: Matrix4<f64>,
    /// `int v_i d(b_j)/dx`
    pub grad_x: Matrix4<f64>,
    /// `int v_i d(b_j)/dy`
    pub grad_y: Matrix4<f64>,
    /// Face mass matrices, indexed by [`Face`].
    pub face: [Matrix4<f64>; 4],
    /// Coupling of this cell's face to the opposite-face trace of the neighbour across it.
    pub coupling: [Matrix4<f64>; 4],
}

fn mass_1d(h: f64) -> [[f64; 2]; 2] {
    [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]]
}

// int phi_i phi_j' over the unit-free 1-D element
const DERIV_1D: [[f64; 2]; 2] = [[-0.5, 0.5], [-0.5, 0.5]];

impl CellMatrices {
    pub fn new(width: f64, height: f64) -> Self {
        let mx = mass_1d(width);
        let my = mass_1d(height);
        let build = |f: &dyn Fn(usize, usize, usize, usize) -> f64| {
            Matrix4::from_fn(|k, l| f(k % 2, k / 2, l % 2, l / 2))
        };
        let mass = build(&|ix, iy, jx, jy| mx[ix][jx] * my[iy][jy]);
        let grad_x = build(&|ix, iy, jx, jy| DERIV_1D[ix][jx] * my[iy][jy]);
        let grad_y = build(&|ix, iy, jx, jy| mx[ix][jx] * DERIV_1D[iy][jy]);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let face = [
            build(&|ix, iy, jx, jy| d(ix, 0) * d(jx, 0) * my[iy][jy]),
            build(&|ix, iy, jx, jy| d(ix, 1) * d(jx, 1) * my[iy][jy]),
            build(&|ix, iy, jx, jy| d(iy, 0) * d(jy, 0) * mx[ix][jx]),
            build(&|ix, iy, jx, jy| d(iy, 1) * d(jy, 1) * mx[ix][jx]),
        ];
        let coupling = [
            build(&|ix, iy, jx, jy| d(ix, 0) * d(jx, 1) * my[iy][jy]),
            build(&|ix, iy, jx, jy| d(ix, 1) * d(jx, 0) * my[iy][jy]),
            build(&|ix, iy, jx, jy| d(iy, 0) * d(jy, 1) * mx[ix][jx]),
            build(&|ix, iy, jx, jy| d(iy, 1) * d(jy, 0) * mx[ix][jx]),
        ];
        Self {
            width,
            height,
            mass,
            grad_x,
            grad_y,
            face,
            coupling,
        }
    }

    /// Inflow faces for a direction: (x-face, y-face).
    pub fn inflow_faces(mu: f64, eta: f64) -> (Face, Face) {
        (
            if mu > 0.0 { Face::Left } else { Face::Right },
            if eta > 0.0 { Face::Bottom } else { Face::Top },
        )
    }

    /// Left-hand cell matrix for one direction and total cross section.
    pub fn local_matrix(&self, mu: f64, eta: f64, sigma_t: f64) -> Matrix4<f64> {
        let (fx, fy) = Self::inflow_faces(mu, eta);
        self.grad_x * mu
            + self.grad_y * eta
            + self.mass * sigma_t
            + self.face[fx as usize] * mu.abs()
            + self.face[fy as usize] * eta.abs()
    }

    /// `int_face b_k`, the weights that integrate a local field over one face.
    pub fn face_integrals(&self, face: Face) -> [f64; N_LOCAL] {
        let (hx, hy) = (self.width / 2.0, self.height / 2.0);
        match face {
            Face::Left => [hy, 0.0, hy, 0.0],
            Face::Right => [0.0, hy, 0.0, hy],
            Face::Bottom => [hx, hx, 0.0, 0.0],
            Face::Top => [0.0, 0.0, hx, hx],
        }
    }

    /// `int_cell b_k`; equal for all four bilinear nodal functions.
    pub fn cell_integral(&self) -> f64 {
        self.width * self.height / 4.0
    }
}

/// Precomputed per-cell update `psi = src q + up_x psi_x + up_y psi_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFactors {
    pub src: Matrix4<f64>,
    pub up_x: Matrix4<f64>,
    pub up_y: Matrix4<f64>,
}

/// The spatial scheme plus per (direction, group, material) cell inverses.
#[derive(Debug, Clone)]
pub struct DiscretizationScheme {
    pub cell: CellMatrices,
    n_groups: usize,
    n_materials: usize,
    factors: Vec<SweepFactors>,
}

/// Inverse of a cell matrix, or `None` when it is (numerically) singular.
fn invert_cell(lhs: &Matrix4<f64>) -> Option<Matrix4<f64>> {
    lhs.try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()) && inv.norm() * lhs.norm() < MAX_CELL_CONDITION)
}

impl DiscretizationScheme {
    pub fn new(width: f64, height: f64, quad: &Quadrature, xs: &CrossSections) -> Result<Self> {
        let cell = CellMatrices::new(width, height);
        let n_groups = xs.n_groups;
        let n_materials = xs.n_materials();
        let mut factors = Vec::with_capacity(quad.len() * n_groups * n_materials);
        for (a, dir) in quad.directions().iter().enumerate() {
            let (fx, fy) = CellMatrices::inflow_faces(dir.mu, dir.eta);
            for g in 0..n_groups {
                for m in 0..n_materials {
                    let lhs = cell.local_matrix(dir.mu, dir.eta, xs.material(m).sigma_t[g]);
                    let inv = invert_cell(&lhs).ok_or(Error::SingularCell {
                            group: g,
                            direction: a,
                            material: m,
                        })?;
                    factors.push(SweepFactors {
                        src: inv * cell.mass,
                        up_x: inv * cell.coupling[fx as usize] * dir.mu.abs(),
                        up_y: inv * cell.coupling[fy as usize] * dir.eta.abs(),
                    });
                }
            }
        }
        Ok(Self {
            cell,
            n_groups,
            n_materials,
            factors,
        })
    }

    pub fn n_local(&self) -> usize {
        N_LOCAL
    }

    #[inline]
    pub fn factors(&self, direction: usize, group: usize, material: usize) -> &SweepFactors {
        &self.factors[(direction * self.n_groups + group) * self.n_materials + material]
    }
}
