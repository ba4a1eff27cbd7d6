//! Matrix-free transport operators: sweeps (`L^-1`), moment maps (`D`, `M S`),
//! the GMRES operator `I - D L^-1 M S`, its right-hand side, and particle balance.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::Vector4;

use crate::config::ProblemConfig;
use crate::dg::{CellMatrices, DiscretizationScheme, Face, N_LOCAL};
use crate::error::{Error, Result};
use crate::field::{AngularFlux, FieldLayout, MomentField};
use crate::krylov::LinearOperator;
use crate::mesh::{build_mesh, Mesh};
use crate::quadrature::{build_quadrature, Quadrature};
use crate::xs::CrossSections;

const INV_FOUR_PI: f64 = 1.0 / (4.0 * PI);

/// Terms of the global particle balance for a scalar-flux solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    pub source: f64,
    pub absorption: f64,
    pub leakage: f64,
    /// `|source - absorption - leakage| / source`.
    pub residual: f64,
}

/// One discretized transport problem at a fixed parameter point.
#[derive(Debug)]
pub struct TransportProblem {
    mesh: Mesh,
    quad: Quadrature,
    xs: CrossSections,
    scheme: DiscretizationScheme,
    layout: FieldLayout,
    sweeps: AtomicUsize,
    peak_angular_storage: AtomicUsize,
}

impl TransportProblem {
    pub fn new(mesh: Mesh, quad: Quadrature, xs: CrossSections) -> Result<Self> {
        if let Some(c) = (0..mesh.n_cells()).find(|&c| mesh.material(c) >= xs.n_materials()) {
            return Err(Error::Mesh(format!(
                "cell {c} uses material {} but only {} are defined",
                mesh.material(c),
                xs.n_materials()
            )));
        }
        let scheme = DiscretizationScheme::new(mesh.cell_width, mesh.cell_height, &quad, &xs)?;
        let layout = FieldLayout {
            n_groups: xs.n_groups,
            n_cells: mesh.n_cells(),
            n_local: N_LOCAL,
        };
        Ok(Self {
            mesh,
            quad,
            xs,
            scheme,
            layout,
            sweeps: AtomicUsize::new(0),
            peak_angular_storage: AtomicUsize::new(0),
        })
    }

    pub fn from_config(config: &ProblemConfig) -> Result<Self> {
        config.validate()?;
        let mesh = build_mesh(config)?;
        let quad = build_quadrature(config.quadrature.n_polar, config.quadrature.n_azimuthal)?;
        let xs = CrossSections::from_config(config)?;
        Self::new(mesh, quad, xs)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    pub fn cross_sections(&self) -> &CrossSections {
        &self.xs
    }

    pub fn cell_matrices(&self) -> &CellMatrices {
        &self.scheme.cell
    }

    pub fn layout(&self) -> FieldLayout {
        self.layout
    }

    /// Number of full sweeps performed so far.
    pub fn sweep_count(&self) -> usize {
        self.sweeps.load(Ordering::Relaxed)
    }

    /// Largest angular-flux buffer (in f64 entries) held by the production sweep path.
    pub fn peak_angular_storage(&self) -> usize {
        self.peak_angular_storage.load(Ordering::Relaxed)
    }

    /// Invert `L` for one (group, direction) pair, writing into `psi` and
    /// returning the weighted-free outflow through the domain boundary.
    fn sweep_direction(&self, g: usize, a: usize, q: &[f64], psi: &mut [f64]) -> f64 {
        let mesh = &self.mesh;
        let (nx, ny) = (mesh.nx, mesh.ny);
        let dir = self.quad.directions()[a];
        let forward_x = dir.mu > 0.0;
        let forward_y = dir.eta > 0.0;
        for jj in 0..ny {
            let j = if forward_y { jj } else { ny - 1 - jj };
            for ii in 0..nx {
                let i = if forward_x { ii } else { nx - 1 - ii };
                let c = mesh.cell(i, j);
                let f = self.scheme.factors(a, g, mesh.material(c));
                let qc = Vector4::from_column_slice(&q[c * N_LOCAL..(c + 1) * N_LOCAL]);
                let mut out = f.src * qc;
                let up_i = if forward_x { i.checked_sub(1) } else { Some(i + 1).filter(|&v| v < nx) };
                if let Some(ui) = up_i {
                    let u = mesh.cell(ui, j);
                    out += f.up_x * Vector4::from_column_slice(&psi[u * N_LOCAL..(u + 1) * N_LOCAL]);
                }
                let up_j = if forward_y { j.checked_sub(1) } else { Some(j + 1).filter(|&v| v < ny) };
                if let Some(uj) = up_j {
                    let u = mesh.cell(i, uj);
                    out += f.up_y * Vector4::from_column_slice(&psi[u * N_LOCAL..(u + 1) * N_LOCAL]);
                }
                psi[c * N_LOCAL..(c + 1) * N_LOCAL].copy_from_slice(out.as_slice());
            }
        }
        self.outflow(a, psi)
    }

    /// `sum over outflow boundary faces of |Omega.n| int psi`, for one direction.
    fn outflow(&self, a: usize, psi: &[f64]) -> f64 {
        let mesh = &self.mesh;
        let cell = &self.scheme.cell;
        let dir = self.quad.directions()[a];
        let (x_face, i_edge) = if dir.mu > 0.0 { (Face::Right, mesh.nx - 1) } else { (Face::Left, 0) };
        let (y_face, j_edge) = if dir.eta > 0.0 { (Face::Top, mesh.ny - 1) } else { (Face::Bottom, 0) };
        let wx = cell.face_integrals(x_face);
        let wy = cell.face_integrals(y_face);
        let local = |c: usize, w: &[f64; N_LOCAL]| -> f64 {
            (0..N_LOCAL).map(|k| w[k] * psi[c * N_LOCAL + k]).sum()
        };
        let x_out: f64 = (0..mesh.ny).map(|j| local(mesh.cell(i_edge, j), &wx)).sum();
        let y_out: f64 = (0..mesh.nx).map(|i| local(mesh.cell(i, j_edge), &wy)).sum();
        dir.mu.abs() * x_out + dir.eta.abs() * y_out
    }

    /// `L^-1 q` for a general angular source, materializing every direction.
    pub fn sweep_apply_linv(&self, q: &AngularFlux) -> Result<AngularFlux> {
        self.check_angular(q)?;
        let mut psi = AngularFlux::zeros(self.layout, self.quad.len());
        for g in 0..self.layout.n_groups {
            for a in 0..self.quad.len() {
                self.sweep_direction(g, a, q.slice(g, a), psi.slice_mut(g, a));
            }
        }
        self.sweeps.fetch_add(1, Ordering::Relaxed);
        Ok(psi)
    }

    /// `phi = D psi`: quadrature-weighted sum over directions.
    pub fn apply_d(&self, psi: &AngularFlux) -> Result<MomentField> {
        self.check_angular(psi)?;
        let mut phi = MomentField::zeros(self.layout);
        for g in 0..self.layout.n_groups {
            let n = self.layout.group_len();
            let out = &mut phi.values_mut()[g * n..(g + 1) * n];
            for (a, dir) in self.quad.directions().iter().enumerate() {
                for (o, p) in out.iter_mut().zip(psi.slice(g, a)) {
                    *o += dir.weight * p;
                }
            }
        }
        Ok(phi)
    }

    /// Isotropic scattering source `(1/4pi) sum_g' sigma_s[g'][g] phi_g'` per group, moment-shaped.
    pub fn scattering_source(&self, phi: &MomentField) -> Result<MomentField> {
        self.check_moment(phi)?;
        let l = self.layout;
        let mut q = MomentField::zeros(l);
        let out = q.values_mut();
        for c in 0..l.n_cells {
            let m = self.xs.material(self.mesh.material(c));
            for g in 0..l.n_groups {
                for gp in 0..l.n_groups {
                    let s = m.sigma_s[gp][g];
                    if s == 0.0 {
                        continue;
                    }
                    for k in 0..N_LOCAL {
                        out[l.index(g, c, k)] += INV_FOUR_PI * s * phi.values()[l.index(gp, c, k)];
                    }
                }
            }
        }
        Ok(q)
    }

    /// `M S phi` expanded over every direction.
    pub fn apply_ms(&self, phi: &MomentField) -> Result<AngularFlux> {
        let iso = self.scattering_source(phi)?;
        Ok(self.expand_isotropic(&iso))
    }

    /// Isotropic external source `Q_e / 4pi`, moment-shaped.
    pub fn external_source(&self) -> MomentField {
        let l = self.layout;
        let mut q = MomentField::zeros(l);
        let out = q.values_mut();
        for c in 0..l.n_cells {
            let m = self.xs.material(self.mesh.material(c));
            for g in 0..l.n_groups {
                for k in 0..N_LOCAL {
                    out[l.index(g, c, k)] = INV_FOUR_PI * m.q_ext[g];
                }
            }
        }
        q
    }

    /// `M Q_e` expanded over every direction.
    pub fn external_source_angular(&self) -> AngularFlux {
        self.expand_isotropic(&self.external_source())
    }

    fn expand_isotropic(&self, iso: &MomentField) -> AngularFlux {
        let mut out = AngularFlux::zeros(self.layout, self.quad.len());
        for g in 0..self.layout.n_groups {
            for a in 0..self.quad.len() {
                out.slice_mut(g, a).copy_from_slice(iso.group(g));
            }
        }
        out
    }

    /// `D L^-1` applied to an isotropic source, holding one direction of angular flux at a time.
    /// Returns the scalar flux and the weighted boundary leakage.
    fn sweep_isotropic(&self, q: &MomentField) -> Result<(MomentField, f64)> {
        self.check_moment(q)?;
        let n = self.layout.group_len();
        let mut psi = vec![0.0; n];
        self.peak_angular_storage.fetch_max(psi.len(), Ordering::Relaxed);
        let mut phi = MomentField::zeros(self.layout);
        let mut leakage = 0.0;
        for g in 0..self.layout.n_groups {
            let qg = q.group(g);
            for (a, dir) in self.quad.directions().iter().enumerate() {
                leakage += dir.weight * self.sweep_direction(g, a, qg, &mut psi);
                let out = &mut phi.values_mut()[g * n..(g + 1) * n];
                for (o, p) in out.iter_mut().zip(&psi) {
                    *o += dir.weight * p;
                }
            }
        }
        self.sweeps.fetch_add(1, Ordering::Relaxed);
        Ok((phi, leakage))
    }

    /// `(I - D L^-1 M S) phi`, one sweep.
    pub fn operator_apply(&self, phi: &MomentField) -> Result<MomentField> {
        let q = self.scattering_source(phi)?;
        let (mut out, _) = self.sweep_isotropic(&q)?;
        for (o, p) in out.values_mut().iter_mut().zip(phi.values()) {
            *o = p - *o;
        }
        Ok(out)
    }

    /// `D L^-1 Q_e`, one sweep.
    pub fn compute_rhs(&self) -> Result<MomentField> {
        Ok(self.sweep_isotropic(&self.external_source())?.0)
    }

    /// Global balance of source, absorption and boundary leakage for `phi`.
    ///
    /// Absorption uses `phi` directly; leakage comes from one more sweep driven by
    /// the scattering source of `phi` plus the external source, so the residual
    /// measures how far `phi` is from a fixed point of the transport iteration.
    pub fn particle_balance(&self, phi: &MomentField) -> Result<BalanceReport> {
        let l = self.layout;
        let area = self.mesh.cell_area();
        let node = self.scheme.cell.cell_integral();
        let mut source = 0.0;
        let mut absorption = 0.0;
        for c in 0..l.n_cells {
            let m = self.xs.material(self.mesh.material(c));
            for g in 0..l.n_groups {
                source += m.q_ext[g] * area;
                let integral: f64 = (0..N_LOCAL).map(|k| phi.values()[l.index(g, c, k)]).sum::<f64>() * node;
                absorption += m.sigma_a(g) * integral;
            }
        }
        let mut q = self.scattering_source(phi)?;
        for (qv, e) in q.values_mut().iter_mut().zip(self.external_source().values()) {
            *qv += e;
        }
        let (_, leakage) = self.sweep_isotropic(&q)?;
        let imbalance = (source - absorption - leakage).abs();
        // source-free problems report the absolute imbalance
        let residual = if source == 0.0 { imbalance } else { imbalance / source };
        Ok(BalanceReport {
            source,
            absorption,
            leakage,
            residual,
        })
    }

    fn check_moment(&self, f: &MomentField) -> Result<()> {
        if f.layout() != self.layout {
            return Err(Error::Dimension {
                expected: self.layout.len(),
                got: f.layout().len(),
            });
        }
        Ok(())
    }

    fn check_angular(&self, f: &AngularFlux) -> Result<()> {
        if f.layout() != self.layout || f.n_directions() != self.quad.len() {
            return Err(Error::Dimension {
                expected: self.layout.len() * self.quad.len(),
                got: f.values().len(),
            });
        }
        Ok(())
    }
}

impl LinearOperator for TransportProblem {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let phi = MomentField::from_vec(self.layout, x.to_vec())?;
        let out = self.operator_apply(&phi)?;
        y.copy_from_slice(out.values());
        Ok(())
    }
}

/// Converged (or not) full-order solution with its solver report.
#[derive(Debug, Clone)]
pub struct FomSolution {
    pub phi: MomentField,
    pub report: crate::krylov::GmresReport,
    /// GMRES operator applications plus the right-hand-side sweep.
    pub sweeps: usize,
}

/// Solve `(I - D L^-1 M S) phi = D L^-1 Q_e` with GMRES from a zero guess.
pub fn solve_fom(problem: &TransportProblem, opts: &crate::krylov::GmresOptions) -> Result<FomSolution> {
    let b = problem.compute_rhs()?;
    let (x, report) = crate::krylov::gmres_solve(problem, b.values(), opts)?;
    Ok(FomSolution {
        phi: MomentField::from_vec(problem.layout(), x)?,
        sweeps: report.sweep_count + 1,
        report,
    })
}
