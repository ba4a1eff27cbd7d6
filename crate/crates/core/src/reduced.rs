//! Minimally-invasive assembly of reduced systems and the reduced solve.
//!
//! The full operator is only ever touched through its action: `A U` costs one
//! operator application per mode and `b` one more, so a reduced system costs
//! `r + 1` sweeps.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::field::{MomentField, FieldLayout};
use crate::krylov::LinearOperator;
use crate::pod::ReducedBasis;
use crate::transport::TransportProblem;

/// A full-order model seen only through its operator action and right-hand side.
pub trait FullOrderModel: LinearOperator {
    fn rhs(&self) -> Result<Vec<f64>>;
}

impl FullOrderModel for TransportProblem {
    fn rhs(&self) -> Result<Vec<f64>> {
        Ok(self.compute_rhs()?.into_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Test space `W = U`.
    Galerkin,
    /// Test space `W = A U`; the reduced matrix is the SPD normal matrix.
    PetrovGalerkin,
}

impl Projection {
    pub fn tag(self) -> u8 {
        match self {
            Projection::Galerkin => 0,
            Projection::PetrovGalerkin => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Projection::Galerkin),
            1 => Ok(Projection::PetrovGalerkin),
            t => Err(Error::Format(format!("unknown projection tag {t}"))),
        }
    }
}

impl std::str::FromStr for Projection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "galerkin" | "g" => Ok(Projection::Galerkin),
            "petrov-galerkin" | "petrov_galerkin" | "pg" => Ok(Projection::PetrovGalerkin),
            other => Err(Error::Invalid(format!("unknown projection `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub param: (f64, f64),
    pub projection: Projection,
    /// Operator applications spent assembling this system (zero if interpolated).
    pub sweeps: usize,
}

impl ReducedSystem {
    pub fn rank(&self) -> usize {
        self.b.len()
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.a + self.a.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.min()
    }

    pub fn is_spd(&self) -> bool {
        let asym = (&self.a - self.a.transpose()).abs().max();
        asym <= 1e-12 * self.a.abs().max().max(1.0) && self.min_eigenvalue() > 0.0
    }
}

/// Form `A U` by `r` operator applications and `b` by one more, then project.
pub fn assemble_reduced<M: FullOrderModel + ?Sized>(
    basis: &ReducedBasis,
    param: (f64, f64),
    projection: Projection,
    model: &M,
) -> Result<ReducedSystem> {
    let n = basis.dim();
    if model.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: model.dim(),
        });
    }
    let r = basis.rank;
    let mut au = DMatrix::zeros(n, r);
    let mut col = vec![0.0; n];
    for j in 0..r {
        let mode: Vec<f64> = basis.modes.column(j).iter().copied().collect();
        model.apply(&mode, &mut col)?;
        au.column_mut(j).copy_from_slice(&col);
    }
    let b_full = DVector::from_vec(model.rhs()?);
    if b_full.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b_full.len(),
        });
    }
    let (a, b) = match projection {
        Projection::PetrovGalerkin => {
            let gram = au.tr_mul(&au);
            let a = (&gram + gram.transpose()) * 0.5;
            (a, au.tr_mul(&b_full))
        }
        Projection::Galerkin => (basis.modes.tr_mul(&au), basis.modes.tr_mul(&b_full)),
    };
    if projection == Projection::PetrovGalerkin {
        let eig = SymmetricEigen::new(a.clone()).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > hi * 1e-14) {
            let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            return Err(Error::RankDeficient { condition });
        }
    }
    Ok(ReducedSystem {
        a,
        b,
        param,
        projection,
        sweeps: r + 1,
    })
}

/// Reduced solution: expansion coefficients and the reconstructed field.
#[derive(Debug, Clone, PartialEq)]
pub struct RomSolution {
    pub coefficients: DVector<f64>,
    pub field: MomentField,
}

/// Solve the `r x r` system directly and reconstruct `U c`. No sweeps.
pub fn rom_solve(system: &ReducedSystem, basis: &ReducedBasis, layout: FieldLayout) -> Result<RomSolution> {
    if system.rank() != basis.rank || system.a.nrows() != basis.rank {
        return Err(Error::Dimension {
            expected: basis.rank,
            got: system.rank(),
        });
    }
    let c = system
        .a
        .clone()
        .lu()
        .solve(&system.b)
        .filter(|c| c.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("reduced matrix".into()))?;
    let x = &basis.modes * &c;
    Ok(RomSolution {
        field: MomentField::from_vec(layout, x.as_slice().to_vec())?,
        coefficients: c,
    })
}
