//! The offline library of reduced systems and its online interpolation.
//!
//! All systems share one global POD basis, so their reduced matrices live in
//! the same coordinates and can be interpolated entry by entry (in the tangent
//! space for SPD matrices).
//!
//! File layout (little-endian): magic `SNROMLIB`, `u32` version, 32-byte config
//! fingerprint, projection and manifold tags (`u8` each), field layout (3 x `u64`),
//! rank, singular values, modes (column-major), retained information, then per
//! training point its parameters, sweep count, `A_r`, `b_r` and tangent matrix,
//! and finally the normalization box, RBF shape and ridge.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{hex_string, ProblemConfig};
use crate::error::{Error, Result};
use crate::field::FieldLayout;
use crate::interp::{spd_exp, spd_log, weighted_sum, GaussianRbf, ParamBox, DEFAULT_RIDGE};
use crate::pod::{collect_snapshots, pod_basis, ReducedBasis, Truncation};
use crate::reduced::{assemble_reduced, rom_solve, Projection, ReducedSystem, RomSolution};
use crate::transport::TransportProblem;

const MAGIC: &[u8; 8] = b"SNROMLIB";
const VERSION: u32 = 1;

/// How reduced matrices are mapped before RBF weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldScheme {
    /// `exp(sum w_i log A_i)`, SPD-preserving.
    LogEuclidean,
    /// Plain weighted sum, used when some `A_i` is not SPD.
    Entrywise,
}

impl ManifoldScheme {
    fn tag(self) -> u8 {
        match self {
            ManifoldScheme::LogEuclidean => 0,
            ManifoldScheme::Entrywise => 1,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(ManifoldScheme::LogEuclidean),
            1 => Ok(ManifoldScheme::Entrywise),
            t => Err(Error::Format(format!("unknown manifold tag {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LibraryOptions {
    pub truncation: Truncation,
    pub projection: Projection,
    /// RBF shape; `None` means `1 / mean pairwise distance`.
    pub eps: Option<f64>,
    pub ridge: f64,
}

impl Default for LibraryOptions {
    fn default() -> Self {
        Self {
            truncation: Truncation::Rank(5),
            projection: Projection::PetrovGalerkin,
            eps: None,
            ridge: DEFAULT_RIDGE,
        }
    }
}

/// Cost and spectrum record of an offline build.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineStats {
    pub n_snapshots: usize,
    pub rank: usize,
    pub information: f64,
    pub singular_values: Vec<f64>,
    pub fom_sweeps: usize,
    pub assembly_sweeps: usize,
}

impl OfflineStats {
    pub fn total_sweeps(&self) -> usize {
        self.fom_sweeps + self.assembly_sweeps
    }
}

#[derive(Debug, Clone)]
pub struct RomLibrary {
    pub basis: ReducedBasis,
    pub layout: FieldLayout,
    pub systems: Vec<ReducedSystem>,
    /// Precomputed per-system matrices that get RBF-weighted online.
    pub tangents: Vec<DMatrix<f64>>,
    pub bounds: ParamBox,
    pub scheme: ManifoldScheme,
    pub projection: Projection,
    pub fingerprint: [u8; 32],
    rbf: GaussianRbf,
}

/// Snapshots, a global basis, and one reduced system per training point.
pub fn build_library(
    train_params: &[(f64, f64)],
    config: &ProblemConfig,
    options: &LibraryOptions,
) -> Result<(RomLibrary, OfflineStats)> {
    if train_params.len() < 2 {
        return Err(Error::Invalid("a library needs at least two training points".into()));
    }
    check_distinct(train_params, &ParamBox::bounding(train_params)?)?;
    if let Truncation::Rank(r) = options.truncation {
        if r > train_params.len() {
            return Err(Error::RankTooLarge {
                rank: r,
                columns: train_params.len(),
            });
        }
    }
    let snapshots = collect_snapshots(train_params, config)?;
    let basis = pod_basis(&snapshots, options.truncation)?;
    let systems: Vec<ReducedSystem> = train_params
        .par_iter()
        .map(|&(t1, t2)| {
            let problem = TransportProblem::from_config(&config.with_params(t1, t2))?;
            assemble_reduced(&basis, (t1, t2), options.projection, &problem)
        })
        .collect::<Result<_>>()?;
    let stats = OfflineStats {
        n_snapshots: snapshots.len(),
        rank: basis.rank,
        information: basis.information,
        singular_values: basis.singular_values.clone(),
        fom_sweeps: snapshots.sweeps,
        assembly_sweeps: systems.iter().map(|s| s.sweeps).sum(),
    };
    let lib = RomLibrary::from_systems(
        basis,
        snapshots.layout,
        systems,
        config.fingerprint(),
        options.eps,
        options.ridge,
    )?;
    Ok((lib, stats))
}

fn check_distinct(params: &[(f64, f64)], bounds: &ParamBox) -> Result<()> {
    let norm: Vec<[f64; 2]> = params.iter().map(|&p| bounds.normalize(p)).collect();
    for i in 0..norm.len() {
        for j in i + 1..norm.len() {
            if (norm[i][0] - norm[j][0]).hypot(norm[i][1] - norm[j][1]) <= 1e-12 {
                return Err(Error::Invalid(format!(
                    "training points {i} and {j} coincide at ({}, {})",
                    params[i].0, params[i].1
                )));
            }
        }
    }
    Ok(())
}

impl RomLibrary {
    pub fn from_systems(
        basis: ReducedBasis,
        layout: FieldLayout,
        systems: Vec<ReducedSystem>,
        fingerprint: [u8; 32],
        eps: Option<f64>,
        ridge: f64,
    ) -> Result<Self> {
        if systems.len() < 2 {
            return Err(Error::Invalid("a library needs at least two systems".into()));
        }
        let projection = systems[0].projection;
        for (i, s) in systems.iter().enumerate() {
            if s.rank() != basis.rank || s.a.shape() != (basis.rank, basis.rank) {
                return Err(Error::Invalid(format!("system {i} does not match basis rank {}", basis.rank)));
            }
            if s.projection != projection {
                return Err(Error::Invalid("systems mix projections".into()));
            }
        }
        let params: Vec<(f64, f64)> = systems.iter().map(|s| s.param).collect();
        let bounds = ParamBox::bounding(&params)?;
        check_distinct(&params, &bounds)?;

        let scheme = if projection == Projection::PetrovGalerkin && systems.iter().all(|s| s.is_spd()) {
            ManifoldScheme::LogEuclidean
        } else {
            if projection == Projection::PetrovGalerkin {
                log::warn!("library holds a non-SPD system; interpolating reduced matrices entrywise");
            }
            ManifoldScheme::Entrywise
        };
        let tangents = match scheme {
            ManifoldScheme::LogEuclidean => systems.iter().map(|s| spd_log(&s.a)).collect::<Result<_>>()?,
            ManifoldScheme::Entrywise => systems.iter().map(|s| s.a.clone()).collect(),
        };
        let centers: Vec<[f64; 2]> = params.iter().map(|&p| bounds.normalize(p)).collect();
        let eps = match eps {
            Some(e) => e,
            None => GaussianRbf::default_shape(&centers)?,
        };
        let rbf = GaussianRbf::new(centers, eps, ridge)?;
        Ok(Self {
            basis,
            layout,
            systems,
            tangents,
            bounds,
            scheme,
            projection,
            fingerprint,
            rbf,
        })
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.basis.rank
    }

    pub fn train_params(&self) -> Vec<(f64, f64)> {
        self.systems.iter().map(|s| s.param).collect()
    }

    pub fn rbf(&self) -> &GaussianRbf {
        &self.rbf
    }

    pub fn fingerprint_hex(&self) -> String {
        hex_string(&self.fingerprint)
    }

    /// Reduced system at a new parameter point; no sweeps.
    pub fn interpolate_system(&self, query: (f64, f64)) -> Result<ReducedSystem> {
        if !query.0.is_finite() || !query.1.is_finite() {
            return Err(Error::Invalid("query parameters must be finite".into()));
        }
        if !self.bounds.contains(query) {
            log::warn!(
                "query ({}, {}) lies outside the training box; extrapolating",
                query.0,
                query.1
            );
        }
        let w = self.rbf.cardinal_weights(self.bounds.normalize(query));
        let mixed = weighted_sum(&w, &self.tangents);
        let a = match self.scheme {
            ManifoldScheme::LogEuclidean => spd_exp(&mixed),
            ManifoldScheme::Entrywise => mixed,
        };
        let mut b = DVector::zeros(self.rank());
        for (wi, s) in w.iter().zip(&self.systems) {
            b.axpy(*wi, &s.b, 1.0);
        }
        Ok(ReducedSystem {
            a,
            b,
            param: query,
            projection: self.projection,
            sweeps: 0,
        })
    }

    /// Interpolate, solve, reconstruct.
    pub fn online_solve(&self, query: (f64, f64)) -> Result<RomSolution> {
        let sys = self.interpolate_system(query)?;
        rom_solve(&sys, &self.basis, self.layout)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        w.write_all(&self.fingerprint)?;
        w.write_u8(self.projection.tag())?;
        w.write_u8(self.scheme.tag())?;
        for v in [self.layout.n_groups, self.layout.n_cells, self.layout.n_local, self.rank()] {
            w.write_u64::<LE>(v as u64)?;
        }
        w.write_u64::<LE>(self.basis.singular_values.len() as u64)?;
        write_f64s(w, &self.basis.singular_values)?;
        write_f64s(w, self.basis.modes.as_slice())?;
        w.write_f64::<LE>(self.basis.information)?;
        w.write_u64::<LE>(self.systems.len() as u64)?;
        for (s, t) in self.systems.iter().zip(&self.tangents) {
            w.write_f64::<LE>(s.param.0)?;
            w.write_f64::<LE>(s.param.1)?;
            w.write_u64::<LE>(s.sweeps as u64)?;
            write_f64s(w, s.a.as_slice())?;
            write_f64s(w, s.b.as_slice())?;
            write_f64s(w, t.as_slice())?;
        }
        write_f64s(w, &[self.bounds.lo[0], self.bounds.lo[1], self.bounds.hi[0], self.bounds.hi[1]])?;
        w.write_f64::<LE>(self.rbf.eps())?;
        w.write_f64::<LE>(self.rbf.ridge())?;
        Ok(())
    }

    /// Load and check the stored fingerprint against `config`.
    pub fn load(path: &Path, config: &ProblemConfig) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let lib = Self::read_from(&mut f)?;
        let expected = config.fingerprint();
        if lib.fingerprint != expected {
            return Err(Error::Fingerprint {
                expected: hex_string(&expected),
                found: lib.fingerprint_hex(),
            });
        }
        Ok(lib)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(format!("truncated library file: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a library file (bad magic)".into()));
        }
        let version = r.read_u32::<LE>().map_err(fmt)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported library version {version}")));
        }
        let mut fingerprint = [0u8; 32];
        r.read_exact(&mut fingerprint).map_err(fmt)?;
        let projection = Projection::from_tag(r.read_u8().map_err(fmt)?)?;
        let scheme = ManifoldScheme::from_tag(r.read_u8().map_err(fmt)?)?;
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = read_len(r)?;
        }
        let layout = FieldLayout {
            n_groups: dims[0],
            n_cells: dims[1],
            n_local: dims[2],
        };
        let rank = dims[3];
        let n_sv = read_len(r)?;
        let singular_values = read_f64s(r, n_sv)?;
        let n = layout.len();
        let modes = DMatrix::from_vec(n, rank, read_f64s(r, n * rank)?);
        let information = r.read_f64::<LE>().map_err(fmt)?;
        let n_train = read_len(r)?;
        let mut systems = Vec::with_capacity(n_train);
        let mut tangents = Vec::with_capacity(n_train);
        for _ in 0..n_train {
            let t1 = r.read_f64::<LE>().map_err(fmt)?;
            let t2 = r.read_f64::<LE>().map_err(fmt)?;
            let sweeps = read_len(r)?;
            let a = DMatrix::from_vec(rank, rank, read_f64s(r, rank * rank)?);
            let b = DVector::from_vec(read_f64s(r, rank)?);
            tangents.push(DMatrix::from_vec(rank, rank, read_f64s(r, rank * rank)?));
            systems.push(ReducedSystem {
                a,
                b,
                param: (t1, t2),
                projection,
                sweeps,
            });
        }
        let bx = read_f64s(r, 4)?;
        let bounds = ParamBox {
            lo: [bx[0], bx[1]],
            hi: [bx[2], bx[3]],
        };
        let eps = r.read_f64::<LE>().map_err(fmt)?;
        let ridge = r.read_f64::<LE>().map_err(fmt)?;
        let centers = systems.iter().map(|s| bounds.normalize(s.param)).collect();
        let rbf = GaussianRbf::new(centers, eps, ridge)?;
        Ok(Self {
            basis: ReducedBasis {
                modes,
                singular_values,
                rank,
                information,
            },
            layout,
            systems,
            tangents,
            bounds,
            scheme,
            projection,
            fingerprint,
            rbf,
        })
    }
}

// guards against absurd lengths from corrupt files
const MAX_LEN: u64 = 1 << 32;

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = r
        .read_u64::<LE>()
        .map_err(|e| Error::Format(format!("truncated library file: {e}")))?;
    if v > MAX_LEN {
        return Err(Error::Format(format!("implausible length {v}")));
    }
    Ok(v as usize)
}

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    for x in v {
        w.write_f64::<LE>(*x)?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LE>(&mut out)
        .map_err(|e| Error::Format(format!("truncated library file: {e}")))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_basis(r: usize) -> ReducedBasis {
        let mut modes = DMatrix::zeros(4, r);
        for j in 0..r {
            modes[(j, j)] = 1.0;
        }
        ReducedBasis {
            modes,
            singular_values: vec![1.0; r],
            rank: r,
            information: 1.0,
        }
    }

    fn layout() -> FieldLayout {
        FieldLayout {
            n_groups: 1,
            n_cells: 1,
            n_local: 4,
        }
    }

    fn system(a: DMatrix<f64>, b: Vec<f64>, param: (f64, f64)) -> ReducedSystem {
        ReducedSystem {
            a,
            b: DVector::from_vec(b),
            param,
            projection: Projection::PetrovGalerkin,
            sweeps: 3,
        }
    }

    #[test]
    fn geometric_mean_of_identity_and_four() {
        let i = DMatrix::<f64>::identity(2, 2);
        let lib = RomLibrary::from_systems(
            tiny_basis(2),
            layout(),
            vec![
                system(i.clone(), vec![1.0, 0.0], (8.0, 0.6)),
                system(i.clone() * 4.0, vec![3.0, 2.0], (12.0, 0.9)),
            ],
            [0; 32],
            None,
            DEFAULT_RIDGE,
        )
        .unwrap();
        assert_eq!(lib.scheme, ManifoldScheme::LogEuclidean);
        let mid = lib.interpolate_system((10.0, 0.75)).unwrap();
        assert!((&mid.a - i * 2.0).abs().max() < 1e-10);
        assert!((mid.b[0] - 2.0).abs() < 1e-10 && (mid.b[1] - 1.0).abs() < 1e-10);
        assert_eq!(mid.sweeps, 0);
    }

    #[test]
    fn identical_systems_give_constant_interpolant() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let systems = [(8.0, 0.6), (12.0, 0.6), (10.0, 0.95), (9.0, 0.8)]
            .iter()
            .map(|&p| system(a.clone(), vec![1.0, -1.0], p))
            .collect();
        let lib = RomLibrary::from_systems(tiny_basis(2), layout(), systems, [0; 32], None, DEFAULT_RIDGE).unwrap();
        for q in [(8.5, 0.7), (11.9, 0.61), (10.0, 0.9)] {
            let s = lib.interpolate_system(q).unwrap();
            assert!((&s.a - &a).abs().max() < 1e-10);
            assert!((s.b[0] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_training_points_rejected() {
        let i = DMatrix::<f64>::identity(1, 1);
        let err = RomLibrary::from_systems(
            tiny_basis(1),
            layout(),
            vec![system(i.clone(), vec![1.0], (9.0, 0.7)), system(i, vec![1.0], (9.0, 0.7))],
            [0; 32],
            None,
            DEFAULT_RIDGE,
        );
        assert!(err.is_err());
    }

    #[test]
    fn galerkin_library_interpolates_entrywise() {
        let mut s0 = system(DMatrix::from_row_slice(1, 1, &[-1.0]), vec![1.0], (8.0, 0.6));
        let mut s1 = system(DMatrix::from_row_slice(1, 1, &[3.0]), vec![1.0], (12.0, 0.9));
        s0.projection = Projection::Galerkin;
        s1.projection = Projection::Galerkin;
        let lib = RomLibrary::from_systems(tiny_basis(1), layout(), vec![s0, s1], [0; 32], None, DEFAULT_RIDGE).unwrap();
        assert_eq!(lib.scheme, ManifoldScheme::Entrywise);
        let mid = lib.interpolate_system((10.0, 0.75)).unwrap();
        assert!((mid.a[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bytes_round_trip_and_bad_magic() {
        let i = DMatrix::<f64>::identity(2, 2);
        let lib = RomLibrary::from_systems(
            tiny_basis(2),
            layout(),
            vec![
                system(i.clone(), vec![1.0, 0.0], (8.0, 0.6)),
                system(i * 3.0, vec![3.0, 2.0], (12.0, 0.9)),
            ],
            [7; 32],
            Some(1.5),
            DEFAULT_RIDGE,
        )
        .unwrap();
        let mut bytes = Vec::new();
        lib.write_to(&mut bytes).unwrap();
        let back = RomLibrary::read_from(&mut bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(bytes, again);
        assert_eq!(back.systems, lib.systems);
        bytes[0] = b'X';
        assert!(matches!(RomLibrary::read_from(&mut bytes.as_slice()), Err(Error::Format(_))));
        assert!(RomLibrary::read_from(&mut &again[..40]).is_err());
    }
}
