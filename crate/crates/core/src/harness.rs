//! Workflows behind the command-line tool: full-order runs, training,
//! evaluation against full-order ground truth, and the three-way comparison.
//!
//! Timing rules: setup (mesh, quadrature, factorizations, library load) is never
//! timed. FOM time is the GMRES solve including its right-hand side; ROM time is
//! interpolation + reduced solve + reconstruction. Each figure is the median of
//! `reps` repetitions.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::field::{relative_l2_error, MomentField};
use crate::fieldio::{pointwise_relative_error, FieldFile, FieldKind};
use crate::krylov::GmresOptions;
use crate::library::{build_library, LibraryOptions, OfflineStats, RomLibrary};
use crate::reduced::{assemble_reduced, rom_solve};
use crate::transport::{solve_fom, BalanceReport, FomSolution, TransportProblem};

pub const REPORT_COLUMNS: [&str; 9] = [
    "point_index",
    "theta1",
    "theta2",
    "rel_l2_error",
    "fom_time_s",
    "rom_time_s",
    "speedup",
    "fom_sweeps",
    "rom_sweeps",
];

/// Run `f` `reps` times (at least once) and return the last result with the median wall time.
pub fn median_time<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut times = Vec::with_capacity(reps.max(1));
    let mut out = None;
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        let v = f()?;
        times.push(t.elapsed().as_secs_f64());
        out = Some(v);
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let med = if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    };
    Ok((out.expect("at least one repetition"), med))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("report csv: {e}"))
}

fn warn_extrapolation(t1: f64, t2: f64) {
    for w in crate::config::extrapolation_warnings(t1, t2) {
        log::warn!("{w}");
    }
}

#[derive(Debug, Clone)]
pub struct FomRun {
    pub param: (f64, f64),
    pub solution: FomSolution,
    pub balance: BalanceReport,
    pub time_s: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Full-order solve at one point. Non-convergence is an error.
pub fn run_fom(config: &ProblemConfig, param: (f64, f64), reps: usize) -> Result<FomRun> {
    warn_extrapolation(param.0, param.1);
    let problem = TransportProblem::from_config(&config.with_params(param.0, param.1))?;
    let opts = GmresOptions::from(&config.gmres);
    let (solution, time_s) = median_time(reps, || solve_fom(&problem, &opts))?;
    if !solution.report.converged {
        return Err(Error::NotConverged {
            theta1: param.0,
            theta2: param.1,
            residual: solution.report.relative_residual,
        });
    }
    let balance = problem.particle_balance(&solution.phi)?;
    Ok(FomRun {
        param,
        solution,
        balance,
        time_s,
        nx: problem.mesh().nx,
        ny: problem.mesh().ny,
    })
}

/// Offline phase with a log of the spectrum and cost.
pub fn train(
    config: &ProblemConfig,
    params: &[(f64, f64)],
    options: &LibraryOptions,
) -> Result<(RomLibrary, OfflineStats)> {
    let (lib, stats) = build_library(params, config, options)?;
    log::info!(
        "trained on {} snapshots: rank {}, retained information {:.12}",
        stats.n_snapshots,
        stats.rank,
        stats.information
    );
    log::info!("singular values: {:?}", stats.singular_values);
    log::info!(
        "offline sweeps: {} (FOM) + {} (assembly) = {}",
        stats.fom_sweeps,
        stats.assembly_sweeps,
        stats.total_sweeps()
    );
    Ok((lib, stats))
}

/// One CSV row; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub point_index: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub rel_l2_error: f64,
    pub fom_time_s: f64,
    pub rom_time_s: f64,
    pub speedup: f64,
    pub fom_sweeps: usize,
    pub rom_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub fingerprint: String,
}

impl EvalReport {
    fn mean(&self, f: impl Fn(&EvalRow) -> f64) -> f64 {
        self.rows.iter().map(f).sum::<f64>() / self.rows.len() as f64
    }

    pub fn mean_error(&self) -> f64 {
        self.mean(|r| r.rel_l2_error)
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_l2_error).fold(0.0, f64::max)
    }

    pub fn mean_speedup(&self) -> f64 {
        self.mean(|r| r.speedup)
    }

    pub fn mean_fom_sweeps(&self) -> f64 {
        self.mean(|r| r.fom_sweeps as f64)
    }

    pub fn mean_rom_sweeps(&self) -> f64 {
        self.mean(|r| r.rom_sweeps as f64)
    }

    /// Rows in `REPORT_COLUMNS` order, then a `mean` row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r).map_err(csv_error)?;
        }
        let mean = [
            "mean".to_string(),
            self.mean(|r| r.theta1).to_string(),
            self.mean(|r| r.theta2).to_string(),
            self.mean_error().to_string(),
            self.mean(|r| r.fom_time_s).to_string(),
            self.mean(|r| r.rom_time_s).to_string(),
            self.mean_speedup().to_string(),
            self.mean_fom_sweeps().to_string(),
            self.mean_rom_sweeps().to_string(),
        ];
        out.write_record(&mean).map_err(csv_error)?;
        out.flush()?;
        Ok(())
    }

    /// Parse per-point rows back, skipping the `mean` row.
    pub fn read_csv(text: &str, fingerprint: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(csv_error)?.clone();
        if header.iter().ne(REPORT_COLUMNS) {
            return Err(Error::Format(format!("unexpected report header {header:?}")));
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            if record.get(0) == Some("mean") {
                continue;
            }
            rows.push(record.deserialize(Some(&header)).map_err(csv_error)?);
        }
        if rows.is_empty() {
            return Err(Error::Format("report has no rows".into()));
        }
        Ok(Self {
            rows,
            fingerprint: fingerprint.to_string(),
        })
    }

    pub fn summary(&self) -> String {
        format!(
            "points: {}\nmean_rel_l2_error: {:e}\nmax_rel_l2_error: {:e}\nmean_speedup: {:.3}\n\
             mean_fom_sweeps: {}\nmean_rom_sweeps: {}\nconfig_fingerprint: {}\nthreads: {}\n",
            self.rows.len(),
            self.mean_error(),
            self.max_error(),
            self.mean_speedup(),
            self.mean_fom_sweeps(),
            self.mean_rom_sweeps(),
            self.fingerprint,
            rayon::current_num_threads()
        )
    }
}

/// FOM, ROM and pointwise-error fields at one evaluation point.
#[derive(Debug, Clone)]
pub struct PointFields {
    pub fom: FieldFile,
    pub rom: FieldFile,
    pub error: FieldFile,
}

impl PointFields {
    fn new(nx: usize, ny: usize, fom: MomentField, rom: MomentField) -> Result<Self> {
        let err = pointwise_relative_error(&rom, &fom)?;
        Ok(Self {
            fom: FieldFile::new(nx, ny, FieldKind::Fom, fom)?,
            rom: FieldFile::new(nx, ny, FieldKind::Rom, rom)?,
            error: FieldFile::new(nx, ny, FieldKind::RelativeError, err)?,
        })
    }

    /// `point_NNN_{fom,rom,relerr}.snf`, plus `.csv` exports when asked.
    pub fn write(&self, dir: &Path, index: usize, csv: bool) -> Result<()> {
        for f in [&self.fom, &self.rom, &self.error] {
            let stem = format!("point_{index:03}_{}", f.kind.tag());
            f.save(&dir.join(format!("{stem}.snf")))?;
            if csv {
                let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.csv")))?);
                f.write_csv(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }
}

/// Compare the online ROM with FOM ground truth at every test point.
///
/// Points run one after another so timings do not compete for cores.
pub fn evaluate(
    lib: &RomLibrary,
    config: &ProblemConfig,
    test_params: &[(f64, f64)],
    reps: usize,
) -> Result<(EvalReport, Vec<PointFields>)> {
    if test_params.is_empty() {
        return Err(Error::Invalid("empty test set".into()));
    }
    let mut rows = Vec::with_capacity(test_params.len());
    let mut fields = Vec::with_capacity(test_params.len());
    for (i, &q) in test_params.iter().enumerate() {
        let fom = run_fom(config, q, reps)?;
        let (rom, rom_time) = median_time(reps, || lib.online_solve(q))?;
        let err = relative_l2_error(rom.field.values(), fom.solution.phi.values());
        log::info!("point {i} ({}, {}): error {err:.3e}, fom {:.3e}s, rom {rom_time:.3e}s", q.0, q.1, fom.time_s);
        rows.push(EvalRow {
            point_index: i,
            theta1: q.0,
            theta2: q.1,
            rel_l2_error: err,
            fom_time_s: fom.time_s,
            rom_time_s: rom_time,
            speedup: fom.time_s / rom_time.max(f64::MIN_POSITIVE),
            fom_sweeps: fom.solution.sweeps,
            rom_sweeps: 0,
        });
        fields.push(PointFields::new(fom.nx, fom.ny, fom.solution.phi, rom.field)?);
    }
    Ok((
        EvalReport {
            rows,
            fingerprint: config.fingerprint_hex(),
        },
        fields,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub param: (f64, f64),
    pub fom_time_s: f64,
    pub mi_time_s: f64,
    pub interp_time_s: f64,
    pub fom_sweeps: usize,
    pub mi_sweeps: usize,
    pub interp_sweeps: usize,
    pub mi_error: f64,
    pub interp_error: f64,
    pub fom_self_error: f64,
}

impl std::fmt::Display for CompareReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "point: theta1={} theta2={}", self.param.0, self.param.1)?;
        writeln!(f, "{:<22} {:>12} {:>8} {:>12}", "method", "time_s", "sweeps", "rel_l2_error")?;
        writeln!(f, "{:<22} {:>12.4e} {:>8} {:>12.4e}", "fom", self.fom_time_s, self.fom_sweeps, self.fom_self_error)?;
        writeln!(f, "{:<22} {:>12.4e} {:>8} {:>12.4e}", "minimally-invasive", self.mi_time_s, self.mi_sweeps, self.mi_error)?;
        write!(f, "{:<22} {:>12.4e} {:>8} {:>12.4e}", "interpolated", self.interp_time_s, self.interp_sweeps, self.interp_error)
    }
}

/// FOM vs. per-query projection (r+1 online sweeps) vs. library interpolation.
pub fn compare(lib: &RomLibrary, config: &ProblemConfig, q: (f64, f64), reps: usize) -> Result<CompareReport> {
    let fom = run_fom(config, q, reps)?;
    let problem = TransportProblem::from_config(&config.with_params(q.0, q.1))?;
    let (mi, mi_time) = median_time(reps, || {
        let sys = assemble_reduced(&lib.basis, q, lib.projection, &problem)?;
        let sol = rom_solve(&sys, &lib.basis, lib.layout)?;
        Ok((sol, sys.sweeps))
    })?;
    let (interp, interp_time) = median_time(reps, || lib.online_solve(q))?;
    let truth = fom.solution.phi.values();
    Ok(CompareReport {
        param: q,
        fom_time_s: fom.time_s,
        mi_time_s: mi_time,
        interp_time_s: interp_time,
        fom_sweeps: fom.solution.sweeps,
        mi_sweeps: mi.1,
        interp_sweeps: 0,
        mi_error: relative_l2_error(mi.0.field.values(), truth),
        interp_error: relative_l2_error(interp.field.values(), truth),
        fom_self_error: relative_l2_error(truth, truth),
    })
}
