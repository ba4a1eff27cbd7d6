//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Runs as a plain binary (`harness = false`) so the summary is always printed.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snrom::field::relative_l2_error;
use snrom::harness::{compare, evaluate, EvalReport};
use snrom::krylov::{gmres_solve, GmresOptions, LinearOperator};
use snrom::library::{build_library, LibraryOptions, RomLibrary};
use snrom::mesh::Mesh;
use snrom::oracle::{assemble_full_operator, dense_rhs, dense_solve};
use snrom::pod::{collect_snapshots, info_retained, pod_basis, pod_basis_from_columns, ReducedBasis, Truncation};
use snrom::quadrature::build_quadrature;
use snrom::reduced::{assemble_reduced, rom_solve, Projection, ReducedSystem};
use snrom::sampling::{sample, Sampler};
use snrom::xs::{CrossSections, MATERIAL_COUNT};
use snrom::{ProblemConfig, TransportProblem};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Small problem holding every material, including the source.
fn tiny_problem(nx: usize, ny: usize, groups: usize, n_polar: usize, n_az: usize, theta: (f64, f64)) -> TransportProblem {
    let map: Vec<usize> = (0..nx * ny).map(|c| [2, 1, 0][c % 3]).collect();
    let mesh = Mesh::new(nx, ny, 0.5, 0.4, map, MATERIAL_COUNT).unwrap();
    let quad = build_quadrature(n_polar, n_az).unwrap();
    let xs = CrossSections::build(theta.0, theta.1, groups, 1.0, 0).unwrap();
    TransportProblem::new(mesh, quad, xs).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let thetas: Vec<(f64, f64)> = (0..5)
        .map(|_| (rng.random_range(7.5..12.5), rng.random_range(0.5..1.0)))
        .collect();
    let (mut worst_op, mut worst_rhs, mut worst_solve, mut cases) = (0.0_f64, 0.0_f64, 0.0_f64, 0);
    for groups in [1, 2] {
        // 4 and 8 directions
        for (np, na) in [(1, 4), (1, 8), (2, 4)] {
            for (nx, ny) in [(1, 1), (2, 3), (4, 4)] {
                for &theta in &thetas {
                    let p = tiny_problem(nx, ny, groups, np, na, theta);
                    let a = assemble_full_operator(&p).map_err(|e| e.to_string())?;
                    let n = p.layout().len();
                    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let mut y = vec![0.0; n];
                    p.apply(&x, &mut y).map_err(|e| e.to_string())?;
                    worst_op = worst_op.max(max_rel(&y, &a.apply(&x)));
                    let b = dense_rhs(&p).map_err(|e| e.to_string())?;
                    let rhs = p.compute_rhs().map_err(|e| e.to_string())?;
                    worst_rhs = worst_rhs.max(max_rel(rhs.values(), &b));
                    let opts = GmresOptions {
                        tol: 1e-12,
                        restart: 30,
                        maxiter: 500,
                    };
                    let (xg, _) = gmres_solve(&p, &b, &opts).map_err(|e| e.to_string())?;
                    let xd = dense_solve(&a.matrix, &b).map_err(|e| e.to_string())?;
                    worst_solve = worst_solve.max(relative_l2_error(&xg, &xd));
                    cases += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    let msg = format!(
        "{cases} cases; operator {worst_op:.2e}, rhs {worst_rhs:.2e} (tol 1e-12); gmres vs dense {worst_solve:.2e} (tol 1e-8); {:.1}s",
        t.as_secs_f64()
    );
    check(
        worst_op <= 1e-12 && worst_rhs <= 1e-12 && worst_solve <= 1e-8 && t < Duration::from_secs(30),
        msg.clone(),
        msg,
    )
}

fn conservation(cfg: &ProblemConfig) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut dirs = 0;
    for (t1, t2) in [(7.5, 0.5), (12.5, 1.0), (10.0, 0.75), (8.3, 0.92)] {
        let run = snrom::harness::run_fom(cfg, (t1, t2), 1).map_err(|e| e.to_string())?;
        worst = worst.max(run.balance.residual);
        dirs = TransportProblem::from_config(cfg).unwrap().quadrature().len();
    }
    let t = start.elapsed();
    let msg = format!(
        "21x21 cells, {dirs} directions, 2 groups: worst balance residual {worst:.2e} (tol 1e-6); {:.1}s",
        t.as_secs_f64()
    );
    check(worst < 1e-6 && t < Duration::from_secs(120), msg.clone(), msg)
}

fn pod_properties(cfg: &ProblemConfig) -> Outcome {
    let params = sample(Sampler::LatinHypercube, 12, 5).unwrap();
    let x = collect_snapshots(&params, cfg).map_err(|e| e.to_string())?;
    let full = pod_basis(&x, Truncation::Rank(x.len())).map_err(|e| e.to_string())?;
    let defect = full.orthonormality_defect();
    let info: Vec<f64> = (1..=x.len())
        .map(|r| info_retained(&full.singular_values, r).unwrap())
        .collect();
    let monotone = info.windows(2).all(|w| w[1] >= w[0]);
    let last = (info[info.len() - 1] - 1.0).abs();
    let hand = (info_retained(&[2.0, 1.0], 1).unwrap() - 0.8).abs();
    let msg = format!(
        "UtU defect {defect:.2e} (tol 1e-10); I(r) monotone {monotone}; |I(N)-1| {last:.1e} (tol 1e-14); |I(1)-0.8| {hand:.1e}"
    );
    check(defect <= 1e-10 && monotone && last <= 1e-14 && hand <= 1e-15, msg.clone(), msg)
}

fn random_basis(n: usize, r: usize, seed: u64) -> ReducedBasis {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
    pod_basis_from_columns(&x, Truncation::Rank(r)).unwrap()
}


fn minimally_invasive() -> Outcome {
    let mut worst_a = 0.0_f64;
    let mut worst_b = 0.0_f64;
    let mut counts_ok = true;
    for (seed, groups, r) in [(1u64, 1usize, 3usize), (2, 2, 4), (3, 2, 2)] {
        let p = tiny_problem(3, 3, groups, 1, 8, (9.0 + seed as f64, 0.6 + 0.1 * seed as f64));
        let basis = random_basis(p.layout().len(), r, seed);
        let a = assemble_full_operator(&p).map_err(|e| e.to_string())?.matrix;
        let b = DVector::from_vec(dense_rhs(&p).map_err(|e| e.to_string())?);
        let au = &a * &basis.modes;
        for proj in [Projection::PetrovGalerkin, Projection::Galerkin] {
            let before = p.sweep_count();
            let sys = assemble_reduced(&basis, (0.0, 0.0), proj, &p).map_err(|e| e.to_string())?;
            let used = p.sweep_count() - before;
            counts_ok &= used == r + 1 && sys.sweeps == r + 1;
            let (ea, eb) = match proj {
                Projection::PetrovGalerkin => (au.transpose() * &au, au.transpose() * &b),
                Projection::Galerkin => (basis.modes.transpose() * &au, basis.modes.transpose() * &b),
            };
            worst_a = worst_a.max(max_abs(&(&sys.a - ea)));
            worst_b = worst_b.max((&sys.b - eb).amax());
        }
    }
    let msg = format!("A_r {worst_a:.2e}, b_r {worst_b:.2e} (tol 1e-10); r+1 sweeps per assembly: {counts_ok}");
    check(worst_a <= 1e-10 && worst_b <= 1e-10 && counts_ok, msg.clone(), msg)
}

fn petrov_galerkin_least_squares() -> Outcome {
    let mut worst = 0.0_f64;
    for (seed, r) in [(4u64, 3usize), (5, 5), (6, 1)] {
        let p = tiny_problem(3, 2, 2, 2, 4, (7.5 + seed as f64, 0.55 + 0.05 * seed as f64));
        let basis = random_basis(p.layout().len(), r, seed);
        let sys = assemble_reduced(&basis, (0.0, 0.0), Projection::PetrovGalerkin, &p).map_err(|e| e.to_string())?;
        let sol = rom_solve(&sys, &basis, p.layout()).map_err(|e| e.to_string())?;
        // least squares min |A U c - b| through the SVD of A U
        let a = assemble_full_operator(&p).map_err(|e| e.to_string())?.matrix;
        let b = DVector::from_vec(dense_rhs(&p).map_err(|e| e.to_string())?);
        let au = &a * &basis.modes;
        let c = au.svd(true, true).solve(&b, 1e-14).map_err(|e| e.to_string())?;
        worst = worst.max(relative_l2_error(sol.coefficients.as_slice(), c.as_slice()));
    }
    let msg = format!("coefficients vs SVD least squares {worst:.2e} (tol 1e-8)");
    check(worst <= 1e-8, msg.clone(), msg)
}

fn library_interpolation(lib: &RomLibrary) -> Outcome {
    let mut worst = 0.0_f64;
    for s in &lib.systems {
        let i = lib.interpolate_system(s.param).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs(&(&i.a - &s.a))).max((&i.b - &s.b).amax());
    }
    let (lo, hi) = (lib.bounds.lo, lib.bounds.hi);
    let mut min_eig = f64::INFINITY;
    let mut spd = true;
    for i in 0..10 {
        for j in 0..10 {
            let q = (
                lo[0] + (hi[0] - lo[0]) * i as f64 / 9.0,
                lo[1] + (hi[1] - lo[1]) * j as f64 / 9.0,
            );
            let s = lib.interpolate_system(q).map_err(|e| e.to_string())?;
            spd &= s.is_spd() && (&s.a - s.a.transpose()).amax() <= 1e-12 * max_abs(&s.a);
            min_eig = min_eig.min(s.min_eigenvalue() / max_abs(&s.a));
        }
    }
    let gm = geometric_mean_case()?;
    let msg = format!(
        "{} training points reproduce to {worst:.2e} (tol 1e-10); 10x10 grid SPD {spd} (min relative eig {min_eig:.2e}); I,4I -> 2I to {gm:.2e}",
        lib.len()
    );
    check(worst <= 1e-10 && spd && gm <= 1e-10, msg.clone(), msg)
}

fn geometric_mean_case() -> Result<f64, String> {
    let id = DMatrix::<f64>::identity(3, 3);
    let layout = snrom::FieldLayout {
        n_groups: 1,
        n_cells: 1,
        n_local: 4,
    };
    let basis = random_basis(4, 3, 1);
    let sys = |a: DMatrix<f64>, p| ReducedSystem {
        a,
        b: DVector::zeros(3),
        param: p,
        projection: Projection::PetrovGalerkin,
        sweeps: 4,
    };
    let lib = RomLibrary::from_systems(
        basis,
        layout,
        vec![sys(id.clone(), (8.0, 0.6)), sys(&id * 4.0, (12.0, 0.9))],
        [0; 32],
        None,
        1e-12,
    )
    .map_err(|e| e.to_string())?;
    let mid = lib.interpolate_system((10.0, 0.75)).map_err(|e| e.to_string())?;
    Ok(max_abs(&(mid.a - id * 2.0)))
}

fn eval_at(lib: &RomLibrary, cfg: &ProblemConfig, test: &[(f64, f64)]) -> Result<EvalReport, String> {
    evaluate(lib, cfg, test, 3).map(|(r, _)| r).map_err(|e| e.to_string())
}

fn end_to_end(r25: &EvalReport, r50: &EvalReport, elapsed: Duration) -> Outcome {
    let (e25, e50) = (r25.mean_error(), r50.mean_error());
    let msg = format!(
        "mean error N=25 {e25:.3e}, N=50 {e50:.3e} (tol 1e-2, trend N=50 <= N=25); max {:.2e}/{:.2e}; {:.1}s",
        r25.max_error(),
        r50.max_error(),
        elapsed.as_secs_f64()
    );
    check(
        e25 <= 1e-2 && e50 <= 1e-2 && e50 <= e25 && elapsed < Duration::from_secs(900),
        msg.clone(),
        msg,
    )
}

fn speedup_structure(lib: &RomLibrary, cfg: &ProblemConfig, report: &EvalReport) -> Outcome {
    let q = (9.7, 0.66);
    let c = compare(lib, cfg, q, 5).map_err(|e| e.to_string())?;
    let r = lib.rank();
    let speedup = report.mean_speedup();
    let msg = format!(
        "sweeps interpolated {} vs per-query {} (r+1 = {}); online time {:.2e}s vs {:.2e}s; mean speedup over FOM {speedup:.0}x (>= 10x)",
        c.interp_sweeps,
        c.mi_sweeps,
        r + 1,
        c.interp_time_s,
        c.mi_time_s
    );
    check(
        c.interp_sweeps == 0 && c.mi_sweeps == r + 1 && c.interp_time_s < c.mi_time_s && speedup >= 10.0,
        msg.clone(),
        msg,
    )
}

fn span_recovery(cfg: &ProblemConfig) -> Outcome {
    let params = sample(Sampler::LatinHypercube, 8, 21).unwrap();
    let opts = LibraryOptions {
        truncation: Truncation::Rank(params.len()),
        ..LibraryOptions::default()
    };
    let (lib, _) = build_library(&params, cfg, &opts).map_err(|e| e.to_string())?;
    let report = eval_at(&lib, cfg, &params)?;
    let msg = format!(
        "r = N_snap = {}: max reconstruction error at training points {:.2e} (tol 1e-6)",
        params.len(),
        report.max_error()
    );
    check(report.max_error() <= 1e-6, msg.clone(), msg)
}

fn main() {
    let cfg = ProblemConfig::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    results.push(("oracle equivalence", oracle_equivalence()));
    results.push(("conservation", conservation(&cfg)));
    results.push(("POD properties", pod_properties(&cfg)));
    results.push(("minimally-invasive consistency", minimally_invasive()));
    results.push(("Petrov-Galerkin = least squares", petrov_galerkin_least_squares()));

    let start = Instant::now();
    let test = sample(Sampler::Uniform, 10, cfg.sampling.seed.wrapping_add(1)).unwrap();
    let mut libs = Vec::new();
    let mut reports = Vec::new();
    let mut e2e_err = None;
    for n in [25, 50] {
        let train = sample(Sampler::Uniform, n, cfg.sampling.seed).unwrap();
        let built = build_library(&train, &cfg, &LibraryOptions::default())
            .map_err(|e| e.to_string())
            .and_then(|(lib, _)| eval_at(&lib, &cfg, &test).map(|r| (lib, r)));
        match built {
            Ok((lib, r)) => {
                libs.push(lib);
                reports.push(r);
            }
            Err(e) => e2e_err = Some(e),
        }
    }
    let elapsed = start.elapsed();

    match (&e2e_err, libs.last(), reports.as_slice()) {
        (None, Some(lib50), [r25, r50]) => {
            results.push(("library interpolation", library_interpolation(lib50)));
            results.push(("end-to-end accuracy", end_to_end(r25, r50, elapsed)));
            results.push(("speedup structure", speedup_structure(lib50, &cfg, r50)));
        }
        _ => {
            let e = e2e_err.unwrap_or_else(|| "library build failed".into());
            for name in ["library interpolation", "end-to-end accuracy", "speedup structure"] {
                results.push((name, Err(e.clone())));
            }
        }
    }
    results.push(("span recovery", span_recovery(&cfg)));

    println!();
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(m) => println!("PASS  {name:<34} {m}"),
            Err(m) => {
                failed += 1;
                println!("FAIL  {name:<34} {m}");
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
