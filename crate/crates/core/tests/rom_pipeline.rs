//! Snapshots, library build, persistence and evaluation at desk scale.

use snrom::error::Error;
use snrom::field::relative_l2_error;
use snrom::harness::{evaluate, EvalReport};
use snrom::krylov::GmresOptions;
use snrom::library::{build_library, LibraryOptions, ManifoldScheme, RomLibrary};
use snrom::pod::{collect_snapshots, Truncation};
use snrom::reduced::Projection;
use snrom::sampling::{sample, Sampler};
use snrom::transport::solve_fom;
use snrom::{ProblemConfig, TransportProblem};

fn cfg() -> ProblemConfig {
    ProblemConfig::default()
}

fn opts(r: usize) -> LibraryOptions {
    LibraryOptions {
        truncation: Truncation::Rank(r),
        ..LibraryOptions::default()
    }
}

#[test]
fn duplicate_parameters_give_identical_columns() {
    let x = collect_snapshots(&[(9.3, 0.71), (9.3, 0.71)], &cfg()).unwrap();
    let a: Vec<u64> = x.columns.column(0).iter().map(|v| v.to_bits()).collect();
    let b: Vec<u64> = x.columns.column(1).iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
}

#[test]
fn single_snapshot_is_the_fom_solution() {
    let x = collect_snapshots(&[(11.2, 0.58)], &cfg()).unwrap();
    let p = TransportProblem::from_config(&cfg().with_params(11.2, 0.58)).unwrap();
    let sol = solve_fom(&p, &GmresOptions::default()).unwrap();
    assert_eq!(x.columns.column(0).as_slice(), sol.phi.values());
    assert_eq!(x.sweeps, sol.sweeps);
}

#[test]
fn latin_hypercube_snapshots_are_finite_and_balanced() {
    let params = sample(Sampler::LatinHypercube, 5, 17).unwrap();
    let x = collect_snapshots(&params, &cfg()).unwrap();
    assert_eq!(x.columns.ncols(), 5);
    assert!(x.columns.iter().all(|v| v.is_finite()));
    for (j, &(t1, t2)) in params.iter().enumerate() {
        let p = TransportProblem::from_config(&cfg().with_params(t1, t2)).unwrap();
        let phi = snrom::MomentField::from_vec(p.layout(), x.columns.column(j).iter().copied().collect()).unwrap();
        assert!(p.particle_balance(&phi).unwrap().residual < 1e-6);
    }
}

#[test]
fn non_convergence_names_the_parameter() {
    let mut c = cfg();
    c.gmres.maxiter = 2;
    match collect_snapshots(&[(8.0, 0.9)], &c) {
        Err(Error::NotConverged { theta1, theta2, .. }) => assert_eq!((theta1, theta2), (8.0, 0.9)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn five_point_library_holds_spd_two_by_two_systems() {
    let params = sample(Sampler::LatinHypercube, 5, 2).unwrap();
    let (lib, stats) = build_library(&params, &cfg(), &opts(2)).unwrap();
    assert_eq!(lib.len(), 5);
    assert_eq!(lib.scheme, ManifoldScheme::LogEuclidean);
    for s in &lib.systems {
        assert_eq!(s.a.shape(), (2, 2));
        assert!((&s.a - s.a.transpose()).amax() <= 1e-12 * s.a.amax());
        assert!(s.min_eigenvalue() > 0.0);
        assert_eq!(s.sweeps, 3);
    }
    assert_eq!(stats.assembly_sweeps, 5 * 3);
    assert!(lib.basis.orthonormality_defect() < 1e-10);
}

#[test]
fn library_rejects_bad_training_sets() {
    let c = cfg();
    assert!(matches!(
        build_library(&[(9.0, 0.7), (9.0, 0.7), (10.0, 0.8)], &c, &opts(2)),
        Err(Error::Invalid(_))
    ));
    assert!(build_library(&[(9.0, 0.7)], &c, &opts(1)).is_err());
    assert!(matches!(
        build_library(&[(9.0, 0.7), (10.0, 0.8)], &c, &opts(3)),
        Err(Error::RankTooLarge { rank: 3, columns: 2 })
    ));
}

#[test]
fn full_rank_library_recovers_training_snapshots() {
    let params = sample(Sampler::LatinHypercube, 6, 8).unwrap();
    let x = collect_snapshots(&params, &cfg()).unwrap();
    for proj in [Projection::PetrovGalerkin, Projection::Galerkin] {
        let o = LibraryOptions {
            projection: proj,
            ..opts(6)
        };
        let (lib, _) = build_library(&params, &cfg(), &o).unwrap();
        for (j, &q) in params.iter().enumerate() {
            let rom = lib.online_solve(q).unwrap();
            let err = relative_l2_error(rom.field.values(), x.columns.column(j).as_slice());
            assert!(err <= 1e-8, "{proj:?} point {j}: {err}");
        }
    }
}

#[test]
fn same_inputs_write_identical_library_files() {
    let dir = tempfile::tempdir().unwrap();
    let params = sample(Sampler::Uniform, 6, 99).unwrap();
    let (a, _) = build_library(&params, &cfg(), &opts(3)).unwrap();
    let (b, _) = build_library(&params, &cfg(), &opts(3)).unwrap();
    let (pa, pb) = (dir.path().join("a.lib"), dir.path().join("b.lib"));
    a.save(&pa).unwrap();
    b.save(&pb).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

    let back = RomLibrary::load(&pa, &cfg()).unwrap();
    let q = (10.4, 0.77);
    let x = a.interpolate_system(q).unwrap();
    let y = back.interpolate_system(q).unwrap();
    assert_eq!(x, y);

    // a different mesh is a different problem
    let mut other = cfg();
    other.cells_per_block = 2;
    assert!(matches!(RomLibrary::load(&pa, &other), Err(Error::Fingerprint { .. })));
    // parameters and seed are not part of the fingerprint
    let mut reseeded = cfg().with_params(8.0, 0.6);
    reseeded.sampling.seed = 7;
    assert!(RomLibrary::load(&pa, &reseeded).is_ok());
}

#[test]
fn evaluation_report_and_fields() {
    let c = cfg();
    let train = sample(Sampler::LatinHypercube, 10, 1).unwrap();
    let (lib, _) = build_library(&train, &c, &opts(5)).unwrap();
    assert!(matches!(evaluate(&lib, &c, &[], 1), Err(Error::Invalid(_))));

    let test = sample(Sampler::Uniform, 3, 2).unwrap();
    let (report, fields) = evaluate(&lib, &c, &test, 1).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert_eq!(fields.len(), 3);
    for (row, f) in report.rows.iter().zip(&fields) {
        assert_eq!(row.rom_sweeps, 0);
        assert!(row.fom_sweeps > 0);
        let err = relative_l2_error(f.rom.field.values(), f.fom.field.values());
        assert_eq!(err, row.rel_l2_error);
        assert!(row.rel_l2_error < 1e-1);
        assert_eq!((f.fom.nx, f.fom.ny), (21, 21));
    }

    let dir = tempfile::tempdir().unwrap();
    fields[0].write(dir.path(), 0, true).unwrap();
    for name in ["point_000_fom", "point_000_rom", "point_000_relerr"] {
        let ff = snrom::fieldio::FieldFile::load(&dir.path().join(format!("{name}.snf"))).unwrap();
        assert_eq!(ff.field.values().len(), 2 * 441 * 4);
        assert!(dir.path().join(format!("{name}.csv")).exists());
    }

    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let back = EvalReport::read_csv(std::str::from_utf8(&csv).unwrap(), &report.fingerprint).unwrap();
    assert_eq!(back, report);
}
