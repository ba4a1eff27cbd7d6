//! `snrom`: full-order solves, offline training, and online evaluation of
//! interpolated reduced-order models for the checkerboard transport problem.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snrom::harness::{self, EvalReport};
use snrom::library::{LibraryOptions, RomLibrary};
use snrom::pod::Truncation;
use snrom::reduced::Projection;
use snrom::sampling::{sample, Sampler};
use snrom::{Error, ProblemConfig};

/// Environment variable that sets the worker thread count.
const THREADS_VAR: &str = "SNROM_THREADS";

#[derive(Parser)]
#[command(name = "snrom", version, about = "Discrete-ordinates transport with interpolated reduced-order models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem configuration (TOML). Built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Timing repetitions; the median is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full-order problem at one parameter point.
    Fom {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theta1: f64,
        #[arg(long)]
        theta2: f64,
        /// Output field file; the solver report goes next to it as `<out>.gmres.txt`.
        #[arg(long, short)]
        out: PathBuf,
        /// Also write a cell-averaged CSV export.
        #[arg(long)]
        csv: bool,
    },
    /// Sample training points, collect snapshots, and write a library.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "uniform")]
        sampler: Sampler,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-snap")]
        n_snap: usize,
        /// Basis rank.
        #[arg(long, conflicts_with = "info")]
        rank: Option<usize>,
        /// Retained-information threshold in (0, 1] instead of a fixed rank.
        #[arg(long)]
        info: Option<f64>,
        /// `pg` (Petrov-Galerkin) or `galerkin`.
        #[arg(long, default_value = "pg")]
        projection: Projection,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compare the online ROM with full-order solves on a test set.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        library: PathBuf,
        #[arg(long, default_value = "uniform")]
        sampler: Sampler,
        /// Test-set seed; defaults to the config seed plus one.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-test", default_value_t = 10)]
        n_test: usize,
        /// Evaluate at the library's own training points instead of sampling.
        #[arg(long, conflicts_with_all = ["n_test", "seed"])]
        training_points: bool,
        /// Directory for report.csv, summary.txt and per-point field files.
        #[arg(long = "out-dir", short)]
        out_dir: PathBuf,
        /// Also write CSV exports of every field file.
        #[arg(long = "csv-fields")]
        csv_fields: bool,
    },
    /// Full-order vs. per-query projection vs. interpolated ROM at one point.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        library: PathBuf,
        #[arg(long)]
        theta1: f64,
        #[arg(long)]
        theta2: f64,
    },
}

fn load_config(path: Option<&Path>) -> snrom::Result<ProblemConfig> {
    let Some(path) = path else {
        return Ok(ProblemConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let (cfg, warnings) = ProblemConfig::from_toml_str(&text)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(cfg)
}

fn run(cli: Cli) -> snrom::Result<()> {
    match cli.command {
        Command::Fom {
            common,
            theta1,
            theta2,
            out,
            csv,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let run = harness::run_fom(&cfg, (theta1, theta2), common.reps)?;
            let ff = snrom::fieldio::FieldFile::new(run.nx, run.ny, snrom::fieldio::FieldKind::Fom, run.solution.phi.clone())?;
            ff.save(&out)?;
            if csv {
                let mut w = std::fs::File::create(out.with_extension("csv"))?;
                ff.write_csv(&mut w)?;
            }
            let r = &run.solution.report;
            let mut report = format!(
                "theta1 {theta1}\ntheta2 {theta2}\nconverged {}\niterations {}\nrelative_residual {:e}\nsweeps {}\ntime_s {:e}\n\
                 balance_residual {:e}\nsource {:e}\nabsorption {:e}\nleakage {:e}\nresidual_history",
                r.converged,
                r.iterations,
                r.relative_residual,
                run.solution.sweeps,
                run.time_s,
                run.balance.residual,
                run.balance.source,
                run.balance.absorption,
                run.balance.leakage
            );
            for h in &r.residual_history {
                report.push_str(&format!(" {h:e}"));
            }
            report.push('\n');
            std::fs::write(report_path(&out), report)?;
            println!(
                "converged in {} iterations ({} sweeps, {:.3e} s); balance residual {:.3e}",
                r.iterations, run.solution.sweeps, run.time_s, run.balance.residual
            );
        }
        Command::Train {
            common,
            sampler,
            seed,
            n_snap,
            rank,
            info,
            projection,
            out,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let truncation = match (rank, info) {
                (_, Some(t)) => Truncation::Information(t),
                (Some(r), None) => Truncation::Rank(r),
                (None, None) => Truncation::Rank(5),
            };
            if let Truncation::Rank(r) = truncation {
                if r > n_snap {
                    return Err(Error::RankTooLarge { rank: r, columns: n_snap });
                }
            }
            let params = sample(sampler, n_snap, seed.unwrap_or(cfg.sampling.seed))?;
            let options = LibraryOptions {
                truncation,
                projection,
                ..LibraryOptions::default()
            };
            let (lib, stats) = harness::train(&cfg, &params, &options)?;
            lib.save(&out)?;
            println!("snapshots: {}", stats.n_snapshots);
            println!("rank: {}", stats.rank);
            println!("information_retained: {:.15}", stats.information);
            let sv: Vec<String> = stats.singular_values.iter().map(|s| format!("{s:.6e}")).collect();
            println!("singular_values: {}", sv.join(" "));
            println!(
                "offline_sweeps: {} (fom {} + assembly {})",
                stats.total_sweeps(),
                stats.fom_sweeps,
                stats.assembly_sweeps
            );
            println!("library: {}", out.display());
        }
        Command::Eval {
            common,
            library,
            sampler,
            seed,
            n_test,
            training_points,
            out_dir,
            csv_fields,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let lib = RomLibrary::load(&library, &cfg)?;
            let params = if training_points {
                lib.train_params()
            } else {
                sample(sampler, n_test, seed.unwrap_or(cfg.sampling.seed.wrapping_add(1)))?
            };
            if params.is_empty() {
                return Err(Error::Invalid("empty test set".into()));
            }
            std::fs::create_dir_all(&out_dir)?;
            let (report, fields) = harness::evaluate(&lib, &cfg, &params, common.reps)?;
            let mut w = std::fs::File::create(out_dir.join("report.csv"))?;
            report.write_csv(&mut w)?;
            std::fs::write(out_dir.join("summary.txt"), report.summary())?;
            for (i, f) in fields.iter().enumerate() {
                f.write(&out_dir, i, csv_fields)?;
            }
            print_eval(&report);
        }
        Command::Compare {
            common,
            library,
            theta1,
            theta2,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let lib = RomLibrary::load(&library, &cfg)?;
            println!("{}", harness::compare(&lib, &cfg, (theta1, theta2), common.reps)?);
        }
    }
    Ok(())
}

fn report_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".gmres.txt");
    PathBuf::from(s)
}

fn print_eval(report: &EvalReport) {
    print!("{}", report.summary());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: {THREADS_VAR} must be a positive integer, got '{v}'");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_numerical() || matches!(e, Error::Io(_)) { 1 } else { 2 };
            ExitCode::from(code)
        }
    }
}
