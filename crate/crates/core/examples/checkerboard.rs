//! Train a small library on the checkerboard and compare one online query with the FOM.
//!
//! cargo run --release -p snrom --example checkerboard

use snrom::field::relative_l2_error;
use snrom::harness::run_fom;
use snrom::library::{build_library, LibraryOptions};
use snrom::sampling::{sample, Sampler};
use snrom::ProblemConfig;

fn main() -> snrom::Result<()> {
    let cfg = ProblemConfig::default();
    let train = sample(Sampler::Uniform, 25, cfg.sampling.seed)?;
    let (lib, stats) = build_library(&train, &cfg, &LibraryOptions::default())?;
    println!(
        "rank {} keeps {:.10} of the snapshot energy; {} offline sweeps",
        stats.rank,
        stats.information,
        stats.total_sweeps()
    );

    let q = (10.3, 0.82);
    let fom = run_fom(&cfg, q, 3)?;
    let t = std::time::Instant::now();
    let rom = lib.online_solve(q)?;
    let rom_time = t.elapsed().as_secs_f64();
    println!(
        "theta = {q:?}: error {:.2e}, FOM {:.2e}s ({} sweeps), ROM {:.2e}s, balance residual {:.1e}",
        relative_l2_error(rom.field.values(), fom.solution.phi.values()),
        fom.time_s,
        fom.solution.sweeps,
        rom_time,
        fom.balance.residual
    );
    Ok(())
}
