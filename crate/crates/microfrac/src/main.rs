use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use microfrac::{parse_config, scenario, sweep, Error};

#[derive(Parser, Debug)]
#[command(name = "microfrac", version, about = "Two-scale homogenization and phase-field fracture of periodic composites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for table sampling and sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Debug-level logging (RUST_LOG overrides)
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build the damage look-up table of each configured microstructure.
    Homogenize,
    /// Run the load schedule on the specimen.
    Solve,
    /// Solve, then reconstruct the micro field at a macro point.
    Downscale,
    /// Run every combination of shape, f, ell and notch.
    Sweep,
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Invalid("--config <path> is required".into()))?;
    let cfg = parse_config(path)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir());
    match cli.command {
        Command::Homogenize => {
            for (table, path) in scenario::homogenize(&cfg, &out)? {
                let c0 = table.sample_tensor(0);
                let c1 = table.sample_tensor(table.samples().len() - 1);
                println!("{}", path.display());
                println!("  C(0) = {:?}", c0.components());
                println!("  C(1) = {:?}", c1.components());
            }
            Ok(true)
        }
        Command::Solve => {
            let o = scenario::solve(&cfg, &out)?;
            if let Some((t, h)) = o.run.peak() {
                println!("peak T22 = {t:.6e} MPa at H22 = {h:.6e}");
            }
            println!("curve: {}", o.curve.display());
            Ok(o.run.failure.is_none())
        }
        Command::Downscale => {
            let o = scenario::downscale(&cfg, &out)?;
            let p = &o.field.point;
            println!("x = ({}, {}), d = {:.6e}", p.x.x1, p.x.x2, p.damage);
            println!("U = ({:.6e}, {:.6e}) mm", p.u[0], p.u[1]);
            println!("micro field: {}", o.path.display());
            Ok(true)
        }
        Command::Sweep => {
            let s = sweep::run_sweep(&cfg, &out)?;
            print!("{}", sweep::summary_csv(&s.rows));
            Ok(!s.any_failed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("finished with numerical failures; partial results were written");
            ExitCode::from(2)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
