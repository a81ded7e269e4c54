use clap::{Parser, Subcommand};
use maslov_sturm::cli::{self, AnalyzeOptions, DEFAULT_STEPS, DEFAULT_TOL};
use maslov_sturm::perturb::PerturbOptions;
use std::path::PathBuf;
use std::process::ExitCode;

/// Focal, Maslov and spectral indices of Morse–Sturm problems.
///
/// Exit codes: 0 success, 1 other failure, 2 parse/usage error,
/// 3 inadmissible problem, 4 final instant is focal.
#[derive(Parser)]
#[command(name = "maslov-sturm", version)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Focal instants, Maslov index and (optionally) the spectral index.
    Analyze {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        spectral: bool,
        /// JSON report path; the CSV trace goes next to it with extension .csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// μ and i_foc over random ε-perturbations of the problem.
    Perturb {
        file: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// also write the sweep as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a built-in problem (counterexample, generator-loop, harmonic,
    /// evaporation) with its report.
    Builtin {
        name: String,
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

fn init_logging() {
    let level = match std::env::var("MASLOV_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Off,
    };
    env_logger::Builder::new().filter_level(level).init();
}

fn run(args: Args) -> maslov_sturm::Result<()> {
    match args.cmd {
        Cmd::Analyze { file, steps, tol, spectral, out } => {
            let text = cli::cmd_analyze(&file, &AnalyzeOptions { steps, tol, spectral }, out.as_deref())?;
            if out.is_none() {
                print!("{text}");
            }
        }
        Cmd::Perturb { file, epsilon, trials, seed, steps, tol, out } => {
            let rep = cli::cmd_perturb(&file, epsilon, trials, seed, &PerturbOptions { steps, tol })?;
            print!("{}", cli::perturbation_table(&rep));
            if let Some(out) = out {
                std::fs::write(&out, cli::to_json_string(&cli::perturbation_json(&rep)))
                    .map_err(|e| maslov_sturm::Error::Io(format!("{}: {e}", out.display())))?;
            }
        }
        Cmd::Builtin { name, dir } => {
            for p in cli::cmd_builtin(&name, &dir, &AnalyzeOptions::default())? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    init_logging();
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
