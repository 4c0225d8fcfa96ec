use clap::{Parser, Subcommand};
use scarlab_cli::commands::{cmd_analyze, cmd_export, cmd_scan, cmd_solve, ScanSpec};
use scarlab_cli::config::RunConfig;
use scarlab_cli::{CliError, CliResult};
use std::path::PathBuf;

/// Eigenstates of a bump-perturbed anisotropic oscillator and their
/// Lissajous-scar analysis.
///
/// Thread count comes from the SCARLAB_THREADS environment variable
/// (default: all cores); set it to 1 for bit-exact reproduction runs.
#[derive(Parser)]
#[command(name = "scarlab", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the potential, run the imaginary-time solver, write the archive.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<String>,
        /// Override the number of states.
        #[arg(long)]
        states: Option<usize>,
        /// Override the bump-realization seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Scar reports, α table, DOS curve, and density images from an archive.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        output_dir: Option<String>,
    },
    /// Sweep frequency ratios (DOS matrices) or deviations δ (scar tables).
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated ωx/ωy ratios for a DOS scan.
        #[arg(long, conflicts_with = "deltas")]
        ratios: Option<String>,
        /// Use the analytic unperturbed spectrum for the ratio scan.
        #[arg(long, requires = "ratios")]
        analytic: bool,
        /// Comma-separated deviations (0 required) for a deviation scan.
        #[arg(long)]
        deltas: Option<String>,
        #[arg(long)]
        output_dir: Option<String>,
    },
    /// Density images and the energy table straight from an archive.
    Export {
        #[arg(long)]
        archive: PathBuf,
        /// Comma-separated state indices (default: all).
        #[arg(long)]
        states: Option<String>,
        #[arg(long, default_value = "out")]
        output_dir: String,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Ok(threads) = std::env::var("SCARLAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version exit cleanly; anything else is a usage error
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve { config, output_dir, states, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(k) = states {
                cfg.states = k;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = cmd_solve(&cfg)?;
            println!("archive: {}", out.archive_path.display());
            println!("metadata: {}", out.metadata_path.display());
            if !out.all_converged {
                return Err(CliError::Numerical(
                    "solver hit the iteration budget; partial results written".into(),
                ));
            }
            Ok(())
        }
        Command::Analyze { config, archive, output_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let out = cmd_analyze(&archive, &cfg)?;
            println!("scars: {}", out.scars_path.display());
            println!("dos: {}", out.dos_path.display());
            println!("scarred_fraction: {:.4}", out.scarred_fraction);
            Ok(())
        }
        Command::Scan { config, ratios, analytic, deltas, output_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let spec = match (ratios, deltas) {
                (Some(r), None) => ScanSpec::Ratios { ratios: parse_list(&r)?, analytic },
                (None, Some(d)) => ScanSpec::Deltas(parse_list(&d)?),
                _ => {
                    return Err(CliError::Usage(
                        "scan needs exactly one of --ratios or --deltas".into(),
                    ))
                }
            };
            let out = cmd_scan(&cfg, &spec)?;
            println!("table: {}", out.table_path.display());
            if out.failures > 0 {
                return Err(CliError::Numerical(format!(
                    "{} scan point(s) failed; remaining points written",
                    out.failures
                )));
            }
            Ok(())
        }
        Command::Export { archive, states, output_dir } => {
            let indices = match states {
                Some(s) => parse_list::<usize>(&s)?,
                None => Vec::new(),
            };
            let out = cmd_export(&archive, &indices, std::path::Path::new(&output_dir))?;
            println!("energies: {}", out.energies_path.display());
            println!("images: {}", out.image_paths.len());
            Ok(())
        }
    }
}

fn parse_list<T: std::str::FromStr>(text: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| CliError::Usage(format!("cannot parse list item '{t}'")))
        })
        .collect()
}
