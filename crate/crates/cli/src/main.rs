use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use coopmud::analysis::MudMode;
use coopmud::detectors::DetectorKind;
use coopmud_cli::commands::{self, BoundsArgs};
use coopmud_cli::CliResult;

#[derive(Parser)]
#[command(
    name = "coopmud",
    version,
    about = "Cooperative CDMA relaying with multiuser detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a TOML config or a figure preset.
    Sweep {
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Override a config key, e.g. `sweep.stopping.max_bits=1000000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output root; defaults to $COOPMUD_OUT_DIR, then ./coopmud-out.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a figure preset and write CSVs plus a JSON series file.
    Reproduce {
        figure: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Closed-form and fixed-point calculators.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Individual,
    Joint,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundDetector {
    Sic,
    Optimal,
}

#[derive(Subcommand)]
enum Analyze {
    /// Two-user asymptotic efficiency with an ideal relay.
    Efficiency {
        #[arg(long)]
        a1: f64,
        #[arg(long)]
        a2: f64,
        #[arg(long, default_value_t = 0.0)]
        ar: f64,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
    },
    /// Optimal number of network-coded users.
    Mstar {
        #[arg(long)]
        psd: f64,
        #[arg(long)]
        psr: f64,
        #[arg(long)]
        prd: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Large-system multiuser efficiencies.
    LargeSystem {
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        power: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Mode::Individual)]
        mode: Mode,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Perfect source-relay bound and, given link rates, the wired-relay bound.
    Bounds {
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        relay: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        target: usize,
        #[arg(long, value_enum, default_value_t = BoundDetector::Sic)]
        detector: BoundDetector,
        /// Fixed two-user correlation for the optimal bound; otherwise the
        /// bound is averaged over random codes.
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 200)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        p_direct: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        p_sr: Vec<f64>,
    },
    /// Fraction of slots carrying fresh source data.
    Spectral {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sweep {
            config,
            preset,
            set,
            out,
            workers,
        } => {
            let dir = commands::cmd_sweep(
                config.as_deref(),
                preset.as_deref(),
                &set,
                out.as_deref(),
                workers,
            )?;
            println!("{}", dir.display());
        }
        Command::Reproduce {
            figure,
            set,
            out,
            workers,
        } => {
            let dir = commands::cmd_reproduce(&figure, &set, out.as_deref(), workers)?;
            println!("{}", dir.display());
        }
        Command::Analyze { what } => {
            let text = match what {
                Analyze::Efficiency { a1, a2, ar, rho } => {
                    commands::analyze_efficiency(a1, a2, ar, rho)?
                }
                Analyze::Mstar {
                    psd,
                    psr,
                    prd,
                    k,
                    csv,
                } => commands::analyze_mstar(psd, psr, prd, k, csv.as_deref())?,
                Analyze::LargeSystem {
                    beta,
                    noise,
                    power,
                    weights,
                    mode,
                    csv,
                } => {
                    let mode = match mode {
                        Mode::Individual => MudMode::Individual,
                        Mode::Joint => MudMode::Joint,
                    };
                    commands::analyze_large_system(
                        &beta,
                        noise,
                        &power,
                        weights.as_deref(),
                        mode,
                        csv.as_deref(),
                    )?
                }
                Analyze::Bounds {
                    a,
                    relay,
                    sigma,
                    m,
                    target,
                    detector,
                    rho,
                    draws,
                    seed,
                    p_direct,
                    p_sr,
                } => commands::analyze_bounds(&BoundsArgs {
                    amplitudes: &a,
                    relay: &relay,
                    sigma,
                    spreading_gain: m,
                    target,
                    detector: match detector {
                        BoundDetector::Sic => DetectorKind::Sic,
                        BoundDetector::Optimal => DetectorKind::Optimal,
                    },
                    rho,
                    draws,
                    seed,
                    p_direct,
                    p_source_relay: &p_sr,
                })?,
                Analyze::Spectral { k, n } => commands::analyze_spectral(k, n)?,
            };
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coopmud: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
