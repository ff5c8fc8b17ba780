//! `nvsvi`: exotic spin-velocity coupling bounds from an NV-centre echo.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{Common, CurveArgs, FieldArgs, SimulateArgs};
use config::{ExperimentConfig, Variant};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "nvsvi",
    version,
    about = "Spin-velocity coupling limits from a vibrating-source spin echo"
)]
struct Cli {
    /// TOML experiment config; missing keys take the nominal setup.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// RNG seed; overrides analysis.seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Algorithm variant; valid names depend on the subcommand.
    #[arg(long, global = true, value_name = "NAME")]
    method: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Plus,
    Minus,
}

#[derive(Subcommand)]
enum Command {
    /// Form factor by closed form and by volume quadrature (method: quadrature).
    Field {
        #[arg(long, default_value_t = 1.0)]
        d_min_um: f64,
        #[arg(long, default_value_t = 100.0)]
        d_max_um: f64,
        #[arg(long, default_value_t = 20)]
        n_points: usize,
        /// Single force range, replacing the config list.
        #[arg(long)]
        lambda_um: Option<f64>,
    },
    /// Accumulated echo phase (method: analytic | timedomain).
    Phase {
        /// Coupling g_s^N g_V^e; overrides hypothesis.g.
        #[arg(long, allow_hyphen_values = true)]
        g: Option<f64>,
        #[arg(long)]
        lambda_um: Option<f64>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
    /// Phase estimate from an interference scan (method: linear).
    Fit {
        /// CSV with columns phi_mw_rad, I, sigma_I.
        data: PathBuf,
    },
    /// Systematic error budget (method: bound | central reference phase).
    Budget {
        #[arg(long)]
        lambda_um: Option<f64>,
    },
    /// Exclusion curve over a log grid of force ranges (method: bound | central).
    Curve {
        #[arg(long, default_value_t = 0.1)]
        lambda_min_um: f64,
        #[arg(long, default_value_t = 10000.0)]
        lambda_max_um: f64,
        #[arg(long, default_value_t = 25)]
        n_points: usize,
    },
    /// Synthetic interference scan (method: binomial).
    Simulate {
        /// True anomalous phase; defaults to analysis.phi_central_rad.
        #[arg(long, allow_hyphen_values = true)]
        phi_rad: Option<f64>,
    },
    /// Print the effective configuration.
    Config,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn set_lambda(config: &mut ExperimentConfig, lambda_um: Option<f64>) {
    if let Some(l) = lambda_um {
        config.hypothesis.lambda_um = vec![l];
        config.hypothesis.mass_ev.clear();
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.analysis.seed = seed;
    }
    match &cli.command {
        Command::Field { lambda_um, .. } | Command::Budget { lambda_um } => {
            set_lambda(&mut config, *lambda_um)
        }
        Command::Phase {
            g,
            lambda_um,
            variant,
        } => {
            set_lambda(&mut config, *lambda_um);
            if let Some(g) = g {
                config.hypothesis.g = *g;
            }
            if let Some(v) = variant {
                config.sensor.variant = match v {
                    VariantArg::Plus => Variant::Plus,
                    VariantArg::Minus => Variant::Minus,
                };
            }
        }
        _ => {}
    }
    let method = match &cli.command {
        Command::Budget { .. } | Command::Curve { .. } => {
            commands::apply_reference_method(&mut config, cli.method.as_deref())?;
            None
        }
        _ => cli.method,
    };
    config.validate()?;

    let common = Common {
        config,
        out: cli.out,
        method,
    };
    let table = match cli.command {
        Command::Field {
            d_min_um,
            d_max_um,
            n_points,
            ..
        } => commands::field(
            &common,
            &FieldArgs {
                d_min_um,
                d_max_um,
                n_points,
            },
        )?,
        Command::Phase { .. } => commands::phase(&common)?,
        Command::Fit { data } => commands::fit(&common, &data)?,
        Command::Budget { .. } => commands::budget(&common)?,
        Command::Curve {
            lambda_min_um,
            lambda_max_um,
            n_points,
        } => commands::curve(
            &common,
            &CurveArgs {
                lambda_min_um,
                lambda_max_um,
                n_points,
            },
        )?,
        Command::Simulate { phi_rad } => commands::simulate(&common, &SimulateArgs { phi_rad })?,
        Command::Config => {
            let text = format!(
                "# config_sha256: {}\n{}",
                common.config.digest(),
                common.config.to_toml()
            );
            return match &common.out {
                Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
        }
    };
    table.emit(common.out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nvsvi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
