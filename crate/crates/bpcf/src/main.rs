use std::path::PathBuf;
use std::process::ExitCode;

use bpcf::commands::{
    cmd_fit, cmd_generate, cmd_pce, cmd_simulate, cmd_surface, parse_intervals, parse_numbers, Method, Scenario,
    StrataSpec,
};
use bpcf::config::{RunConfig, RunProfile};
use bpcf::error::{Error, Result};
use clap::{Parser, Subcommand};

/// Bayesian principal causal forests.
///
/// Worker threads for `simulate` come from BPCF_WORKERS (default: all cores).
#[derive(Debug, Parser)]
#[command(name = "bpcf", version)]
struct Cli {
    /// Run-config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset applied before the config file's overrides.
    #[arg(long, global = true)]
    profile: Option<RunProfile>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scenario I replications; writes table1.csv and replications.csv.
    Simulate {
        /// Comma-separated subset of bpcf, bpcf_m_only, bart_pce.
        #[arg(long, default_value = "bpcf,bpcf_m_only,bart_pce")]
        methods: String,
    },
    /// Fit propensity and the joint model to a CSV; writes a draws directory.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Column-role sidecar; default roles are id, A, M, Y and covariates.
        #[arg(long)]
        roles: Option<PathBuf>,
    },
    /// Principal causal effects over strata of M(1) - M(0).
    Pce {
        #[arg(long)]
        draws: PathBuf,
        /// Explicit open intervals, e.g. `-inf:0,0:inf`.
        #[arg(long, conflicts_with = "sd_multiples", required_unless_present = "sd_multiples")]
        intervals: Option<String>,
        /// Cut points at ± these multiples of the SD of unit-level effects, e.g. `0.2,0.5`.
        #[arg(long)]
        sd_multiples: Option<String>,
    },
    /// Causal-effect surface over the (M(0), M(1)) plane.
    Surface {
        #[arg(long)]
        draws: PathBuf,
        /// Grid points per axis.
        #[arg(long, default_value_t = 40)]
        grid: usize,
    },
    /// Write a simulated dataset and its potential values.
    Generate {
        #[arg(long, default_value = "scenario1")]
        scenario: Scenario,
        #[arg(long, default_value_t = 300)]
        n: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            RunConfig::parse(&text, cli.profile)?
        }
        None => RunConfig::from_profile(cli.profile.unwrap_or(RunProfile::PaperDefault)),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.replications {
        cfg.replications = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Simulate { methods } => {
            let methods = Method::parse_list(methods)?;
            for row in cmd_simulate(&cfg, &methods, out)? {
                let cells: Vec<String> = row
                    .methods
                    .iter()
                    .map(|(m, rbias, mse, _)| {
                        format!("{} rBias {} MSE {}", m.name(), show(*rbias), show(*mse))
                    })
                    .collect();
                println!("{:<6} truth {:>7.2}  {}", row.estimand, row.truth, cells.join("  "));
            }
        }
        Command::Fit { data, roles } => {
            let s = cmd_fit(&cfg, data, roles.as_deref(), out)?;
            println!(
                "ATE on M {:.4} ({:.4}, {:.4})",
                s.ate_m.posterior_mean, s.ate_m.ci95.0, s.ate_m.ci95.1
            );
            println!(
                "ATE on Y {:.4} ({:.4}, {:.4})",
                s.ate_y.posterior_mean, s.ate_y.ci95.0, s.ate_y.ci95.1
            );
        }
        Command::Pce {
            draws,
            intervals,
            sd_multiples,
        } => {
            let spec = match (intervals, sd_multiples) {
                (Some(i), _) => StrataSpec::Explicit(parse_intervals(i)?),
                (None, Some(m)) => StrataSpec::SdMultiples(parse_numbers(m)?),
                (None, None) => return Err(Error::Usage("give --intervals or --sd-multiples".into())),
            };
            let rows = cmd_pce(&cfg, draws, &spec, out)?;
            println!("{} strata written", rows.len());
        }
        Command::Surface { draws, grid } => {
            let cells = cmd_surface(&cfg, draws, *grid, out)?;
            println!("{cells} surface cells written");
        }
        Command::Generate { scenario, n } => {
            cmd_generate(&cfg, *scenario, *n, out)?;
        }
    }
    Ok(())
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
