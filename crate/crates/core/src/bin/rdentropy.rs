//! Thin command-line front end: resolves a scenario, dispatches to the
//! command layer, prints the JSON report to stdout, and maps failures to the
//! stable exit codes (0 ok, 2 validation, 3 numerical quality, 4 solver).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rdentropy::cli::{self, CliError};
use rdentropy::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "rdentropy",
    about = "Reaction-network analysis and reaction-diffusion simulation with entropy diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (see the presets/ directory for examples).
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Name of a shipped preset: fig1a, fig1b, thm2-measurable,
    /// thm3-degenerate, remark-2x2-disjoint.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for CSV artifacts and the report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the command-relevant seed (init.seed for simulate,
    /// probe.seed for probe, mask seeds are salted from it for sweep).
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the human-readable summary on stderr.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn load(&self, seed_key: Option<&str>) -> Result<Scenario, CliError> {
        let seed_string = self.seed.map(|s| s.to_string());
        let overrides: Vec<(&str, &str)> = match (seed_key, &seed_string) {
            (Some(key), Some(value)) => vec![(key, value.as_str())],
            _ => Vec::new(),
        };
        let scenario = match (&self.scenario, &self.preset) {
            (Some(path), None) => Scenario::from_file_with_overrides(path, &overrides)?,
            (None, Some(name)) => Scenario::from_preset_with_overrides(name, &overrides)?,
            _ => {
                return Err(CliError::Validation(
                    "give exactly one of --scenario <path> or --preset <name>".into(),
                ))
            }
        };
        Ok(scenario)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Structural analysis: stoichiometry, conservation laws, components.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Positive complex balanced equilibrium for given conserved totals.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// Conserved totals (comma separated); defaults to the initial
        /// data's totals.
        #[arg(long)]
        totals: Option<String>,
    },
    /// Time-integrate the scenario and write trajectory CSV + summary.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Sample D/E ratios over conservation-compatible random states.
    Probe {
        #[command(flatten)]
        common: Common,
        /// Number of samples (default from the scenario).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Decay-rate scaling over shrinking reaction masks.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Mask fractions, comma separated (default from the scenario).
        #[arg(long)]
        fractions: Option<String>,
        /// Seeds, comma separated (default from the scenario).
        #[arg(long)]
        seeds: Option<String>,
    },
}

fn main() -> ExitCode {
    // Die quietly when stdout is a closed pipe (e.g. `... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let payload = serde_json::json!({
                "error": e.to_string(),
                "kind": e.kind(),
            });
            println!("{}", serde_json::to_string_pretty(&payload).unwrap());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit<T: serde::Serialize>(
    report: &cli::Report<T>,
    common: &Common,
    summary: &str,
) -> Result<(), CliError> {
    let json = report.to_json();
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
        let path = dir.join("report.json");
        std::fs::write(&path, &json).map_err(|e| CliError::Io(e.to_string()))?;
    }
    println!("{json}");
    if !common.quiet {
        eprintln!("{summary}");
    }
    Ok(())
}

fn parse_list_f64(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("cannot parse number '{t}'")))
        })
        .collect()
}

fn parse_list_u64(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Validation(format!("cannot parse integer '{t}'")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Analyze { common } => {
            let scenario = common.load(None)?;
            let report = cli::cmd_analyze(&scenario);
            let summary = format!(
                "analyze: {} species, {} reactions, {} components, cross-edge-free: {}",
                report.results.n_species,
                report.results.n_reactions,
                report.results.n_components,
                report.results.no_cross_component_edges
            );
            emit(&report, &common, &summary)?;
            Ok(0)
        }
        Command::Equilibrium { common, totals } => {
            let scenario = common.load(None)?;
            let totals = totals.as_deref().map(parse_list_f64).transpose()?;
            let report = cli::cmd_equilibrium(&scenario, totals)?;
            let summary = format!(
                "equilibrium ({}): u_inf = {:?}, converged = {}",
                report.results.method, report.results.u_inf, report.results.converged
            );
            emit(&report, &common, &summary)?;
            Ok(0)
        }
        Command::Simulate { common } => {
            let scenario = common.load(Some("init.seed"))?;
            let (report, _traj) = cli::cmd_simulate(&scenario, common.out.as_deref())?;
            let summary = match &report.results.decay {
                Some(fit) => format!(
                    "simulate: {} records, lambda = {:.4}, r2 = {:.4}, drift = {:.2e}",
                    report.results.records,
                    fit.lambda,
                    fit.r_squared,
                    report.results.conservation_drift
                ),
                None => format!(
                    "simulate: {} records, steady rate = {:.2e}, drift = {:.2e}",
                    report.results.records,
                    report.results.steady_rate,
                    report.results.conservation_drift
                ),
            };
            let code = cli::exit_hint(&report.results);
            emit(&report, &common, &summary)?;
            Ok(code as u8)
        }
        Command::Probe { common, n } => {
            let scenario = common.load(Some("probe.seed"))?;
            let report = cli::cmd_probe(&scenario, n, common.seed)?;
            let summary = format!(
                "probe: {} samples, min D/E = {:.6}, median = {:.6}",
                report.results.n_used, report.results.min_ratio, report.results.q50
            );
            emit(&report, &common, &summary)?;
            Ok(0)
        }
        Command::Sweep {
            common,
            fractions,
            seeds,
        } => {
            let scenario = common.load(None)?;
            let fractions = fractions.as_deref().map(parse_list_f64).transpose()?;
            let seeds = seeds
                .as_deref()
                .map(parse_list_u64)
                .transpose()?
                .or_else(|| common.seed.map(|s| vec![s, s.wrapping_add(1)]));
            let (report, csv) =
                cli::cmd_sweep(&scenario, fractions, seeds, common.out.as_deref())?;
            let summary = format!(
                "sweep: {} rows, slope b = {:.4}, monotone: {}{}",
                report.results.rows.len(),
                report.results.slope,
                report.results.monotone,
                csv.map(|p| format!(", csv: {}", p.display()))
                    .unwrap_or_default()
            );
            emit(&report, &common, &summary)?;
            Ok(0)
        }
    }
}
