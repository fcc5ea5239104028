//! Command layer behind the binary: each subcommand takes a resolved
//! [`Scenario`], produces a serializable report under a common envelope, and
//! writes its CSV artifacts. Exit codes are part of the contract:
//! 0 success, 2 validation failure, 3 numerical-quality failure, 4 solver
//! failure.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::entropy::{fit_decay_rate, DecayFit};
use crate::equilibrium::EquilibriumError;
use crate::pde::{simulate, SimError, Trajectory};
use crate::probes::{eed_ratio_probe, omega_sweep, ProbeError, ProbeReport, SweepReport};
use crate::scenario::{solve_equilibrium, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NumericalQuality(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NumericalQuality(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::NumericalQuality(_) => "numerical-quality",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::SolverBreakdown { .. } => CliError::Solver(e.to_string()),
            SimError::DtTooLarge { .. } => CliError::NumericalQuality(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::MissingEquilibrium | ProbeError::BadTotals | ProbeError::BadFractions => {
                CliError::Validation(e.to_string())
            }
            ProbeError::Sim(se) => se.into(),
            ProbeError::SweepEntropyViolation { .. } => CliError::NumericalQuality(e.to_string()),
            _ => CliError::NumericalQuality(e.to_string()),
        }
    }
}

impl From<EquilibriumError> for CliError {
    fn from(e: EquilibriumError) -> Self {
        match e {
            EquilibriumError::SingularJacobian { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Envelope shared by all report JSON documents.
#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub command: String,
    pub scenario_hash: String,
    pub results: T,
    pub warnings: Vec<String>,
}

impl<T: Serialize> Report<T> {
    fn new(command: &str, scenario: &Scenario, results: T) -> Self {
        Self {
            command: command.to_string(),
            scenario_hash: scenario.hash.clone(),
            results,
            warnings: scenario.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Serialize)]
pub struct ComponentReport {
    pub reactions: (usize, usize),
    pub complexes: Vec<String>,
    pub profile: Option<String>,
    pub profile_consistent: bool,
}

#[derive(Debug, Serialize)]
pub struct AnalyzeResults {
    pub species: Vec<String>,
    pub n_species: usize,
    pub n_complexes: usize,
    pub n_reactions: usize,
    pub stoich_rank: usize,
    pub n_conservation_laws: usize,
    pub conservation_basis: Vec<Vec<f64>>,
    pub n_components: usize,
    pub components: Vec<ComponentReport>,
    /// True when no reaction connects two different strongly connected
    /// components of the complex graph.
    pub no_cross_component_edges: bool,
    pub cross_edges: Vec<usize>,
    /// True when each component's reactions share a single rate profile.
    pub profiles_consistent: bool,
}

/// Structural report: counts, rank, conservation basis, components, the
/// cross-edge verdict, and per-component profile consistency.
pub fn cmd_analyze(scenario: &Scenario) -> Report<AnalyzeResults> {
    let net = &scenario.net;
    let check = net.check_cross_edges();
    let components = net
        .components()
        .iter()
        .map(|range| {
            let rs = &net.reactions()[range.clone()];
            let profile = rs.first().map(|r| net.profiles()[r.profile].clone());
            let consistent = rs
                .iter()
                .all(|r| Some(&net.profiles()[r.profile]) == profile.as_ref());
            let mut complexes: Vec<String> = Vec::new();
            let comp_id = rs.first().map(|r| r.component);
            for (cid, &cc) in net.complex_components().iter().enumerate() {
                if Some(cc) == comp_id {
                    complexes.push(net.complexes()[cid].display(net.species()));
                }
            }
            ComponentReport {
                reactions: (range.start, range.end),
                complexes,
                profile,
                profile_consistent: consistent,
            }
        })
        .collect();
    let results = AnalyzeResults {
        species: net.species().to_vec(),
        n_species: net.n_species(),
        n_complexes: net.complexes().len(),
        n_reactions: net.reactions().len(),
        stoich_rank: net.stoich_rank(),
        n_conservation_laws: net.conservation_basis().len(),
        conservation_basis: net.conservation_basis().to_vec(),
        n_components: net.components().len(),
        components,
        no_cross_component_edges: check.holds,
        cross_edges: check.violations,
        profiles_consistent: net.profiles_consistent(),
    };
    Report::new("analyze", scenario, results)
}

#[derive(Debug, Serialize)]
pub struct EquilibriumResults {
    pub method: &'static str,
    pub totals: Vec<f64>,
    pub u_inf: Vec<f64>,
    pub cb_residual: f64,
    pub cons_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub strictly_positive: bool,
}

/// Solve for the equilibrium compatible with the scenario's conserved totals
/// (or explicit overrides).
pub fn cmd_equilibrium(
    scenario: &Scenario,
    totals_override: Option<Vec<f64>>,
) -> Result<Report<EquilibriumResults>, CliError> {
    let totals = match totals_override {
        Some(t) => {
            if t.len() != scenario.net.conservation_basis().len() {
                return Err(CliError::Validation(format!(
                    "expected {} totals, got {}",
                    scenario.net.conservation_basis().len(),
                    t.len()
                )));
            }
            t
        }
        None => scenario.totals.clone(),
    };
    let (res, method) = solve_equilibrium(&scenario.net, &scenario.special_chain, &totals)?;
    let strictly_positive = res.u_inf.iter().all(|&x| x > 0.0);
    Ok(Report::new(
        "equilibrium",
        scenario,
        EquilibriumResults {
            method,
            totals,
            u_inf: res.u_inf,
            cb_residual: res.cb_residual,
            cons_residual: res.cons_residual,
            iterations: res.iterations,
            converged: res.converged,
            strictly_positive,
        },
    ))
}

#[derive(Debug, Serialize)]
pub struct SimulateResults {
    pub records: usize,
    pub t_end: f64,
    pub decay: Option<DecayFit>,
    /// Final per-species L1 distances to the equilibrium, when tracked.
    pub final_l1: Option<Vec<f64>>,
    pub conservation_drift: f64,
    pub clamped_mass: f64,
    /// Total L1 change per unit time between the last two records.
    pub steady_rate: f64,
    /// Per-species max - min of the final state.
    pub spatial_variation: Vec<f64>,
    pub min_concentration: f64,
    pub entropy_violation: Option<crate::pde::EntropyViolation>,
    pub trajectory_csv: Option<String>,
    pub snapshot_csvs: Vec<String>,
}

/// Run the scenario's simulation, write `trajectory.csv` (and snapshots when
/// requested) into `out_dir`, and summarize. An entropy-monotonicity
/// violation is reported in the results and mapped to exit code 3 by
/// [`exit_hint`].
pub fn cmd_simulate(
    scenario: &Scenario,
    out_dir: Option<&Path>,
) -> Result<(Report<SimulateResults>, Trajectory), CliError> {
    let problem = scenario.problem();
    let traj = simulate(&scenario.u0, &problem, &scenario.sim)?;

    let mut trajectory_csv = None;
    let mut snapshot_csvs = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
        let path = dir.join("trajectory.csv");
        std::fs::write(&path, traj.to_csv()).map_err(|e| CliError::Io(e.to_string()))?;
        trajectory_csv = Some(path.display().to_string());
        for snap in &traj.snapshots {
            let path = dir.join(format!("snapshot_{:.6}.csv", snap.time));
            std::fs::write(&path, traj.snapshot_csv(&scenario.grid, snap))
                .map_err(|e| CliError::Io(e.to_string()))?;
            snapshot_csvs.push(path.display().to_string());
        }
        // Coefficient and diffusion fields as cell,value CSV for inspection.
        for (pid, field) in scenario.net.profiles().iter().zip(&scenario.alpha) {
            std::fs::write(
                dir.join(format!("alpha_{pid}.csv")),
                crate::spatial::field_to_csv(field.values()),
            )
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
        for (sp, field) in scenario.net.species().iter().zip(&scenario.diffusion) {
            std::fs::write(
                dir.join(format!("diffusion_{sp}.csv")),
                crate::spatial::field_to_csv(field.values()),
            )
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }

    let decay = if scenario.u_inf.is_some() {
        fit_decay_rate(&traj.times, &traj.entropy, None).ok()
    } else {
        None
    };
    let final_l1 = scenario
        .u_inf
        .as_ref()
        .map(|_| traj.l1_dist.last().cloned().unwrap_or_default());
    let spatial_variation = traj
        .final_state
        .u
        .iter()
        .map(|f| {
            let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = f.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        })
        .collect();

    let results = SimulateResults {
        records: traj.times.len(),
        t_end: *traj.times.last().unwrap_or(&0.0),
        decay,
        final_l1,
        conservation_drift: traj.max_drift,
        clamped_mass: traj.clamped_mass.last().copied().unwrap_or(0.0),
        steady_rate: traj.steady_rate,
        spatial_variation,
        min_concentration: traj.min_u.iter().copied().fold(f64::INFINITY, f64::min),
        entropy_violation: traj.entropy_violation,
        trajectory_csv,
        snapshot_csvs,
    };
    Ok((Report::new("simulate", scenario, results), traj))
}

/// Exit code for a finished simulate report (3 for flagged entropy growth).
pub fn exit_hint(results: &SimulateResults) -> i32 {
    if results.entropy_violation.is_some() {
        3
    } else {
        0
    }
}

/// Sample the D/E ratio over conservation-compatible random states.
pub fn cmd_probe(
    scenario: &Scenario,
    n_override: Option<usize>,
    seed_override: Option<u64>,
) -> Result<Report<ProbeReport>, CliError> {
    let problem = scenario.problem();
    let n = n_override.unwrap_or(scenario.probe.n);
    let seed = seed_override.unwrap_or(scenario.probe.seed);
    let report = eed_ratio_probe(&problem, n, seed, scenario.probe.roughness)?;
    Ok(Report::new("probe", scenario, report))
}

/// Mask-size sweep: one run per (fraction, seed), rate fit per run, and the
/// aggregate scaling fit. Writes `sweep.csv` into `out_dir`.
pub fn cmd_sweep(
    scenario: &Scenario,
    fractions_override: Option<Vec<f64>>,
    seeds_override: Option<Vec<u64>>,
    out_dir: Option<&Path>,
) -> Result<(Report<SweepReport>, Option<PathBuf>), CliError> {
    let fractions = fractions_override.unwrap_or_else(|| scenario.sweep.fractions.clone());
    let seeds = seeds_override.unwrap_or_else(|| scenario.sweep.seeds.clone());
    let cfg = scenario.sweep_sim();
    let report = omega_sweep(
        |fraction, seed| scenario.sweep_problem(fraction, seed),
        &fractions,
        &seeds,
        &cfg,
        None,
    )?;

    let mut csv_path = None;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
        let path = dir.join("sweep.csv");
        std::fs::write(&path, sweep_csv(&report)).map_err(|e| CliError::Io(e.to_string()))?;
        csv_path = Some(path);
    }
    Ok((Report::new("sweep", scenario, report), csv_path))
}

/// Sweep rows as `omega1,omega2,lambda,r2` CSV.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("omega1,omega2,lambda,r2\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            row.omega1_measure, row.omega2_measure, row.lambda, row.r_squared
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analyze_fig1a_structure() {
        let sc = Scenario::from_preset("fig1a").unwrap();
        let report = cmd_analyze(&sc);
        let r = &report.results;
        assert_eq!(r.n_species, 3);
        assert_eq!(r.n_reactions, 5);
        assert_eq!(r.n_components, 2);
        assert!(r.no_cross_component_edges);
        assert!(r.profiles_consistent);
        assert_eq!(r.n_conservation_laws, 0);
        assert!(report.to_json().contains("\"command\": \"analyze\""));
    }

    #[test]
    fn analyze_flags_cross_edges() {
        let text = "\
            network.inline = A -> B @ 1 p1 ; B -> C @ 1 p1\n\
            grid.n = 10\n\
            init.kind = uniform\n\
            init.values = 1, 1, 1\n";
        let sc = Scenario::from_text(text, None).unwrap();
        let report = cmd_analyze(&sc);
        assert!(!report.results.no_cross_component_edges);
        assert_eq!(report.results.cross_edges, vec![0, 1]);
    }

    #[test]
    fn equilibrium_special_closed_form() {
        let sc = Scenario::from_preset("thm2-measurable").unwrap();
        let report = cmd_equilibrium(&sc, Some(vec![7.0])).unwrap();
        assert_eq!(report.results.method, "closed-form");
        for v in &report.results.u_inf {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(report.results.converged);
        assert!(report.results.strictly_positive);

        let report = cmd_equilibrium(&sc, Some(vec![74.0])).unwrap();
        assert!((report.results.u_inf[0] - 16.0).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_rejects_bad_totals() {
        let sc = Scenario::from_preset("thm2-measurable").unwrap();
        let err = cmd_equilibrium(&sc, Some(vec![1.0, 2.0])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn fig1b_equilibrium_converges() {
        let sc = Scenario::from_preset("fig1b").unwrap();
        let report = cmd_equilibrium(&sc, None).unwrap();
        assert!(report.results.converged);
        assert!(report.results.cb_residual < 1e-10);
        assert!(report.results.strictly_positive);
    }
}
