//! Finite-volume time integration of mass-action reaction-diffusion systems
//! on a uniform grid with zero-flux boundaries.
//!
//! Reactions are evaluated explicitly cell by cell with rate fields
//! `k_r(x) = beta_r * alpha_l(x)`; diffusion advances implicitly by backward
//! Euler with harmonic-mean face coefficients, so a coefficient that vanishes
//! at a point blocks flux through it. Mass-action reactions are exactly
//! orthogonal to every conservation vector and the Neumann stencil sums to
//! zero, so the conserved totals drift only at rounding level. Positivity is
//! handled by a time-step admissibility check plus a hard floor whose clamped
//! mass is accounted per step.

use serde::Serialize;
use thiserror::Error;

use crate::crn::ReactionNetwork;
use crate::entropy;
use crate::linalg::{conjugate_gradient, TridiagFactor};
use crate::spatial::{CoefficientField, DiffusionField, Grid};

/// Increase of relative entropy between two records that flags a run as
/// numerically unsound.
pub const ENTROPY_INCREASE_LIMIT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state has {got} species fields, network has {expected}")]
    SpeciesCount { expected: usize, got: usize },
    #[error("field of species {species} has {got} cells, grid has {expected}")]
    CellCount {
        species: usize,
        expected: usize,
        got: usize,
    },
    #[error("state must be nonnegative and finite (species {species}, cell {cell}: {value})")]
    InvalidState {
        species: usize,
        cell: usize,
        value: f64,
    },
    #[error("config: {0}")]
    BadConfig(String),
    #[error(
        "time step too large: explicit reaction drives species {species} at cell {cell} to {value:.3e}"
    )]
    DtTooLarge {
        species: usize,
        cell: usize,
        value: f64,
    },
    #[error("diffusion solve for species {species} broke down at step {step}")]
    SolverBreakdown { species: usize, step: usize },
    #[error("problem: {0}")]
    BadProblem(String),
    #[error("epsilon list must be positive and strictly decreasing")]
    BadEpsList,
}

/// Per-species, per-cell concentrations at one time.
#[derive(Debug, Clone)]
pub struct State {
    pub u: Vec<Vec<f64>>,
    pub time: f64,
}

impl State {
    /// Spatially uniform state from per-species values.
    pub fn uniform(grid: &Grid, values: &[f64]) -> Self {
        Self {
            u: values.iter().map(|&v| vec![v; grid.n_cells()]).collect(),
            time: 0.0,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.u
            .iter()
            .flat_map(|f| f.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.u
            .iter()
            .flat_map(|f| f.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn validate(&self, m: usize, n_cells: usize) -> Result<(), SimError> {
        if self.u.len() != m {
            return Err(SimError::SpeciesCount {
                expected: m,
                got: self.u.len(),
            });
        }
        for (species, field) in self.u.iter().enumerate() {
            if field.len() != n_cells {
                return Err(SimError::CellCount {
                    species,
                    expected: n_cells,
                    got: field.len(),
                });
            }
            for (cell, &value) in field.iter().enumerate() {
                if !value.is_finite() || value < 0.0 {
                    return Err(SimError::InvalidState {
                        species,
                        cell,
                        value,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// Implicit backward-Euler diffusion, explicit reaction (default).
    ImexBackwardEuler,
    /// Fully explicit Euler.
    Explicit,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Summaries are recorded every this many steps.
    pub record_every: usize,
    pub scheme: Scheme,
    /// Concentrations are clamped up to this value after each step.
    pub positivity_floor: f64,
    /// Reaction saturation strength; 0 disables the
    /// `1 / (1 + eps * sum_j |f_j|)` damping of the reaction terms.
    pub saturation_eps: f64,
    /// Orders p of the polynomial energy to record (3-species chain only).
    pub hp_orders: Vec<u32>,
    /// Keep a full state snapshot at every record.
    pub keep_snapshots: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 1.0,
            record_every: 100,
            scheme: Scheme::ImexBackwardEuler,
            positivity_floor: 0.0,
            saturation_eps: 0.0,
            hp_orders: Vec::new(),
            keep_snapshots: false,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(SimError::BadConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.t_end < self.dt {
            return Err(SimError::BadConfig("t_end must be at least dt".into()));
        }
        if self.record_every == 0 {
            return Err(SimError::BadConfig("record_every must be >= 1".into()));
        }
        if self.saturation_eps < 0.0 || self.positivity_floor < 0.0 {
            return Err(SimError::BadConfig(
                "saturation_eps and positivity_floor must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// A network together with its spatial data and (when it exists) the
/// positive complex balanced equilibrium used for entropy tracking.
#[derive(Debug, Clone)]
pub struct Problem {
    pub net: ReactionNetwork,
    pub grid: Grid,
    /// One rate profile per network profile id.
    pub alpha: Vec<CoefficientField>,
    /// One diffusion field per species.
    pub diffusion: Vec<DiffusionField>,
    /// Entropy/dissipation reference; `None` disables entropy tracking.
    pub u_inf: Option<Vec<f64>>,
}

impl Problem {
    pub fn new(
        net: ReactionNetwork,
        grid: Grid,
        alpha: Vec<CoefficientField>,
        diffusion: Vec<DiffusionField>,
        u_inf: Option<Vec<f64>>,
    ) -> Result<Self, SimError> {
        if alpha.len() != net.profiles().len() {
            return Err(SimError::BadProblem(format!(
                "{} rate profiles for {} profile ids",
                alpha.len(),
                net.profiles().len()
            )));
        }
        if diffusion.len() != net.n_species() {
            return Err(SimError::BadProblem(format!(
                "{} diffusion fields for {} species",
                diffusion.len(),
                net.n_species()
            )));
        }
        for f in alpha.iter().map(|a| a.values()) {
            if f.len() != grid.n_cells() {
                return Err(SimError::BadProblem("profile/grid size mismatch".into()));
            }
        }
        for f in diffusion.iter().map(|d| d.values()) {
            if f.len() != grid.n_cells() {
                return Err(SimError::BadProblem("diffusion/grid size mismatch".into()));
            }
        }
        if let Some(u_inf) = &u_inf {
            if u_inf.len() != net.n_species() || u_inf.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                return Err(SimError::BadProblem(
                    "equilibrium must be strictly positive with one entry per species".into(),
                ));
            }
        }
        Ok(Self {
            net,
            grid,
            alpha,
            diffusion,
            u_inf,
        })
    }

    /// Entropy dissipation of a state under this problem's fields.
    pub fn dissipation(&self, u: &[Vec<f64>]) -> Option<entropy::Dissipation> {
        self.u_inf.as_ref().map(|u_inf| {
            entropy::entropy_dissipation(&self.net, &self.grid, &self.alpha, &self.diffusion, u, u_inf)
        })
    }
}

/// Finite-volume divergence of `d grad u` with harmonic-mean face
/// coefficients and zero-flux boundaries. The discrete integral of the
/// output vanishes up to rounding.
pub fn diffusion_apply(d: &DiffusionField, grid: &Grid, u: &[f64]) -> Result<Vec<f64>, SimError> {
    if u.len() != grid.n_cells() {
        return Err(SimError::CellCount {
            species: 0,
            expected: grid.n_cells(),
            got: u.len(),
        });
    }
    let mut out = vec![0.0; u.len()];
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    for (a, b) in grid.faces() {
        let d_face = harmonic_mean(d.value(a), d.value(b));
        if d_face == 0.0 {
            continue;
        }
        let flux = d_face * (u[b] - u[a]) * inv_h2;
        out[a] += flux;
        out[b] -= flux;
    }
    Ok(out)
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

enum DiffusionSolver {
    /// Prefactored `I - dt A` per species (1D).
    Direct(Vec<TridiagFactor>),
    /// Conjugate gradients on `I - dt A` per species (2D).
    Iterative,
    None,
}

/// Reusable stepper owning per-cell rate tables and the factored or
/// implicitly applied diffusion operators.
pub struct Stepper<'a> {
    problem: &'a Problem,
    dt: f64,
    saturation_eps: f64,
    positivity_floor: f64,
    /// k_r(x) per cell, reaction-major inner index.
    k_cells: Vec<Vec<f64>>,
    /// Harmonic-mean face coefficients per species.
    face_d: Vec<Vec<f64>>,
    faces: Vec<(usize, usize)>,
    solver: DiffusionSolver,
    /// Cumulative clamped mass.
    pub clamped_mass: f64,
    step_count: usize,
    // scratch
    u_loc: Vec<f64>,
    f_loc: Vec<f64>,
    rhs: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a Problem, cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let grid = &problem.grid;
        let n_cells = grid.n_cells();
        let n_reactions = problem.net.reactions().len();

        let mut k_cells = vec![vec![0.0; n_reactions]; n_cells];
        for (r, rx) in problem.net.reactions().iter().enumerate() {
            let alpha = &problem.alpha[rx.profile];
            for (c, kc) in k_cells.iter_mut().enumerate() {
                kc[r] = rx.beta * alpha.value(c);
            }
        }

        let faces = grid.faces();
        let face_d: Vec<Vec<f64>> = problem
            .diffusion
            .iter()
            .map(|d| {
                faces
                    .iter()
                    .map(|&(a, b)| harmonic_mean(d.value(a), d.value(b)))
                    .collect()
            })
            .collect();

        let solver = match (cfg.scheme, grid.dim()) {
            (Scheme::Explicit, _) => DiffusionSolver::None,
            (Scheme::ImexBackwardEuler, 1) => {
                let inv_h2 = 1.0 / (grid.h() * grid.h());
                let mut factors = Vec::with_capacity(problem.net.n_species());
                for fd in &face_d {
                    let mut diag = vec![1.0; n_cells];
                    let mut lower = vec![0.0; n_cells - 1];
                    let mut upper = vec![0.0; n_cells - 1];
                    for (i, &df) in fd.iter().enumerate() {
                        let w = cfg.dt * df * inv_h2;
                        diag[i] += w;
                        diag[i + 1] += w;
                        lower[i] = -w;
                        upper[i] = -w;
                    }
                    factors.push(
                        TridiagFactor::new(&diag, &lower, &upper)
                            .ok_or(SimError::SolverBreakdown { species: 0, step: 0 })?,
                    );
                }
                DiffusionSolver::Direct(factors)
            }
            (Scheme::ImexBackwardEuler, _) => DiffusionSolver::Iterative,
        };

        Ok(Self {
            problem,
            dt: cfg.dt,
            saturation_eps: cfg.saturation_eps,
            positivity_floor: cfg.positivity_floor,
            k_cells,
            face_d,
            faces,
            solver,
            clamped_mass: 0.0,
            step_count: 0,
            u_loc: vec![0.0; problem.net.n_species()],
            f_loc: vec![0.0; problem.net.n_species()],
            rhs: vec![0.0; n_cells],
        })
    }

    /// Advance the state by one time step in place.
    pub fn advance(&mut self, state: &mut State) -> Result<(), SimError> {
        let m = self.problem.net.n_species();
        let grid = &self.problem.grid;
        let n_cells = grid.n_cells();
        self.step_count += 1;

        let scale = 1.0 + state.max_value();
        let admissible = -1e-12 * scale;

        // Explicit reaction substep.
        for c in 0..n_cells {
            for i in 0..m {
                self.u_loc[i] = state.u[i][c];
            }
            self.problem
                .net
                .rates_into(&self.k_cells[c], &self.u_loc, &mut self.f_loc);
            let damp = if self.saturation_eps > 0.0 {
                let total: f64 = self.f_loc.iter().map(|f| f.abs()).sum();
                1.0 / (1.0 + self.saturation_eps * total)
            } else {
                1.0
            };
            for i in 0..m {
                let next = state.u[i][c] + self.dt * damp * self.f_loc[i];
                if next < admissible {
                    return Err(SimError::DtTooLarge {
                        species: i,
                        cell: c,
                        value: next,
                    });
                }
                state.u[i][c] = next;
            }
        }

        // Diffusion substep.
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        match &self.solver {
            DiffusionSolver::Direct(factors) => {
                for (i, factor) in factors.iter().enumerate() {
                    factor.solve(&mut state.u[i]);
                }
            }
            DiffusionSolver::Iterative => {
                for i in 0..m {
                    let fd = &self.face_d[i];
                    let faces = &self.faces;
                    let dt = self.dt;
                    let apply = |x: &[f64], out: &mut [f64]| {
                        out.copy_from_slice(x);
                        for (f, &(a, b)) in faces.iter().enumerate() {
                            let w = dt * fd[f] * inv_h2;
                            if w != 0.0 {
                                let flux = w * (x[b] - x[a]);
                                out[a] -= flux;
                                out[b] += flux;
                            }
                        }
                    };
                    self.rhs.copy_from_slice(&state.u[i]);
                    // Warm start from the pre-diffusion state.
                    let iters = conjugate_gradient(
                        apply,
                        &self.rhs,
                        &mut state.u[i],
                        1e-12,
                        50 * n_cells,
                        false,
                    );
                    if iters.is_none() {
                        return Err(SimError::SolverBreakdown {
                            species: i,
                            step: self.step_count,
                        });
                    }
                }
            }
            DiffusionSolver::None => {
                for i in 0..m {
                    self.rhs.copy_from_slice(&state.u[i]);
                    for (f, &(a, b)) in self.faces.iter().enumerate() {
                        let w = self.dt * self.face_d[i][f] * inv_h2;
                        if w != 0.0 {
                            let flux = w * (self.rhs[b] - self.rhs[a]);
                            state.u[i][a] += flux;
                            state.u[i][b] -= flux;
                        }
                    }
                }
            }
        }

        // Positivity floor with clamp accounting.
        let meas = grid.cell_measure();
        for field in state.u.iter_mut() {
            for v in field.iter_mut() {
                if *v < self.positivity_floor {
                    self.clamped_mass += (self.positivity_floor - *v) * meas;
                    *v = self.positivity_floor;
                }
            }
        }

        state.time += self.dt;
        Ok(())
    }
}

/// One IMEX step of the given state (convenience wrapper around
/// [`Stepper`]); retains the stepper's clamp accounting in the result.
pub fn step(state: &State, problem: &Problem, cfg: &SimConfig) -> Result<State, SimError> {
    state.validate(problem.net.n_species(), problem.grid.n_cells())?;
    let mut stepper = Stepper::new(problem, cfg)?;
    let mut next = state.clone();
    stepper.advance(&mut next)?;
    Ok(next)
}

/// Flagged entropy increase between two records.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyViolation {
    pub time: f64,
    pub increase: f64,
}

/// Recorded summaries of a run. Rows align with `times`; entropy-related
/// columns are NaN when the problem has no equilibrium reference.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub fisher: Vec<f64>,
    /// Conserved totals per record.
    pub totals: Vec<Vec<f64>>,
    /// Per-species L1 distance to the equilibrium per record.
    pub l1_dist: Vec<Vec<f64>>,
    pub min_u: Vec<f64>,
    /// Cumulative clamped mass per record.
    pub clamped_mass: Vec<f64>,
    pub hp_orders: Vec<u32>,
    pub hp: Vec<Vec<f64>>,
    pub snapshots: Vec<State>,
    pub final_state: State,
    pub entropy_violation: Option<EntropyViolation>,
    /// Max relative drift of the conserved totals over the run.
    pub max_drift: f64,
    /// Total L1 change per unit time between the last two records.
    pub steady_rate: f64,
}

impl Trajectory {
    /// Render as CSV with header
    /// `t,E,D,total_1..K,l1_dist_1..m,min_u,clamped_mass[,Hp_<p>...]`,
    /// 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let k = self.totals.first().map_or(0, |t| t.len());
        let m = self.l1_dist.first().map_or(0, |t| t.len());
        let mut header = String::from("t,E,D");
        for j in 1..=k {
            header.push_str(&format!(",total_{j}"));
        }
        for i in 1..=m {
            header.push_str(&format!(",l1_dist_{i}"));
        }
        header.push_str(",min_u,clamped_mass");
        for p in &self.hp_orders {
            header.push_str(&format!(",Hp_{p}"));
        }
        header.push('\n');

        let mut out = header;
        for row in 0..self.times.len() {
            let mut cols = vec![
                fmt(self.times[row]),
                fmt(self.entropy[row]),
                fmt(self.dissipation[row]),
            ];
            for j in 0..k {
                cols.push(fmt(self.totals[row][j]));
            }
            for i in 0..m {
                cols.push(fmt(self.l1_dist[row][i]));
            }
            cols.push(fmt(self.min_u[row]));
            cols.push(fmt(self.clamped_mass[row]));
            for p in 0..self.hp_orders.len() {
                cols.push(fmt(self.hp[row][p]));
            }
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }

    /// Snapshot CSV: `cell,x[,y],u_1..m`.
    pub fn snapshot_csv(&self, grid: &Grid, snapshot: &State) -> String {
        let m = snapshot.u.len();
        let mut header = String::from("cell,x");
        if grid.dim() == 2 {
            header.push_str(",y");
        }
        for i in 1..=m {
            header.push_str(&format!(",u_{i}"));
        }
        header.push('\n');
        let mut out = header;
        for c in 0..grid.n_cells() {
            let center = grid.center(c);
            let mut cols = vec![c.to_string()];
            for x in center {
                cols.push(fmt(x));
            }
            for field in &snapshot.u {
                cols.push(fmt(field[c]));
            }
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Integrate from `u0` to `t_end`, recording summaries every
/// `record_every` steps (plus the initial and final states). Terminates
/// early with a flag when the relative entropy increases by more than
/// [`ENTROPY_INCREASE_LIMIT`] between records.
pub fn simulate(u0: &State, problem: &Problem, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    let m = problem.net.n_species();
    let n_cells = problem.grid.n_cells();
    u0.validate(m, n_cells)?;
    cfg.validate()?;
    let track_hp = !cfg.hp_orders.is_empty();
    if track_hp && m != 3 {
        return Err(SimError::BadConfig(
            "polynomial energies are defined for the 3-species chain only".into(),
        ));
    }

    let n_steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let mut stepper = Stepper::new(problem, cfg)?;
    let mut state = u0.clone();
    state.time = 0.0;

    let mut traj = Trajectory {
        times: Vec::new(),
        entropy: Vec::new(),
        dissipation: Vec::new(),
        fisher: Vec::new(),
        totals: Vec::new(),
        l1_dist: Vec::new(),
        min_u: Vec::new(),
        clamped_mass: Vec::new(),
        hp_orders: cfg.hp_orders.clone(),
        hp: Vec::new(),
        snapshots: Vec::new(),
        final_state: state.clone(),
        entropy_violation: None,
        max_drift: 0.0,
        steady_rate: f64::NAN,
    };

    let meas = problem.grid.cell_measure();
    let mut totals0: Option<Vec<f64>> = None;
    let mut prev_entropy = f64::INFINITY;
    let mut prev_record: Option<State> = None;

    let record = |traj: &mut Trajectory,
                      state: &State,
                      clamped: f64,
                      prev_entropy: &mut f64,
                      prev_record: &mut Option<State>,
                      totals0: &mut Option<Vec<f64>>|
     -> Option<EntropyViolation> {
        traj.times.push(state.time);
        let (e, d, fisher, l1) = match &problem.u_inf {
            Some(u_inf) => {
                let e = entropy::relative_entropy(&state.u, u_inf, &problem.grid);
                let d = entropy::entropy_dissipation(
                    &problem.net,
                    &problem.grid,
                    &problem.alpha,
                    &problem.diffusion,
                    &state.u,
                    u_inf,
                );
                let l1: Vec<f64> = state
                    .u
                    .iter()
                    .zip(u_inf)
                    .map(|(f, &z)| f.iter().map(|&w| (w - z).abs()).sum::<f64>() * meas)
                    .collect();
                (e, d.total(), d.fisher, l1)
            }
            None => (f64::NAN, f64::NAN, f64::NAN, vec![f64::NAN; m]),
        };
        traj.entropy.push(e);
        traj.dissipation.push(d);
        traj.fisher.push(fisher);
        let totals = problem
            .net
            .conserved_totals(&state.u, meas)
            .expect("validated state");
        match totals0 {
            None => *totals0 = Some(totals.clone()),
            Some(t0) => {
                for (a, b) in totals.iter().zip(t0.iter()) {
                    let drift = (a - b).abs() / (1.0 + b.abs());
                    if drift > traj.max_drift {
                        traj.max_drift = drift;
                    }
                }
            }
        }
        traj.totals.push(totals);
        traj.l1_dist.push(l1);
        traj.min_u.push(state.min_value());
        traj.clamped_mass.push(clamped);
        if track_hp {
            traj.hp.push(
                traj.hp_orders
                    .iter()
                    .map(|&p| entropy::h_p(&state.u, p, &problem.grid))
                    .collect(),
            );
        }
        if cfg.keep_snapshots {
            traj.snapshots.push(state.clone());
        }
        if let Some(prev) = prev_record {
            let dt_rec = state.time - prev.time;
            if dt_rec > 0.0 {
                let change: f64 = state
                    .u
                    .iter()
                    .zip(&prev.u)
                    .map(|(a, b)| {
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| (x - y).abs())
                            .sum::<f64>()
                            * meas
                    })
                    .sum();
                traj.steady_rate = change / dt_rec;
            }
        }
        *prev_record = Some(state.clone());

        let mut violation = None;
        if e.is_finite() {
            if e > *prev_entropy + ENTROPY_INCREASE_LIMIT {
                violation = Some(EntropyViolation {
                    time: state.time,
                    increase: e - *prev_entropy,
                });
            }
            *prev_entropy = e;
        }
        violation
    };

    record(
        &mut traj,
        &state,
        0.0,
        &mut prev_entropy,
        &mut prev_record,
        &mut totals0,
    );

    for s in 1..=n_steps {
        stepper.advance(&mut state)?;
        if s % cfg.record_every == 0 || s == n_steps {
            if let Some(v) = record(
                &mut traj,
                &state,
                stepper.clamped_mass,
                &mut prev_entropy,
                &mut prev_record,
                &mut totals0,
            ) {
                traj.entropy_violation = Some(v);
                break;
            }
        }
    }

    traj.final_state = state;
    Ok(traj)
}

/// One run per epsilon with the diffusion of `species` shifted by epsilon:
/// used to test decay-rate stability of the regularized problem as the shift
/// vanishes. The list must be positive and strictly decreasing.
pub fn epsilon_regularized_run(
    u0: &State,
    problem: &Problem,
    cfg: &SimConfig,
    species: usize,
    eps_list: &[f64],
) -> Result<Vec<Trajectory>, SimError> {
    if eps_list.is_empty()
        || eps_list.iter().any(|&e| !e.is_finite() || e <= 0.0)
        || eps_list.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(SimError::BadEpsList);
    }
    if species >= problem.net.n_species() {
        return Err(SimError::BadProblem(format!(
            "species {species} out of range"
        )));
    }
    let mut runs = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut shifted = problem.clone();
        shifted.diffusion[species] = problem.diffusion[species].shifted(eps);
        runs.push(simulate(u0, &shifted, cfg)?);
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::parse_network;
    use crate::spatial::SubdomainMask;
    use crate::testnets::SPECIAL;

    fn special_problem(n: usize, u_inf: Option<Vec<f64>>) -> Problem {
        let net = parse_network(SPECIAL).unwrap();
        let grid = Grid::new(1, n).unwrap();
        let alpha = vec![
            CoefficientField::constant(&grid, 1.0),
            CoefficientField::constant(&grid, 1.0),
        ];
        let diffusion = vec![DiffusionField::constant(&grid, 1.0); 3];
        Problem::new(net, grid, alpha, diffusion, u_inf).unwrap()
    }

    #[test]
    fn diffusion_apply_basics() {
        let grid = Grid::new(1, 4).unwrap();
        let d = DiffusionField::constant(&grid, 1.0);
        // Constant field: no flux.
        let out = diffusion_apply(&d, &grid, &[2.0; 4]).unwrap();
        assert_eq!(out, vec![0.0; 4]);
        // Zero coefficient: no flux.
        let d0 = DiffusionField::constant(&grid, 0.0);
        let out = diffusion_apply(&d0, &grid, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0; 4]);
        // Conservation of the stencil.
        let out = diffusion_apply(&d, &grid, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        let total: f64 = out.iter().sum::<f64>() * grid.cell_measure();
        assert!(total.abs() < 1e-15);
        assert!(diffusion_apply(&d, &grid, &[1.0; 3]).is_err());
    }

    #[test]
    fn equilibrium_state_is_a_fixed_point() {
        let problem = special_problem(16, Some(vec![1.0, 1.0, 1.0]));
        let state = State::uniform(&problem.grid, &[1.0, 1.0, 1.0]);
        let cfg = SimConfig::default();
        let next = step(&state, &problem, &cfg).unwrap();
        for (a, b) in next.u.iter().flatten().zip(state.u.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_heat_step_conserves_mass() {
        let net = parse_network("A <=> B @ 1 p1").unwrap();
        let grid = Grid::new(1, 32).unwrap();
        let alpha = vec![CoefficientField::zero(&grid)];
        let diffusion = vec![
            DiffusionField::constant(&grid, 0.7),
            DiffusionField::constant(&grid, 0.3),
        ];
        let problem = Problem::new(net, grid.clone(), alpha, diffusion, None).unwrap();
        let mut state = State::uniform(&grid, &[0.0, 0.0]);
        for c in 0..grid.n_cells() {
            state.u[0][c] = if c < 16 { 2.0 } else { 0.5 };
            state.u[1][c] = (c as f64 * 0.37).sin().abs();
        }
        let mass_before: f64 = state.u[0].iter().sum::<f64>() * grid.cell_measure();
        let next = step(&state, &problem, &SimConfig::default()).unwrap();
        let mass_after: f64 = next.u[0].iter().sum::<f64>() * grid.cell_measure();
        assert!((mass_after - mass_before).abs() < 1e-13);
    }

    #[test]
    fn special_step_moves_in_the_right_direction() {
        // From (2,1,1): u2^2 - u1 = -1, so u1 drops and u2 rises everywhere.
        let problem = special_problem(8, None);
        let state = State::uniform(&problem.grid, &[2.0, 1.0, 1.0]);
        let cfg = SimConfig {
            dt: 1e-3,
            ..SimConfig::default()
        };
        let next = step(&state, &problem, &cfg).unwrap();
        for c in 0..8 {
            assert!(next.u[0][c] < 2.0);
            assert!(next.u[1][c] > 1.0);
        }
    }

    #[test]
    fn saturation_damps_reaction_rates() {
        let problem = special_problem(4, None);
        let state = State::uniform(&problem.grid, &[9.0, 0.1, 0.1]);
        let plain = step(
            &state,
            &problem,
            &SimConfig {
                dt: 1e-3,
                ..SimConfig::default()
            },
        )
        .unwrap();
        let damped = step(
            &state,
            &problem,
            &SimConfig {
                dt: 1e-3,
                saturation_eps: 1.0,
                ..SimConfig::default()
            },
        )
        .unwrap();
        let moved_plain = (plain.u[0][0] - 9.0).abs();
        let moved_damped = (damped.u[0][0] - 9.0).abs();
        assert!(moved_damped < moved_plain);
        assert!(moved_damped > 0.0);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let problem = special_problem(4, None);
        // u2^2 - u1 = -9 at u = (9, 0, 1e-14): a large dt empties u1 to
        // below the admissible negative tolerance in one substep.
        let state = State::uniform(&problem.grid, &[9.0, 0.0, 0.0]);
        let cfg = SimConfig {
            dt: 2.0,
            t_end: 2.0,
            ..SimConfig::default()
        };
        assert!(matches!(
            step(&state, &problem, &cfg),
            Err(SimError::DtTooLarge { .. })
        ));
    }

    #[test]
    fn simulate_from_equilibrium_is_flat() {
        let problem = special_problem(16, Some(vec![1.0, 1.0, 1.0]));
        let state = State::uniform(&problem.grid, &[1.0, 1.0, 1.0]);
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 0.05,
            record_every: 10,
            ..SimConfig::default()
        };
        let traj = simulate(&state, &problem, &cfg).unwrap();
        for &e in &traj.entropy {
            assert!(e.abs() < 1e-12);
        }
        assert!(traj.entropy_violation.is_none());
        assert!(traj.max_drift < 1e-12);
    }

    #[test]
    fn simulate_decays_entropy_and_conserves_mass() {
        let problem = special_problem(32, Some(vec![1.0, 1.0, 1.0]));
        let state = State::uniform(&problem.grid, &[0.5, 1.5, 2.0]); // mass 7
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 1.0,
            record_every: 50,
            hp_orders: vec![1, 2],
            ..SimConfig::default()
        };
        let traj = simulate(&state, &problem, &cfg).unwrap();
        assert!(traj.entropy_violation.is_none());
        for w in traj.entropy.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "entropy rose: {w:?}");
        }
        for w in traj.hp.windows(2) {
            assert!(w[1][0] <= w[0][0] + 1e-10);
            assert!(w[1][1] <= w[0][1] + 1e-10);
        }
        assert!(traj.max_drift <= 1e-8);
        assert!(traj.min_u.iter().all(|&v| v >= 0.0));
        assert_eq!(traj.clamped_mass.last().copied().unwrap(), 0.0);
    }

    #[test]
    fn masked_reactions_still_conserve() {
        let net = parse_network(SPECIAL).unwrap();
        let grid = Grid::new(1, 40).unwrap();
        let m1 = SubdomainMask::from_intervals(&grid, &[(0.0, 0.3)]).unwrap();
        let m2 = SubdomainMask::from_intervals(&grid, &[(0.6, 0.9)]).unwrap();
        let alpha = vec![
            CoefficientField::masked(m1, 1.0),
            CoefficientField::masked(m2, 1.0),
        ];
        let diffusion = vec![DiffusionField::constant(&grid, 1.0); 3];
        let problem = Problem::new(net, grid.clone(), alpha, diffusion, None).unwrap();
        let state = State::uniform(&grid, &[1.0, 0.5, 1.0]);
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 0.5,
            record_every: 100,
            ..SimConfig::default()
        };
        let traj = simulate(&state, &problem, &cfg).unwrap();
        assert!(traj.max_drift <= 1e-10);
    }

    #[test]
    fn csv_layout_matches_contract() {
        let problem = special_problem(8, Some(vec![1.0, 1.0, 1.0]));
        let state = State::uniform(&problem.grid, &[0.5, 1.5, 2.0]);
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 0.01,
            record_every: 5,
            hp_orders: vec![1, 4],
            ..SimConfig::default()
        };
        let traj = simulate(&state, &problem, &cfg).unwrap();
        let csv = traj.to_csv();
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "t,E,D,total_1,l1_dist_1,l1_dist_2,l1_dist_3,min_u,clamped_mass,Hp_1,Hp_4"
        );
        // 17 significant digits.
        let second = csv.lines().nth(1).unwrap();
        assert!(second.split(',').next().unwrap().contains("e"));
        // Byte determinism.
        let traj2 = simulate(&state, &problem, &cfg).unwrap();
        assert_eq!(csv, traj2.to_csv());
    }

    #[test]
    fn epsilon_runs_shift_only_the_chosen_species() {
        let net = parse_network(SPECIAL).unwrap();
        let grid = Grid::new(1, 16).unwrap();
        let alpha = vec![
            CoefficientField::constant(&grid, 1.0),
            CoefficientField::constant(&grid, 1.0),
        ];
        let d3 = DiffusionField::vanishing(&grid, &[0.5], 1.0).unwrap();
        let diffusion = vec![
            DiffusionField::constant(&grid, 1.0),
            DiffusionField::constant(&grid, 1.0),
            d3,
        ];
        let problem = Problem::new(net, grid.clone(), alpha, diffusion, Some(vec![1.0; 3])).unwrap();
        let state = State::uniform(&grid, &[1.2, 0.8, 0.6]);
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 0.02,
            record_every: 10,
            ..SimConfig::default()
        };
        let runs = epsilon_regularized_run(&state, &problem, &cfg, 2, &[1e-2]).unwrap();
        assert_eq!(runs.len(), 1);
        assert!(matches!(
            epsilon_regularized_run(&state, &problem, &cfg, 2, &[1e-3, 1e-2]),
            Err(SimError::BadEpsList)
        ));
    }

    #[test]
    fn explicit_scheme_agrees_with_imex_at_small_dt() {
        let problem = special_problem(16, None);
        let mut state = State::uniform(&problem.grid, &[0.5, 1.5, 2.0]);
        for c in 0..16 {
            state.u[0][c] += 0.1 * (c as f64 * 0.4).sin();
        }
        let mk = |scheme| SimConfig {
            dt: 1e-5,
            t_end: 0.01,
            record_every: 1000,
            scheme,
            ..SimConfig::default()
        };
        let imex = simulate(&state, &problem, &mk(Scheme::ImexBackwardEuler)).unwrap();
        let explicit = simulate(&state, &problem, &mk(Scheme::Explicit)).unwrap();
        for (a, b) in imex
            .final_state
            .u
            .iter()
            .flatten()
            .zip(explicit.final_state.u.iter().flatten())
        {
            assert!((a - b).abs() < 1e-4);
        }
    }
}
