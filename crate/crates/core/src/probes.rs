//! Randomized probes of the entropy-entropy dissipation inequality: sample
//! conservation-compatible positive states and report the empirical lower
//! tail of D/E, and sweep the reaction-mask sizes to expose how the fitted
//! decay rate scales with the masked measures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;



use crate::crn::ReactionNetwork;
use crate::entropy::{self, fit_decay_rate};
use crate::pde::{simulate, Problem, SimConfig, SimError, State};
use crate::spatial::Grid;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("projection onto the conservation manifold failed after {retries} resamples")]
    ProjectionFailed { retries: usize },
    #[error("totals must be strictly positive and finite")]
    BadTotals,
    #[error("probe needs an equilibrium reference on the problem")]
    MissingEquilibrium,
    #[error("probe needs at least one sample")]
    NoSamples,
    #[error("sweep member (fraction {fraction}, seed {seed}) failed entropy monotonicity")]
    SweepEntropyViolation { fraction: f64, seed: u64 },
    #[error("sweep fractions must lie in (0, 1]")]
    BadFractions,
    #[error("decay fit failed for fraction {fraction}, seed {seed}: {source}")]
    SweepFit {
        fraction: f64,
        seed: u64,
        source: entropy::FitError,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Summary of the sample attaining the smallest D/E ratio.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ArgminSummary {
    pub sample_index: usize,
    pub entropy: f64,
    pub dissipation: f64,
    pub min_concentration: f64,
    pub max_concentration: f64,
}

/// Empirical lower tail of D/E over sampled compatible states. The minimum
/// is a one-sided estimate: an upper bound on the true infimum.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ProbeReport {
    pub n_samples: usize,
    /// Samples actually used (states at equilibrium are skipped).
    pub n_used: usize,
    pub min_ratio: f64,
    pub q05: f64,
    pub q50: f64,
    pub argmin: ArgminSummary,
    pub seed: u64,
    pub roughness: f64,
}

/// Draw a strictly positive per-species field whose conserved totals match
/// `totals` to 1e-10 relative.
///
/// Independent log-normal fields (log standard deviation `roughness`) are
/// corrected by per-species positive factors found by a minimum-norm
/// Gauss-Newton iteration in log space on the conservation equations. On
/// projection failure the fields are redrawn with a salted seed, up to 10
/// times.
pub fn sample_compatible_state(
    net: &ReactionNetwork,
    grid: &Grid,
    totals: &[f64],
    seed: u64,
    roughness: f64,
) -> Result<Vec<Vec<f64>>, ProbeError> {
    assert_eq!(totals.len(), net.conservation_basis().len());
    if totals.iter().any(|&t| !t.is_finite() || t <= 0.0) {
        return Err(ProbeError::BadTotals);
    }
    assert!(roughness >= 0.0);

    let m = net.n_species();
    let n_cells = grid.n_cells();
    for retry in 0..10 {
        let salted = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(retry));
        let mut rng = ChaCha8Rng::seed_from_u64(salted);
        let mut fields: Vec<Vec<f64>> = Vec::with_capacity(m);
        for _ in 0..m {
            fields.push(
                (0..n_cells)
                    .map(|_| {
                        let xi: f64 = StandardNormal.sample(&mut rng);
                        (roughness * xi).exp()
                    })
                    .collect(),
            );
        }
        let averages: Vec<f64> = fields
            .iter()
            .map(|f| f.iter().sum::<f64>() * grid.cell_measure())
            .collect();
        if let Some(scales) = project_scales(net, &averages, totals) {
            for (field, s) in fields.iter_mut().zip(&scales) {
                for v in field.iter_mut() {
                    *v *= s;
                }
            }
            debug_assert!(fields.iter().flatten().all(|&v| v > 0.0));
            let achieved = net
                .conserved_totals(&fields, grid.cell_measure())
                .expect("consistent sizes");
            let ok = achieved
                .iter()
                .zip(totals)
                .all(|(a, t)| (a - t).abs() <= 1e-10 * (1.0 + t.abs()));
            if ok {
                return Ok(fields);
            }
        }
    }
    Err(ProbeError::ProjectionFailed { retries: 10 })
}

/// Positive factors s with sum_i q_ji s_i a_i = T_j for all j, found by
/// minimum-norm Gauss-Newton steps on log s starting from s = 1.
fn project_scales(net: &ReactionNetwork, averages: &[f64], totals: &[f64]) -> Option<Vec<f64>> {
    crate::equilibrium::minimum_norm_positive_scales(net.conservation_basis(), averages, totals)
}

/// Sample `n` compatible states and report the empirical distribution of
/// D/E against the problem's equilibrium. Deterministic per
/// (seed, n, roughness, grid).
pub fn eed_ratio_probe(
    problem: &Problem,
    n: usize,
    seed: u64,
    roughness: f64,
) -> Result<ProbeReport, ProbeError> {
    let u_inf = problem
        .u_inf
        .as_ref()
        .ok_or(ProbeError::MissingEquilibrium)?;
    if n == 0 {
        return Err(ProbeError::NoSamples);
    }
    // Totals of the (homogeneous) equilibrium on the unit-measure domain.
    let totals: Vec<f64> = problem
        .net
        .conservation_basis()
        .iter()
        .map(|q| q.iter().zip(u_inf).map(|(a, b)| a * b).sum())
        .collect();

    let mut ratios: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut argmin: Option<ArgminSummary> = None;
    for i in 0..n {
        let state = sample_compatible_state(
            &problem.net,
            &problem.grid,
            &totals,
            seed.wrapping_add(i as u64),
            roughness,
        )?;
        let e = entropy::relative_entropy(&state, u_inf, &problem.grid);
        if e <= 0.0 {
            continue; // sampled the equilibrium itself
        }
        let d = problem.dissipation(&state).expect("u_inf present").total();
        let ratio = d / e;
        ratios.push((ratio, i));
        let better = argmin.as_ref().is_none_or(|a| ratio < a.dissipation / a.entropy);
        if better {
            let min_c = state.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            let max_c = state
                .iter()
                .flatten()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            argmin = Some(ArgminSummary {
                sample_index: i,
                entropy: e,
                dissipation: d,
                min_concentration: min_c,
                max_concentration: max_c,
            });
        }
    }
    let argmin = argmin.ok_or(ProbeError::NoSamples)?;
    ratios.sort_by(|a, b| a.0.total_cmp(&b.0));
    let quantile = |q: f64| -> f64 {
        let idx = ((ratios.len() - 1) as f64 * q).floor() as usize;
        ratios[idx].0
    };
    Ok(ProbeReport {
        n_samples: n,
        n_used: ratios.len(),
        min_ratio: ratios[0].0,
        q05: quantile(0.05),
        q50: quantile(0.50),
        argmin,
        seed,
        roughness,
    })
}

/// One sweep member: fitted decay rate at given mask measures.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub seed: u64,
    pub omega1_measure: f64,
    pub omega2_measure: f64,
    pub lambda: f64,
    pub lambda_se: f64,
    pub r_squared: f64,
}

/// Sweep result with the least-squares fit of `1/lambda` against
/// `1/|omega1| + 1/|omega2|`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Intercept a of 1/lambda = a + b x.
    pub intercept: f64,
    /// Slope b of 1/lambda = a + b x (expected >= 0).
    pub slope: f64,
    /// Mean fitted rate per fraction never increases as the masks shrink
    /// (within twice the pooled fit standard error).
    pub monotone: bool,
}

/// Run one simulation per (fraction, seed), fit the entropy decay rate of
/// each, and aggregate the mask-size scaling. The builder maps a (fraction,
/// seed) pair to a ready problem and initial state; a member that fails
/// entropy monotonicity aborts the sweep.
pub fn omega_sweep<F>(
    build: F,
    fractions: &[f64],
    seeds: &[u64],
    cfg: &SimConfig,
    window: Option<(f64, f64)>,
) -> Result<SweepReport, ProbeError>
where
    F: Fn(f64, u64) -> Result<(Problem, State), ProbeError>,
{
    if fractions.is_empty() || fractions.iter().any(|f| !f.is_finite() || *f <= 0.0 || *f > 1.0) {
        return Err(ProbeError::BadFractions);
    }
    let mut rows = Vec::new();
    for &fraction in fractions {
        for &seed in seeds {
            let (problem, u0) = build(fraction, seed)?;
            let traj = simulate(&u0, &problem, cfg)?;
            if traj.entropy_violation.is_some() {
                return Err(ProbeError::SweepEntropyViolation { fraction, seed });
            }
            let fit = fit_decay_rate(&traj.times, &traj.entropy, window)
                .map_err(|source| ProbeError::SweepFit { fraction, seed, source })?;
            let omega1 = problem.alpha.first().map_or(1.0, |a| a.mask().measure());
            let omega2 = problem
                .alpha
                .get(1)
                .map_or(omega1, |a| a.mask().measure());
            rows.push(SweepRow {
                fraction,
                seed,
                omega1_measure: omega1,
                omega2_measure: omega2,
                lambda: fit.lambda,
                lambda_se: fit.lambda_se,
                r_squared: fit.r_squared,
            });
        }
    }

    // Least squares of 1/lambda on 1/|omega1| + 1/|omega2|.
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.lambda > 0.0)
        .map(|r| (1.0 / r.omega1_measure + 1.0 / r.omega2_measure, 1.0 / r.lambda))
        .collect();
    let (intercept, slope) = ols(&pts);

    // Non-increasing mean rate along the given fraction order.
    let mut monotone = true;
    let mut prev: Option<(f64, f64)> = None; // (mean lambda, mean se)
    for &fraction in fractions {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.fraction == fraction).collect();
        if group.is_empty() {
            continue;
        }
        let mean = group.iter().map(|r| r.lambda).sum::<f64>() / group.len() as f64;
        let se = group.iter().map(|r| r.lambda_se).sum::<f64>() / group.len() as f64;
        if let Some((prev_mean, prev_se)) = prev {
            if mean > prev_mean + 2.0 * prev_se.max(se) {
                monotone = false;
            }
        }
        prev = Some((mean, se));
    }

    Ok(SweepReport {
        rows,
        intercept,
        slope,
        monotone,
    })
}

fn ols(pts: &[(f64, f64)]) -> (f64, f64) {
    let distinct_x = {
        let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        xs.len()
    };
    if pts.len() < 2 || distinct_x < 2 {
        return (f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    (ym - slope * xm, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::parse_network;
    use crate::spatial::{CoefficientField, DiffusionField, SubdomainMask};
    use crate::testnets::SPECIAL;

    fn special_problem(n: usize) -> Problem {
        let net = parse_network(SPECIAL).unwrap();
        let grid = Grid::new(1, n).unwrap();
        let alpha = vec![
            CoefficientField::constant(&grid, 1.0),
            CoefficientField::constant(&grid, 1.0),
        ];
        let diffusion = vec![DiffusionField::constant(&grid, 1.0); 3];
        Problem::new(net, grid, alpha, diffusion, Some(vec![1.0, 1.0, 1.0])).unwrap()
    }

    #[test]
    fn samples_satisfy_conservation_and_positivity() {
        let net = parse_network(SPECIAL).unwrap();
        let grid = Grid::new(1, 64).unwrap();
        for seed in [0_u64, 7, 99] {
            let state = sample_compatible_state(&net, &grid, &[7.0], seed, 0.6).unwrap();
            let totals = net.conserved_totals(&state, grid.cell_measure()).unwrap();
            assert!((totals[0] - 7.0).abs() <= 1e-10 * 8.0, "{totals:?}");
            assert!(state.iter().flatten().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn zero_roughness_gives_uniform_state() {
        let net = parse_network(SPECIAL).unwrap();
        let grid = Grid::new(1, 16).unwrap();
        let state = sample_compatible_state(&net, &grid, &[7.0], 3, 0.0).unwrap();
        for field in &state {
            for v in field {
                assert!((v - field[0]).abs() < 1e-14);
            }
        }
        let totals = net.conserved_totals(&state, grid.cell_measure()).unwrap();
        assert!((totals[0] - 7.0).abs() < 1e-10 * 8.0);
    }

    #[test]
    fn samples_are_seed_deterministic() {
        let net = parse_network(SPECIAL).unwrap();
        let grid = Grid::new(1, 32).unwrap();
        let a = sample_compatible_state(&net, &grid, &[7.0], 5, 0.4).unwrap();
        let b = sample_compatible_state(&net, &grid, &[7.0], 5, 0.4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn probe_reports_positive_minimum_and_is_reproducible() {
        let problem = special_problem(24);
        let report = eed_ratio_probe(&problem, 50, 11, 0.4).unwrap();
        assert!(report.min_ratio > 0.0);
        assert!(report.min_ratio <= report.q05);
        assert!(report.q05 <= report.q50);
        let again = eed_ratio_probe(&problem, 50, 11, 0.4).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn shrinking_first_mask_does_not_raise_min_ratio() {
        // Nested masks (same seed) only remove reaction dissipation.
        let net = parse_network(SPECIAL).unwrap();
        let grid = Grid::new(1, 64).unwrap();
        let diffusion = vec![DiffusionField::constant(&grid, 1.0); 3];
        let mk = |fraction: f64| {
            let m1 = SubdomainMask::random(&grid, fraction, 42).unwrap();
            let alpha = vec![
                CoefficientField::masked(m1, 1.0),
                CoefficientField::constant(&grid, 1.0),
            ];
            Problem::new(
                net.clone(),
                grid.clone(),
                alpha,
                diffusion.clone(),
                Some(vec![1.0, 1.0, 1.0]),
            )
            .unwrap()
        };
        let wide = eed_ratio_probe(&mk(0.4), 40, 9, 0.5).unwrap();
        let narrow = eed_ratio_probe(&mk(0.1), 40, 9, 0.5).unwrap();
        assert!(narrow.min_ratio <= wide.min_ratio + 1e-12);
    }

    #[test]
    fn probe_requires_equilibrium() {
        let net = parse_network(SPECIAL).unwrap();
        let grid = Grid::new(1, 8).unwrap();
        let problem = Problem::new(
            net,
            grid.clone(),
            vec![
                CoefficientField::constant(&grid, 1.0),
                CoefficientField::constant(&grid, 1.0),
            ],
            vec![DiffusionField::constant(&grid, 1.0); 3],
            None,
        )
        .unwrap();
        assert!(matches!(
            eed_ratio_probe(&problem, 5, 1, 0.3),
            Err(ProbeError::MissingEquilibrium)
        ));
    }

    #[test]
    fn ols_fits_a_line() {
        let pts = vec![(1.0, 3.0), (2.0, 5.0), (3.0, 7.0)];
        let (a, b) = ols(&pts);
        assert!((a - 1.0).abs() < 1e-12);
        assert!((b - 2.0).abs() < 1e-12);
        let (a, _) = ols(&[(1.0, 1.0)]);
        assert!(a.is_nan());
    }
}
