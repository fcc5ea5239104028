//! Complex balanced equilibria: residual evaluation, a damped Gauss-Newton
//! solver in log-concentration coordinates, and the closed-form equilibrium
//! of the three-species chain `S1 <=> 2 S2, S2 <=> 2 S3`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::crn::ReactionNetwork;

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("concentrations must be strictly positive (u[{index}] = {value})")]
    NonPositive { index: usize, value: f64 },
    #[error("expected {expected} totals, got {got}")]
    TotalsCount { expected: usize, got: usize },
    #[error("totals must be finite")]
    InvalidTotals,
    #[error("Jacobian numerically singular (condition estimate {cond:.3e})")]
    SingularJacobian { cond: f64 },
    #[error("initial guess must have {expected} strictly positive entries")]
    BadInit { expected: usize },
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
}

/// Outcome of [`find_cbe`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct EquilibriumResult {
    /// Strictly positive equilibrium concentrations.
    pub u_inf: Vec<f64>,
    /// Largest complex-balance residual magnitude.
    pub cb_residual: f64,
    /// Largest conservation residual, relative to 1 + |total|.
    pub cons_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-complex balance residuals at a strictly positive state: outflow
/// u^y * sum of betas of reactions leaving y, minus inflow
/// sum of beta_k u^{y_k} over reactions of the same component arriving at y.
/// All residuals vanish exactly at a complex balanced equilibrium.
pub fn complex_balance_residual(
    net: &ReactionNetwork,
    u: &[f64],
) -> Result<Vec<f64>, EquilibriumError> {
    check_positive(u, net.n_species())?;
    let mut residuals = vec![0.0; net.complexes().len()];
    for range in net.components() {
        for rx in &net.reactions()[range.clone()] {
            let flux = rx.beta * net.complexes()[rx.reactant].monomial(u);
            residuals[rx.reactant] += flux;
            residuals[rx.product] -= flux;
        }
    }
    Ok(residuals)
}

fn check_positive(u: &[f64], expected: usize) -> Result<(), EquilibriumError> {
    assert_eq!(u.len(), expected, "species count mismatch");
    for (index, &value) in u.iter().enumerate() {
        if !value.is_finite() || value <= 0.0 {
            return Err(EquilibriumError::NonPositive { index, value });
        }
    }
    Ok(())
}

/// Find the strictly positive complex balanced equilibrium compatible with
/// the given conserved totals (one per conservation vector).
///
/// Damped Gauss-Newton on the stacked residual [complex-balance residuals;
/// conservation residuals] in log-concentration coordinates, so iterates stay
/// strictly positive by construction. Returns `converged = false` with the
/// best iterate when the target accuracy is not reached.
pub fn find_cbe(
    net: &ReactionNetwork,
    totals: &[f64],
    init: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumResult, EquilibriumError> {
    let k = net.conservation_basis().len();
    if totals.len() != k {
        return Err(EquilibriumError::TotalsCount {
            expected: k,
            got: totals.len(),
        });
    }
    if totals.iter().any(|t| !t.is_finite()) {
        return Err(EquilibriumError::InvalidTotals);
    }

    let v0 = match init {
        Some(u0) => {
            check_positive(u0, net.n_species())
                .map_err(|_| EquilibriumError::BadInit { expected: net.n_species() })?;
            u0.iter().map(|x| x.ln()).collect::<Vec<f64>>()
        }
        None => uniform_init(net, totals),
    };

    // Direct attempt, then a 10-step geometric homotopy on the totals as a
    // fallback for hard starting points.
    let direct = gauss_newton(net, totals, &v0, tol, max_iter)?;
    if direct.converged || k == 0 {
        return Ok(direct);
    }
    let start_totals: Vec<f64> = {
        let u: Vec<f64> = v0.iter().map(|v| v.exp()).collect();
        net.conservation_basis()
            .iter()
            .map(|q| q.iter().zip(&u).map(|(a, b)| a * b).sum())
            .collect()
    };
    if start_totals
        .iter()
        .zip(totals)
        .any(|(&s, &t)| s <= 0.0 || t <= 0.0)
    {
        return Ok(direct);
    }
    let mut v = v0;
    let mut last = None;
    for step in 1..=10 {
        let s = step as f64 / 10.0;
        let staged: Vec<f64> = start_totals
            .iter()
            .zip(totals)
            .map(|(&a, &b)| a.powf(1.0 - s) * b.powf(s))
            .collect();
        let res = gauss_newton(net, &staged, &v, tol, max_iter)?;
        v = res.u_inf.iter().map(|x| x.ln()).collect();
        last = Some(res);
    }
    Ok(last.unwrap())
}

fn uniform_init(net: &ReactionNetwork, totals: &[f64]) -> Vec<f64> {
    // Positive state on the conservation manifold with minimal log-norm; on
    // failure, a uniform concentration meeting the first constraint.
    if let Some(s) = minimum_norm_positive_scales(
        net.conservation_basis(),
        &vec![1.0; net.n_species()],
        totals,
    ) {
        return s.iter().map(|x| x.ln()).collect();
    }
    let c = match (net.conservation_basis().first(), totals.first()) {
        (Some(q), Some(&t)) => {
            let s: f64 = q.iter().sum();
            if s > 0.0 && t > 0.0 {
                t / s
            } else {
                1.0
            }
        }
        _ => 1.0,
    };
    vec![c.ln(); net.n_species()]
}

/// Positive per-species factors s with `sum_i q_ji s_i w_i = T_j` for every
/// conservation vector, found by minimum-norm Gauss-Newton on log s from
/// s = 1. Returns `None` when the iteration stalls.
pub(crate) fn minimum_norm_positive_scales(
    basis: &[Vec<f64>],
    weights: &[f64],
    totals: &[f64],
) -> Option<Vec<f64>> {
    let m = weights.len();
    let k = totals.len();
    if k == 0 {
        return Some(vec![1.0; m]);
    }
    let mut w = vec![0.0_f64; m];

    let eval = |w: &[f64]| -> (DVector<f64>, f64) {
        let mut g = DVector::zeros(k);
        let mut worst: f64 = 0.0;
        for (j, q) in basis.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..m {
                acc += q[i] * w[i].exp() * weights[i];
            }
            g[j] = acc - totals[j];
            worst = worst.max(g[j].abs() / (1.0 + totals[j].abs()));
        }
        (g, worst)
    };

    let (mut g, mut worst) = eval(&w);
    for _ in 0..60 {
        if worst <= 1e-12 {
            return Some(w.iter().map(|x| x.exp()).collect());
        }
        let mut jac = DMatrix::zeros(k, m);
        for (j, q) in basis.iter().enumerate() {
            for i in 0..m {
                jac[(j, i)] = q[i] * w[i].exp() * weights[i];
            }
        }
        let svd = jac.svd(true, true);
        let delta = svd.solve(&(-&g), 1e-14).ok()?;
        let norm0 = g.norm();
        let mut t = 1.0;
        let mut advanced = false;
        while t >= 2.0_f64.powi(-16) {
            let trial: Vec<f64> = w
                .iter()
                .zip(delta.iter())
                .map(|(wi, di)| wi + t * di)
                .collect();
            if trial.iter().all(|x| x.is_finite() && x.abs() < 60.0) {
                let (tg, tworst) = eval(&trial);
                if tg.norm() < norm0 {
                    w = trial;
                    g = tg;
                    worst = tworst;
                    advanced = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !advanced {
            return None;
        }
    }
    if worst <= 1e-12 {
        Some(w.iter().map(|x| x.exp()).collect())
    } else {
        None
    }
}

struct Residuals {
    stacked: DVector<f64>,
    cb_max: f64,
    cons_max: f64,
}

fn eval_residuals(net: &ReactionNetwork, totals: &[f64], v: &[f64]) -> Residuals {
    let u: Vec<f64> = v.iter().map(|x| x.exp()).collect();
    let cb = complex_balance_residual(net, &u).expect("iterates stay positive");
    let k = totals.len();
    let mut stacked = DVector::zeros(cb.len() + k);
    let mut cb_max: f64 = 0.0;
    for (i, r) in cb.iter().enumerate() {
        stacked[i] = *r;
        cb_max = cb_max.max(r.abs());
    }
    let mut cons_max: f64 = 0.0;
    for (j, q) in net.conservation_basis().iter().enumerate() {
        let qu: f64 = q.iter().zip(&u).map(|(a, b)| a * b).sum();
        stacked[cb.len() + j] = qu - totals[j];
        cons_max = cons_max.max((qu - totals[j]).abs() / (1.0 + totals[j].abs()));
    }
    Residuals {
        stacked,
        cb_max,
        cons_max,
    }
}

fn gauss_newton(
    net: &ReactionNetwork,
    totals: &[f64],
    v0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumResult, EquilibriumError> {
    let m = net.n_species();
    let n_complex = net.complexes().len();
    let mut v = v0.to_vec();
    let mut res = eval_residuals(net, totals, &v);

    let mut best_v = v.clone();
    let mut best = (res.cb_max, res.cons_max);
    let mut best_norm = res.stacked.norm();
    let mut iterations = 0;
    let mut mu: Option<f64> = None; // Levenberg-Marquardt damping

    for _ in 0..max_iter {
        if res.cb_max <= tol && res.cons_max <= tol {
            break;
        }
        iterations += 1;
        let u: Vec<f64> = v.iter().map(|x| x.exp()).collect();

        // d residual(y) / d v_i: outflow contributes y_i * beta * u^y at the
        // reactant complex, inflow the same magnitude at the product complex.
        let mut jac = DMatrix::zeros(n_complex + totals.len(), m);
        for range in net.components() {
            for rx in &net.reactions()[range.clone()] {
                let flux = rx.beta * net.complexes()[rx.reactant].monomial(&u);
                for &(i, c) in net.complexes()[rx.reactant].coeffs() {
                    jac[(rx.reactant, i)] += c * flux;
                    jac[(rx.product, i)] -= c * flux;
                }
            }
        }
        for (j, q) in net.conservation_basis().iter().enumerate() {
            for i in 0..m {
                jac[(n_complex + j, i)] = q[i] * u[i];
            }
        }

        // Damped normal equations (J^T J + mu I) delta = -J^T F; mu adapts:
        // shrink on acceptance, grow while the step fails to descend.
        let jtj = jac.transpose() * &jac;
        let jtf = jac.transpose() * &res.stacked;
        let diag_max = (0..m).map(|i| jtj[(i, i)]).fold(0.0_f64, f64::max);
        if diag_max == 0.0 {
            break; // zero Jacobian: nothing to move
        }
        let mu_now = mu.get_or_insert(1e-6 * diag_max);
        let norm0 = res.stacked.norm();
        let mut accepted = false;
        for _ in 0..40 {
            let damped = &jtj + DMatrix::identity(m, m) * *mu_now;
            let Some(chol) = damped.cholesky() else {
                *mu_now *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&jtf));
            let trial: Vec<f64> = v
                .iter()
                .zip(delta.iter())
                .map(|(vi, di)| vi + di)
                .collect();
            // Confine iterates to |log u| < 60 so exp never under/overflows.
            if trial.iter().all(|x| x.is_finite() && x.abs() < 60.0) {
                let trial_res = eval_residuals(net, totals, &trial);
                if trial_res.stacked.norm() < norm0 {
                    v = trial;
                    res = trial_res;
                    *mu_now = (*mu_now * 0.25).max(1e-14 * diag_max);
                    accepted = true;
                    break;
                }
            }
            *mu_now *= 10.0;
        }
        if !accepted {
            let svd = jac.svd(false, false);
            let cond = svd.singular_values.max() / svd.singular_values.min().max(f64::MIN_POSITIVE);
            if cond > 1e12 && best_norm > tol {
                return Err(EquilibriumError::SingularJacobian { cond });
            }
            break;
        }
        if res.stacked.norm() < best_norm {
            best_norm = res.stacked.norm();
            best_v = v.clone();
            best = (res.cb_max, res.cons_max);
        }
    }

    if res.cb_max <= tol && res.cons_max <= tol {
        best_v = v;
        best = (res.cb_max, res.cons_max);
    }
    let u_inf: Vec<f64> = best_v.iter().map(|x| x.exp()).collect();
    debug_assert!(u_inf.iter().all(|&x| x > 0.0));
    Ok(EquilibriumResult {
        converged: best.0 <= tol && best.1 <= tol,
        u_inf,
        cb_residual: best.0,
        cons_residual: best.1,
        iterations,
    })
}

/// Equilibrium of the chain `S1 <=> 2 S2, S2 <=> 2 S3` with total mass
/// `4 u1 + 2 u2 + u3 = M`: returns `(z^4, z^2, z)` where z is the unique
/// positive root of `4 z^4 + 2 z^2 + z = M`.
///
/// The quartic is strictly increasing on the positive axis, so bisection
/// brackets the root and a Newton polish takes it to 1e-14 relative.
pub fn special_equilibrium(mass: f64) -> Result<(f64, f64, f64), EquilibriumError> {
    if !mass.is_finite() || mass <= 0.0 {
        return Err(EquilibriumError::NonPositiveMass(mass));
    }
    let g = |z: f64| 4.0 * z.powi(4) + 2.0 * z * z + z - mass;
    let dg = |z: f64| 16.0 * z.powi(3) + 4.0 * z + 1.0;

    let mut lo = 0.0;
    let mut hi = (mass / 4.0).powf(0.25).max(1.0);
    debug_assert!(g(hi) >= 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..50 {
        let step = g(z) / dg(z);
        z -= step;
        if step.abs() <= 1e-14 * z.abs() {
            break;
        }
    }
    Ok((z.powi(4), z * z, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::parse_network;

    use crate::testnets::{FIG1A, FIG1B, SPECIAL};

    #[test]
    fn special_equilibrium_known_roots() {
        let (u1, u2, u3) = special_equilibrium(7.0).unwrap();
        assert!((u1 - 1.0).abs() < 1e-12);
        assert!((u2 - 1.0).abs() < 1e-12);
        assert!((u3 - 1.0).abs() < 1e-12);

        let (u1, u2, u3) = special_equilibrium(74.0).unwrap();
        assert!((u1 - 16.0).abs() < 1e-10 * 16.0);
        assert!((u2 - 4.0).abs() < 1e-10 * 4.0);
        assert!((u3 - 2.0).abs() < 1e-10 * 2.0);
    }

    #[test]
    fn special_equilibrium_small_mass_asymptotics() {
        // For tiny M the linear term dominates: z ~ M.
        let (_, _, z) = special_equilibrium(1e-6).unwrap();
        assert!((z - 1e-6).abs() < 1e-3 * 1e-6);
        // Components shrink monotonically with M.
        let mut prev = f64::INFINITY;
        for m in [1.0, 0.1, 0.01] {
            let (u1, u2, u3) = special_equilibrium(m).unwrap();
            assert!(u1 < prev);
            assert!(u1 > 0.0 && u2 > 0.0 && u3 > 0.0);
            prev = u1;
        }
        assert!(special_equilibrium(0.0).is_err());
        assert!(special_equilibrium(-3.0).is_err());
    }

    #[test]
    fn residuals_vanish_at_equilibrium_states() {
        let net = parse_network(SPECIAL).unwrap();
        let res = complex_balance_residual(&net, &[1.0, 1.0, 1.0]).unwrap();
        for r in &res {
            assert!(r.abs() < 1e-15);
        }
        // Reversible pair S1 <=> S2 + S4 balances whenever u1 = u2*u4.
        let net = parse_network("S1 <=> S2 + S4 @ 1 p1").unwrap();
        let res = complex_balance_residual(&net, &[0.75, 1.5, 0.5]).unwrap();
        for r in &res {
            assert!(r.abs() < 1e-15);
        }
    }

    #[test]
    fn residual_sign_and_magnitude_off_equilibrium() {
        let net = parse_network(SPECIAL).unwrap();
        let res = complex_balance_residual(&net, &[2.0, 1.0, 1.0]).unwrap();
        // At the complex S1: outflow 1*u1 = 2, inflow 1*u2^2 = 1.
        assert!((res[0] - 1.0).abs() < 1e-15);
        assert!((res[1] + 1.0).abs() < 1e-15);
        assert!(complex_balance_residual(&net, &[0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn find_cbe_matches_closed_form() {
        let net = parse_network(SPECIAL).unwrap();
        for mass in [0.5, 7.0, 74.0] {
            let res = find_cbe(&net, &[mass], None, 1e-10, 200).unwrap();
            assert!(res.converged, "mass {mass}: {res:?}");
            let (e1, e2, e3) = special_equilibrium(mass).unwrap();
            assert!((res.u_inf[0] - e1).abs() < 1e-8 * (1.0 + e1));
            assert!((res.u_inf[1] - e2).abs() < 1e-8 * (1.0 + e2));
            assert!((res.u_inf[2] - e3).abs() < 1e-8 * (1.0 + e3));
        }
    }

    #[test]
    fn find_cbe_on_two_species_exchange() {
        let net = parse_network("S1 <=> S2 @ 1 p1").unwrap();
        let res = find_cbe(&net, &[2.0], None, 1e-10, 200).unwrap();
        assert!(res.converged);
        assert!((res.u_inf[0] - 1.0).abs() < 1e-9);
        assert!((res.u_inf[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn find_cbe_on_fig1b_converges() {
        let net = parse_network(FIG1B).unwrap();
        // Totals of the uniform state (1,1,1,1).
        let totals: Vec<f64> = net
            .conservation_basis()
            .iter()
            .map(|q| q.iter().sum())
            .collect();
        let res = find_cbe(&net, &totals, None, 1e-10, 200).unwrap();
        assert!(res.converged);
        assert!(res.cb_residual < 1e-10);
        let back = complex_balance_residual(&net, &res.u_inf).unwrap();
        for r in back {
            assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn component_wise_beta_rescaling_leaves_equilibrium() {
        // Complex balance is homogeneous per component: scaling all rate
        // constants of one component moves nothing.
        let base = parse_network(SPECIAL).unwrap();
        let scaled = parse_network("S1 <=> 2 S2 @ 3.7,3.7 p1\nS2 <=> 2 S3 @ 1 p2").unwrap();
        let tol = 1e-10;
        let a = find_cbe(&base, &[74.0], None, tol, 200).unwrap();
        let b = find_cbe(&scaled, &[74.0], None, tol, 200).unwrap();
        assert!(a.converged && b.converged);
        for (x, y) in a.u_inf.iter().zip(&b.u_inf) {
            assert!((x - y).abs() <= 10.0 * tol * (1.0 + x.abs()));
        }
    }

    #[test]
    fn asymmetric_rates_with_achievable_totals_converge() {
        let net = parse_network("S1 <=> S2 + S4 @ 2,1 p1\n2 S1 <=> 2 S3 @ 1,3 p2").unwrap();
        let reference = [1.5, 0.8, 0.7, 1.1];
        let totals: Vec<f64> = net
            .conservation_basis()
            .iter()
            .map(|q| q.iter().zip(&reference).map(|(a, b)| a * b).sum())
            .collect();
        let res = find_cbe(&net, &totals, None, 1e-10, 200).unwrap();
        assert!(res.converged, "{res:?}");
        assert!(res.u_inf.iter().all(|&x| x > 0.0));
        // Balance conditions in closed form: beta_f u1 = beta_b u2 u4 and
        // u1^2 = 3 u3^2 (species order S1, S2, S4, S3).
        let u = &res.u_inf;
        assert!((2.0 * u[0] - u[1] * u[2]).abs() < 1e-9);
        assert!((u[0] * u[0] - 3.0 * u[3] * u[3]).abs() < 1e-9);
    }

    #[test]
    fn unachievable_totals_fail_cleanly() {
        // u_S2 - u_S4 = 3.4 with u_S1 + u_S2 + u_S3 = 2.9 forces a negative
        // species sum; no nonnegative state exists. Either a non-convergence
        // report or a singular-Jacobian error is acceptable, never a panic.
        let net = parse_network("S1 <=> S2 + S4 @ 2,1 p1\n2 S1 <=> 2 S3 @ 1,3 p2").unwrap();
        match find_cbe(&net, &[3.4, 2.9], None, 1e-10, 200) {
            Ok(res) => assert!(!res.converged),
            Err(EquilibriumError::SingularJacobian { .. }) => {}
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_reversible_cycle_has_positive_cbe() {
        // The 3-cycle of FIG1A's first component extended with the second
        // component: unique CBE at (1,1,1) for unit rates.
        let net = parse_network(FIG1A).unwrap();
        let res = find_cbe(&net, &[], None, 1e-10, 200).unwrap();
        assert!(res.converged);
        for x in &res.u_inf {
            assert!((x - 1.0).abs() < 1e-8);
        }
    }
}
