//! Entropy functionals along reaction-diffusion dynamics: the Bregman gap
//! `psi`, relative entropy, entropy dissipation with its Fisher/reaction
//! split, the pointwise reaction entropy-production identity, a
//! Csiszár-Kullback-Pinsker ratio, the polynomial energy of the three-species
//! chain, and exponential decay-rate fitting.
//!
//! Quadratures here share the face stencil of the finite-volume integrator
//! (harmonic-mean face diffusion, face measure = cell measure), so discrete
//! entropy balance checks compare like with like.

use serde::Serialize;
use thiserror::Error;

use crate::crn::ReactionNetwork;
use crate::spatial::{CoefficientField, DiffusionField, Grid};

/// Entropies below this are treated as resolution noise by the decay fit.
pub const ENTROPY_FLOOR: f64 = 1e-13;

/// The gap `psi(w; z) = w log(w/z) - w + z`, nonnegative, zero iff w = z,
/// with the convention 0 log 0 = 0.
///
/// Domain: `w >= 0`, `z > 0`, both finite; violations panic.
pub fn psi(w: f64, z: f64) -> f64 {
    assert!(w >= 0.0 && w.is_finite(), "psi: w must be finite and >= 0");
    assert!(z > 0.0 && z.is_finite(), "psi: z must be finite and > 0");
    if w == 0.0 {
        return z;
    }
    w * (w / z).ln() - w + z
}

/// `psi` extended to z = 0 by its limit: positive w against an empty target
/// diverges. Used by the dissipation quadrature where monomials of boundary
/// states can vanish.
fn psi_extended(w: f64, z: f64) -> f64 {
    if z == 0.0 {
        if w == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        psi(w, z)
    }
}

/// Relative entropy of a per-species cell field with respect to a strictly
/// positive homogeneous state: sum_i int (u_i log(u_i/u_inf_i) - u_i + u_inf_i).
pub fn relative_entropy(u: &[Vec<f64>], u_inf: &[f64], grid: &Grid) -> f64 {
    assert_eq!(u.len(), u_inf.len(), "species count mismatch");
    assert!(
        u_inf.iter().all(|&x| x > 0.0 && x.is_finite()),
        "reference state must be strictly positive"
    );
    let mut acc = 0.0;
    for (field, &z) in u.iter().zip(u_inf) {
        assert_eq!(field.len(), grid.n_cells(), "field/grid size mismatch");
        for &w in field {
            acc += psi(w, z);
        }
    }
    acc * grid.cell_measure()
}

/// Spatial average of one species field over the unit-measure domain.
pub fn spatial_average(field: &[f64], grid: &Grid) -> f64 {
    field.iter().sum::<f64>() * grid.cell_measure()
}

/// Relative entropy of `u` against its own spatial averages,
/// sum_i int u_i log(u_i / [u_i]). The linear terms integrate to zero.
pub fn entropy_to_average(u: &[Vec<f64>], grid: &Grid) -> f64 {
    let averages: Vec<f64> = u.iter().map(|f| spatial_average(f, grid)).collect();
    let mut acc = 0.0;
    for (field, &avg) in u.iter().zip(&averages) {
        if avg == 0.0 {
            continue; // identically zero species
        }
        for &w in field {
            acc += psi(w, avg);
        }
    }
    acc * grid.cell_measure()
}

/// Relative entropy of the averaged state against the reference:
/// sum_i ([u_i] log([u_i]/u_inf_i) - [u_i] + u_inf_i).
pub fn entropy_of_averages(u: &[Vec<f64>], u_inf: &[f64], grid: &Grid) -> f64 {
    u.iter()
        .zip(u_inf)
        .map(|(f, &z)| psi(spatial_average(f, grid), z))
        .sum()
}

/// Entropy dissipation split into its diffusion (Fisher) and reaction parts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Dissipation {
    pub fisher: f64,
    pub reaction: f64,
}

impl Dissipation {
    pub fn total(&self) -> f64 {
        self.fisher + self.reaction
    }
}

/// Entropy dissipation of a state.
///
/// Fisher part: `sum_i sum_faces 4 d_face (sqrt(u_R) - sqrt(u_L))^2 / h^2 *
/// cell_measure` with harmonic-mean face coefficients (matching the
/// integrator stencil). Reaction part: `sum_r sum_cells k_r(x) u_inf^{y_r}
/// psi(u^{y_r}/u_inf^{y_r}; u^{y_r'}/u_inf^{y_r'}) * cell_measure` where
/// `k_r(x) = beta_r * alpha_{profile(r)}(x)`.
pub fn entropy_dissipation(
    net: &ReactionNetwork,
    grid: &Grid,
    alpha: &[CoefficientField],
    diff: &[DiffusionField],
    u: &[Vec<f64>],
    u_inf: &[f64],
) -> Dissipation {
    let m = net.n_species();
    assert_eq!(u.len(), m);
    assert_eq!(diff.len(), m);
    assert_eq!(alpha.len(), net.profiles().len());
    assert!(u_inf.iter().all(|&x| x > 0.0 && x.is_finite()));

    let h2 = grid.h() * grid.h();
    let meas = grid.cell_measure();
    let mut fisher = 0.0;
    for (field, d) in u.iter().zip(diff) {
        for &(a, b) in &grid.faces() {
            let d_face = harmonic_mean(d.value(a), d.value(b));
            if d_face == 0.0 {
                continue;
            }
            let ds = field[b].sqrt() - field[a].sqrt();
            fisher += 4.0 * d_face * ds * ds / h2;
        }
    }
    fisher *= meas;

    // u_inf^{y_r} and the monomials of the ratio vector u/u_inf.
    let mut reaction = 0.0;
    let mut ratio = vec![0.0; m];
    for c in 0..grid.n_cells() {
        for (i, r) in ratio.iter_mut().enumerate() {
            *r = u[i][c] / u_inf[i];
        }
        for rx in net.reactions() {
            let k = rx.beta * alpha[rx.profile].value(c);
            if k == 0.0 {
                continue;
            }
            let weight = net.complexes()[rx.reactant].monomial(u_inf);
            let a = net.complexes()[rx.reactant].monomial(&ratio);
            let b = net.complexes()[rx.product].monomial(&ratio);
            reaction += k * weight * psi_extended(a, b);
        }
    }
    reaction *= meas;

    Dissipation { fisher, reaction }
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Both sides of the pointwise reaction entropy-production identity at a
/// strictly positive concentration vector:
/// `lhs = -sum_i R_i(u) log(u_i / u_inf_i)` and
/// `rhs = sum_r k_r u_inf^{y_r} psi(u^{y_r}/u_inf^{y_r}; u^{y_r'}/u_inf^{y_r'})`.
///
/// The two agree whenever `u_inf` is complex balanced for the network and
/// the rate values of each component share one scaling factor.
pub fn reaction_entropy_production_identity(
    net: &ReactionNetwork,
    u: &[f64],
    u_inf: &[f64],
    k: &[f64],
) -> (f64, f64) {
    assert!(u.iter().all(|&x| x > 0.0), "u must be strictly positive");
    assert!(u_inf.iter().all(|&x| x > 0.0));
    let rates = net.mass_action_rates(k, u).expect("validated inputs");
    let lhs: f64 = -rates
        .iter()
        .zip(u.iter().zip(u_inf))
        .map(|(r, (ui, zi))| r * (ui / zi).ln())
        .sum::<f64>();

    let ratio: Vec<f64> = u.iter().zip(u_inf).map(|(a, b)| a / b).collect();
    let rhs: f64 = net
        .reactions()
        .iter()
        .enumerate()
        .map(|(r, rx)| {
            let weight = net.complexes()[rx.reactant].monomial(u_inf);
            let a = net.complexes()[rx.reactant].monomial(&ratio);
            let b = net.complexes()[rx.product].monomial(&ratio);
            k[r] * weight * psi(a, b)
        })
        .sum();
    (lhs, rhs)
}

/// Ratio of relative entropy to the squared L1 distances,
/// `E(u|u_inf) / sum_i ||u_i - u_inf_i||_1^2`. Returns infinity at the
/// reference state itself.
pub fn ckp_ratio(u: &[Vec<f64>], u_inf: &[f64], grid: &Grid) -> f64 {
    let e = relative_entropy(u, u_inf, grid);
    let meas = grid.cell_measure();
    let denom: f64 = u
        .iter()
        .zip(u_inf)
        .map(|(f, &z)| {
            let l1: f64 = f.iter().map(|&w| (w - z).abs()).sum::<f64>() * meas;
            l1 * l1
        })
        .sum();
    if denom == 0.0 {
        f64::INFINITY
    } else {
        e / denom
    }
}

/// Polynomial energy of the three-species chain,
/// `int (4/(p+1) u1^{p+1} + 2/(2p+1) u2^{2p+1} + 1/(4p+1) u3^{4p+1})`.
/// Non-increasing along the chain's dynamics for every positive integer p.
pub fn h_p(u: &[Vec<f64>], p: u32, grid: &Grid) -> f64 {
    assert_eq!(u.len(), 3, "the polynomial energy needs exactly 3 species");
    assert!(p >= 1);
    let p = p as i32;
    let mut acc = 0.0;
    for c in 0..grid.n_cells() {
        acc += 4.0 / (p as f64 + 1.0) * u[0][c].powi(p + 1)
            + 2.0 / (2.0 * p as f64 + 1.0) * u[1][c].powi(2 * p + 1)
            + 1.0 / (4.0 * p as f64 + 1.0) * u[2][c].powi(4 * p + 1);
    }
    acc * grid.cell_measure()
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least 4 usable samples in the fit window, got {0}")]
    TooFewPoints(usize),
    #[error("times and entropies must have equal length")]
    LengthMismatch,
    #[error("window fractions must satisfy 0 <= lo < hi <= 1")]
    BadWindow,
}

/// Least-squares exponential decay rate of an entropy trace.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// Fitted rate: `entropy ~ exp(intercept - lambda t)` on the window.
    pub lambda: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the fitted rate.
    pub lambda_se: f64,
    /// Time window actually used.
    pub window: (f64, f64),
    /// Number of samples in the fit.
    pub n_used: usize,
}

/// Fit `log entropy` against time on a fractional window of the trace
/// (default (0.2, 0.8) of the time span), skipping entries at or below
/// [`ENTROPY_FLOOR`].
pub fn fit_decay_rate(
    times: &[f64],
    entropies: &[f64],
    window: Option<(f64, f64)>,
) -> Result<DecayFit, FitError> {
    if times.len() != entropies.len() {
        return Err(FitError::LengthMismatch);
    }
    let (w_lo, w_hi) = window.unwrap_or((0.2, 0.8));
    if !(0.0..=1.0).contains(&w_lo) || !(0.0..=1.0).contains(&w_hi) || w_lo >= w_hi {
        return Err(FitError::BadWindow);
    }
    let (t0, t1) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(FitError::TooFewPoints(0)),
    };
    let span = t1 - t0;
    let t_lo = t0 + w_lo * span;
    let t_hi = t0 + w_hi * span;

    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(entropies)
        .filter(|(&t, &e)| t >= t_lo && t <= t_hi && e > ENTROPY_FLOOR)
        .map(|(&t, &e)| (t, e.ln()))
        .collect();
    let n = pts.len();
    if n < 4 {
        return Err(FitError::TooFewPoints(n));
    }

    let nf = n as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    let sxy: f64 = pts
        .iter()
        .map(|p| (p.0 - t_mean) * (p.1 - y_mean))
        .sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - y_mean).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = y_mean - slope * t_mean;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        1.0 // perfectly flat trace: the constant fit is exact
    };
    let lambda_se = if n > 2 && sxx > 0.0 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(DecayFit {
        lambda: -slope,
        intercept,
        r_squared,
        lambda_se,
        window: (t_lo, t_hi),
        n_used: n,
    })
}
