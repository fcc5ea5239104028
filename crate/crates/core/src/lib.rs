//! Reaction-network analysis and reaction-diffusion simulation with
//! entropy-decay diagnostics.
//!
//! The crate models mass-action reaction networks whose rate coefficients and
//! diffusion coefficients may vanish on parts of the spatial domain, computes
//! the strictly positive complex balanced equilibrium compatible with the
//! conserved totals, integrates the resulting reaction-diffusion system on a
//! uniform grid with zero-flux boundaries, and measures the relative-entropy
//! decay that drives convergence to equilibrium.
//!
//! The main entry points, roughly bottom-up:
//!
//! - [`crn`]: network parsing, stoichiometry, conservation laws, strongly
//!   connected components of the complex graph.
//! - [`equilibrium`]: complex-balance residuals and the positive equilibrium
//!   solver (log-space Gauss-Newton), plus the closed form for the
//!   `S1 <=> 2 S2, S2 <=> 2 S3` chain.
//! - [`spatial`]: grids, subdomain masks, reaction-rate profiles and
//!   (possibly degenerate) diffusion fields, discrete Poincaré constants.
//! - [`pde`]: IMEX finite-volume time integration with positivity and
//!   conservation bookkeeping.
//! - [`entropy`]: relative entropy, entropy dissipation, the pointwise
//!   entropy-production identity, and exponential decay-rate fitting.
//! - [`probes`]: randomized lower-bound probes for the entropy-entropy
//!   dissipation constant and mask-size scaling sweeps.
//! - [`scenario`] / [`cli`]: plain-text scenario configuration, shipped
//!   presets, and the report-producing command layer used by the binary.
//!
//! Every randomized routine takes an explicit seed and is deterministic; CSV
//! and JSON outputs are byte-reproducible for identical inputs.

// Stencil and small dense-matrix code indexes several arrays with one
// counter; iterator rewrites obscure that coupling.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod crn;
pub mod entropy;
pub mod equilibrium;
mod linalg;
pub mod pde;
pub mod probes;
pub mod scenario;
pub mod spatial;

pub use crn::{ReactionNetwork, Complex, Reaction};
pub use equilibrium::EquilibriumResult;
pub use pde::{SimConfig, State, Trajectory};
pub use spatial::{Grid, SubdomainMask};
