//! Compute strictly positive complex balanced equilibria: the closed form of
//! the three-species chain against the general log-space Gauss-Newton
//! solver, and a four-species network with two conserved totals.
//!
//! ```bash
//! cargo run --release --example equilibrium_solve
//! ```

use rdentropy::crn::parse_network;
use rdentropy::equilibrium::{complex_balance_residual, find_cbe, special_equilibrium};

fn main() {
    let chain = parse_network("S1 <=> 2 S2 @ 1 p1\nS2 <=> 2 S3 @ 1 p2").unwrap();
    println!("three-species chain, conservation vector {:?}:", chain.conservation_basis()[0]);
    for mass in [0.5, 7.0, 74.0] {
        let (u1, u2, u3) = special_equilibrium(mass).unwrap();
        let solver = find_cbe(&chain, &[mass], None, 1e-10, 200).unwrap();
        println!(
            "  M = {mass:>5}: closed form ({u1:.6}, {u2:.6}, {u3:.6}), \
             solver {:?} in {} iterations (residual {:.1e})",
            solver
                .u_inf
                .iter()
                .map(|x| (x * 1e6).round() / 1e6)
                .collect::<Vec<_>>(),
            solver.iterations,
            solver.cb_residual,
        );
    }

    let net = parse_network("S1 <=> S2 + S4 @ 2,1 p1\n2 S1 <=> 2 S3 @ 1,3 p2").unwrap();
    println!(
        "\ntwo reversible pairs on four species ({} conserved totals):",
        net.conservation_basis().len()
    );
    // Totals of a positive reference state (so they are achievable).
    let reference = [1.5, 0.8, 0.7, 1.1];
    let totals: Vec<f64> = net
        .conservation_basis()
        .iter()
        .map(|q| q.iter().zip(&reference).map(|(a, b)| a * b).sum())
        .collect();
    let res = find_cbe(&net, &totals, None, 1e-10, 200).unwrap();
    println!("  totals {totals:?} -> u_inf = {:?}", res.u_inf);
    println!(
        "  converged = {}, balance residual = {:.2e}, conservation residual = {:.2e}",
        res.converged, res.cb_residual, res.cons_residual
    );
    let per_complex: Vec<String> = complex_balance_residual(&net, &res.u_inf)
        .unwrap()
        .iter()
        .map(|r| format!("{r:.2e}"))
        .collect();
    println!("  per-complex residuals: [{}]", per_complex.join(", "));
}
