//! How the decay rate scales with the size of the reaction subdomains:
//! shrink both masks through a list of fractions, fit the rate of each run,
//! and regress 1/lambda against 1/|omega1| + 1/|omega2|.
//!
//! ```bash
//! cargo run --release --example omega_scaling
//! ```

use rdentropy::probes::omega_sweep;
use rdentropy::scenario::Scenario;

fn main() {
    let scenario = Scenario::from_preset("thm2-measurable").expect("preset resolves");
    let fractions = [0.4, 0.2, 0.1];
    let seeds = [101, 202];

    let report = omega_sweep(
        |fraction, seed| scenario.sweep_problem(fraction, seed),
        &fractions,
        &seeds,
        &scenario.sweep_sim(),
        None,
    )
    .expect("sweep completes");

    println!("fraction  seed  |omega1|  |omega2|   lambda      r^2");
    for row in &report.rows {
        println!(
            "{:>8.2}  {:>4}  {:>8.3}  {:>8.3}  {:>8.5}  {:.6}",
            row.fraction, row.seed, row.omega1_measure, row.omega2_measure, row.lambda,
            row.r_squared
        );
    }
    println!(
        "\n1/lambda = a + b (1/|omega1| + 1/|omega2|):  a = {:.4}, b = {:.4}",
        report.intercept, report.slope
    );
    println!("rate non-increasing as masks shrink: {}", report.monotone);
}
