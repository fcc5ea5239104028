//! Discrete Poincaré constants of masked subdomains: the smallest nonzero
//! Neumann-Laplacian eigenvalue on the masked cell subgraph. Intervals match
//! the analytic (pi / length)^2; disconnected masks report 0 because the
//! mean-value inequality fails across components.
//!
//! ```bash
//! cargo run --release --example poincare_estimates
//! ```

use std::f64::consts::PI;

use rdentropy::spatial::{poincare_constant, Grid, SubdomainMask};

fn main() {
    let grid = Grid::new(1, 200).unwrap();

    let show = |name: &str, intervals: &[(f64, f64)], analytic: Option<f64>| {
        let mask = SubdomainMask::from_intervals(&grid, intervals).unwrap();
        let lam = poincare_constant(&grid, &mask).unwrap();
        match analytic {
            Some(a) => println!(
                "{name:>18}: {lam:>9.4}  (analytic {a:>8.4}, deviation {:+.2}%)",
                100.0 * (lam - a) / a
            ),
            None => println!("{name:>18}: {lam:>9.4}  (disconnected)"),
        }
    };
    show("full interval", &[(0.0, 1.0)], Some(PI * PI));
    show("half interval", &[(0.0, 0.5)], Some(4.0 * PI * PI));
    show("quarter interval", &[(0.3, 0.55)], Some(16.0 * PI * PI));
    show("two components", &[(0.0, 0.3), (0.7, 1.0)], None);

    // Random measurable masks stay connected only by luck; small fractions
    // usually fragment and lose the inequality.
    for fraction in [0.9, 0.5, 0.2] {
        let mask = SubdomainMask::random(&grid, fraction, 7).unwrap();
        let lam = poincare_constant(&grid, &mask).unwrap();
        println!("random mask f = {fraction}: {lam:.4}");
    }

    let square = Grid::new(2, 32).unwrap();
    let lam = poincare_constant(&square, &SubdomainMask::full(&square)).unwrap();
    println!("unit square (32x32): {lam:.4}  (analytic {:.4})", PI * PI);
}
