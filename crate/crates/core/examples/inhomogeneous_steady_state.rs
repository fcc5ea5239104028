//! When the forward and backward rates of a reversible exchange live on
//! disjoint subdomains, no positive spatially homogeneous steady state
//! exists: the dynamics settle into a spatially varying profile instead.
//!
//! ```bash
//! cargo run --release --example inhomogeneous_steady_state
//! ```

use rdentropy::pde::simulate;
use rdentropy::scenario::Scenario;

fn main() {
    let scenario = Scenario::from_preset("remark-2x2-disjoint").expect("preset resolves");
    println!("warnings: {:?}", scenario.warnings);

    let traj = simulate(&scenario.u0, &scenario.problem(), &scenario.sim).unwrap();
    println!(
        "steady-state approach rate ||du/dt||_L1 = {:.3e} at t = {}",
        traj.steady_rate,
        traj.times.last().unwrap()
    );
    println!("total mass drift: {:.2e}", traj.max_drift);

    let grid = &scenario.grid;
    let final_state = &traj.final_state;
    for (i, name) in scenario.net.species().iter().enumerate() {
        let f = &final_state.u[i];
        let min = f.iter().copied().fold(f64::INFINITY, f64::min);
        let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("{name}: min = {min:.6}, max = {max:.6}, spread = {:.6}", max - min);
    }

    // A coarse picture of the profiles.
    println!("\n    x      u_1       u_2");
    for c in (0..grid.n_cells()).step_by(grid.n_cells() / 10) {
        println!(
            "{:>6.3}  {:.6}  {:.6}",
            grid.center(c)[0],
            final_state.u[0][c],
            final_state.u[1][c]
        );
    }
}
