//! Assemble a simulation directly from the library types, without scenario
//! files: a masked reaction profile, constant diffusion, an explicit
//! equilibrium, and a short run with recorded summaries.
//!
//! ```bash
//! cargo run --release --example custom_scenario
//! ```

use rdentropy::crn::parse_network;
use rdentropy::equilibrium::find_cbe;
use rdentropy::pde::{simulate, Problem, SimConfig, State};
use rdentropy::spatial::{CoefficientField, DiffusionField, Grid, SubdomainMask};

fn main() {
    let net = parse_network("A <=> B @ 2,1 p1").expect("network parses");
    let grid = Grid::new(1, 128).unwrap();

    // The exchange runs only on the middle third of the domain.
    let mask = SubdomainMask::from_intervals(&grid, &[(1.0 / 3.0, 2.0 / 3.0)]).unwrap();
    let alpha = vec![CoefficientField::masked(mask, 1.0)];
    let diffusion = vec![
        DiffusionField::constant(&grid, 0.5),
        DiffusionField::constant(&grid, 0.1),
    ];

    // Step initial data, total mass 2.
    let mut u0 = State::uniform(&grid, &[0.0, 0.0]);
    for c in 0..grid.n_cells() {
        let x = grid.center(c)[0];
        u0.u[0][c] = if x < 0.5 { 2.4 } else { 0.4 };
        u0.u[1][c] = if x < 0.5 { 0.2 } else { 1.0 };
    }
    let totals = net.conserved_totals(&u0.u, grid.cell_measure()).unwrap();
    let eq = find_cbe(&net, &totals, None, 1e-10, 200).unwrap();
    println!("totals = {totals:?}, equilibrium = {:?}", eq.u_inf);

    let problem = Problem::new(net, grid, alpha, diffusion, Some(eq.u_inf)).unwrap();
    let cfg = SimConfig {
        dt: 1e-4,
        t_end: 3.0,
        record_every: 100,
        ..SimConfig::default()
    };
    let traj = simulate(&u0, &problem, &cfg).expect("run completes");

    println!("\n    t        E             D");
    for i in (0..traj.times.len()).step_by(traj.times.len() / 12) {
        println!(
            "{:>6.2}  {:.6e}  {:.6e}",
            traj.times[i], traj.entropy[i], traj.dissipation[i]
        );
    }
    println!(
        "\nfinal L1 distances to equilibrium: {:?}",
        traj.l1_dist.last().unwrap()
    );
    println!("conservation drift: {:.2e}", traj.max_drift);
}
