//! Recover the damped pendulum from 49 samples and print both protocols.
//!
//! cargo run --example pendulum

use ode_recon::{generate_pendulum_data, reconstruct, verify, Dataset, RunConfig};

fn main() -> ode_recon::Result<()> {
    let (theta1, theta2) = generate_pendulum_data(0.25, 2.0, 9.81, [1.0, 0.0], 10.0, 49)?;
    let data = Dataset::new(vec![theta1, theta2])?;

    let config = RunConfig {
        max_degree: 4,
        cheb_truncation: Some(62),
        solve_grid_size: 250,
        threshold_pct: 5.0,
        ..RunConfig::default()
    };
    let rec = reconstruct(&data, &config)?;
    println!("{}", rec.report());

    let check = verify(&rec.model, &data.components, config.ivp_options(), Some(0.05))?;
    print!("{}", check.summary());
    Ok(())
}
