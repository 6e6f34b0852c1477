//! Refine a rough pendulum model by damped Gauss-Newton against the samples.
//!
//! cargo run --release --example gauss_newton_refine

use ode_recon::gaussnewton::format_report;
use ode_recon::{generate_pendulum_data, reconstruct, refine, Dataset, FitProblem, RunConfig};

fn main() -> ode_recon::Result<()> {
    let (a, b) = generate_pendulum_data(0.25, 2.0, 9.81, [1.0, 0.0], 10.0, 49)?;
    let data = Dataset::new(vec![a, b])?;
    let config = RunConfig {
        max_degree: 3,
        include_constant: false,
        cheb_truncation: Some(40),
        threshold_pct: 5.0,
        ..RunConfig::default()
    };
    let rec = reconstruct(&data, &config)?;
    println!("{}", rec.report());

    let problem = FitProblem::new(rec.model, data.components, config.ivp_options())?;
    let result = refine(&problem, &config.gauss_newton)?;
    print!("{}", format_report(&result, &config.gauss_newton));
    Ok(())
}
