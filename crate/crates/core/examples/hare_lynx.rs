//! Hudson's Bay hare and lynx records: degree-2 reconstruction, then refinement.
//!
//! cargo run --release --example hare_lynx

use ode_recon::gaussnewton::format_report;
use ode_recon::{reconstruct, refine, verify, Dataset, FitProblem, RunConfig};

fn main() -> ode_recon::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/hare_lynx.csv");
    let data = Dataset::load(path)?;
    let config = RunConfig {
        max_degree: 2,
        include_constant: false,
        cheb_truncation: Some(11),
        solve_grid_size: 150,
        threshold_pct: 0.1,
        ..RunConfig::default()
    };
    let rec = reconstruct(&data, &config)?;
    println!("{}", rec.report());
    print!("{}", verify(&rec.model, &data.components, config.ivp_options(), None)?.summary());

    let problem = FitProblem::new(rec.model, data.components, config.ivp_options())?;
    let result = refine(&problem, &config.gauss_newton)?;
    print!("\n{}", format_report(&result, &config.gauss_newton));
    Ok(())
}
