//! Integrate recovered models against data, including one that blows up.
//!
//! cargo run --example verify_model

use ode_recon::{verify, IvpOptions, MonomialBasis, RecoveredModel, SampledSignal};

fn main() -> ode_recon::Result<()> {
    let times: Vec<f64> = (0..=40).map(|j| j as f64 * 0.05).collect();
    let data = SampledSignal::new("y", times.clone(), times.iter().map(|t| (-t).exp()).collect())?;

    // y' = c_1 y with basis {1, y}
    let basis = MonomialBasis::new(1, 1, true)?;
    let decay = RecoveredModel::new(basis, vec![vec![0.0, -1.0]], 0.0)?;
    let report = verify(&decay, std::slice::from_ref(&data), IvpOptions::default(), Some(1e-6))?;
    print!("y' = -y:\n{}", report.summary());

    let cubic_basis = MonomialBasis::new(1, 3, false)?;
    let blow_up = RecoveredModel::new(cubic_basis, vec![vec![0.0, 0.0, 1.0]], 0.0)?;
    let start_high = SampledSignal::new("y", times, vec![1.0; 41])?;
    let report = verify(&blow_up, &[start_high], IvpOptions::default(), None)?;
    print!("y' = y^3:\n{}", report.summary());
    println!("comparison CSV has {} lines", report.to_csv().lines().count());
    Ok(())
}
