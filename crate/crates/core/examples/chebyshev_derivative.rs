//! Chebyshev fit of sampled data, truncation as a filter, and the derivative series.
//!
//! cargo run --example chebyshev_derivative

use ode_recon::chebapprox::{chebyshev_nodes, fit};
use ode_recon::SampledSignal;

fn main() -> ode_recon::Result<()> {
    // samples taken exactly at the nodes, so the fit is interpolation
    let nodes = chebyshev_nodes(30, 0.0, 10.0)?;
    let mut times: Vec<f64> = nodes.iter().rev().copied().collect();
    times.insert(0, 0.0);
    times.push(10.0);
    let values = times.iter().map(|t| (0.7 * t).sin()).collect();
    let signal = SampledSignal::new("s", times, values)?;

    let series = fit(&signal, 30)?;
    let d = series.derivative();
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "g(t)", "g'(t)", "error");
    for k in 0..=10 {
        let t = k as f64;
        let exact = 0.7 * (0.7 * t).cos();
        let approx = d.evaluate(t)?;
        println!("{t:>6.1} {:>12.8} {approx:>12.8} {:>12.2e}", series.evaluate(t)?, (approx - exact).abs());
    }

    // truncation keeps the leading modes only
    let short = series.truncate(12)?;
    let tail = series.coeffs()[12..].iter().fold(0.0f64, |m, a| m.max(a.abs()));
    println!("\nkept {} of {} coefficients, largest dropped |a_k| = {tail:.2e}", short.len(), series.len());
    println!("max |g - g_12| on [0, 10]: {:.2e}", (0..=100)
        .map(|k| k as f64 / 10.0)
        .map(|t| (series.evaluate(t).unwrap() - short.evaluate(t).unwrap()).abs())
        .fold(0.0, f64::max));
    Ok(())
}
