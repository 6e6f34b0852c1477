//! Components sampled on unrelated grids, read from the long CSV layout.
//!
//! cargo run --example asynchronous_grids

use ode_recon::{reconstruct, Dataset, RunConfig};

fn main() -> ode_recon::Result<()> {
    // x' = y, y' = -x sampled with different spacings and offsets
    let mut csv = String::from("component,t,value\n");
    for j in 0..=300 {
        let t = j as f64 * 0.021;
        csv.push_str(&format!("x,{t},{}\n", t.sin()));
    }
    for j in 0..=170 {
        let t = 0.013 + j as f64 * 0.037;
        csv.push_str(&format!("y,{t},{}\n", t.cos()));
    }
    let data = Dataset::parse(&csv)?;
    println!("synchronous: {}, shared window {:?}", data.is_synchronous(), data.shared_domain()?);

    let config = RunConfig {
        max_degree: 1,
        include_constant: false,
        cheb_nodes: 60,
        cheb_truncation: Some(20),
        threshold_pct: 1.0,
        ..RunConfig::default()
    };
    let rec = reconstruct(&data, &config)?;
    println!("{}", rec.report());
    Ok(())
}
