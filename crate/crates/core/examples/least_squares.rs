//! Pivoted-QR least squares, including a rank-deficient system.
//!
//! cargo run --example least_squares

use nalgebra::{DMatrix, DVector};
use ode_recon::lsq::PivotedQr;

fn main() {
    // fit y = 1 + 2x - 0.5x^2 on noisy-free samples
    let xs: Vec<f64> = (0..20).map(|i| i as f64 / 4.0).collect();
    let a = DMatrix::from_fn(xs.len(), 3, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_iterator(xs.len(), xs.iter().map(|x| 1.0 + 2.0 * x - 0.5 * x * x));

    let qr = PivotedQr::new(&a);
    let c = qr.solve(&b).expect("full rank");
    println!("coefficients {:.12?}", c.as_slice());
    println!("column order {:?}, largest |R_ii| {:.3e}", qr.permutation(), qr.r_diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let r = &a * &c - &b;
    println!("scaled residual {:.3e}", r.norm() / (xs.len() as f64).sqrt());

    // duplicating a column makes the problem rank deficient; it is reported, not regularised
    let dup = DMatrix::from_fn(xs.len(), 3, |i, j| xs[i].powi(j.min(1) as i32));
    match PivotedQr::new(&dup).solve(&b) {
        Ok(_) => println!("unexpectedly solved"),
        Err(e) => println!("duplicate column: {e}"),
    }
}
