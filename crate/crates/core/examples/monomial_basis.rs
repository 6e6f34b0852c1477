//! Enumerate a monomial basis the way the runtime protocol lists it.
//!
//! cargo run --example monomial_basis -- 2 3

use ode_recon::MonomialBasis;

fn main() -> ode_recon::Result<()> {
    let args: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let dim = args.first().copied().unwrap_or(2) as usize;
    let degree = args.get(1).copied().unwrap_or(3);

    let basis = MonomialBasis::new(dim, degree, true)?;
    println!("#total = {}   (max. deg. {degree})", basis.tensor_count());
    for idx in basis.enumerate() {
        let code: Vec<String> = idx.combination_encoding().iter().map(u32::to_string).collect();
        println!(" [ {} ] --> {idx}   {}", code.join(" "), idx.term_label());
    }
    println!("{} terms", basis.size());

    let y: Vec<f64> = (0..dim).map(|k| 1.0 + k as f64).collect();
    println!("values at {y:?}: {:?}", basis.eval_all(&y)?);
    Ok(())
}
