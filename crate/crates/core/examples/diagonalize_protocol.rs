//! Any PSD factorization with invertible factor sums can be rebalanced so
//! both sums equal one diagonal matrix; that form yields a protocol.

use corrlab::factorize::{diagonalize_factorization, protocol_from_noisy_factorization, PsdFactorization};
use corrlab::quantum::{generated_correlation, HermitianOperator};
use corrlab::Correlation;

fn main() -> corrlab::Result<()> {
    // rank-one factors with lopsided scaling on the two sides
    let cs: Vec<_> = [[3.0, 0.2], [0.1, 2.0], [1.0, 1.0]]
        .iter()
        .map(|d| HermitianOperator::from_real_diagonal(d))
        .collect();
    let ds: Vec<_> = [[0.05, 0.01], [0.02, 0.06], [0.03, 0.03]]
        .iter()
        .map(|d| HermitianOperator::from_real_diagonal(d))
        .collect();
    let f = PsdFactorization::new(cs, ds)?;
    let total: f64 = f.products().iter().sum();
    let f = PsdFactorization::new(f.cs().iter().map(|c| c.scaled(1.0 / total)).collect(), f.ds().to_vec())?;
    let p = Correlation::from_flat(3, f.products(), 1e-12)?;
    let (g, lam) = diagonalize_factorization(&f)?;
    println!("diagonal sum {lam:.5?}, squares sum to {:.12}", lam.iter().map(|v| v * v).sum::<f64>());
    let proto = protocol_from_noisy_factorization(&p, &g, 0.0)?;
    println!("reproduction error {:.2e}", generated_correlation(&proto)?.max_abs_diff(&p));
    Ok(())
}
