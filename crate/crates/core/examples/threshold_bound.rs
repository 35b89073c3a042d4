//! The permutation bound on tolerable noise, compared with the reachable
//! interval found by search.

use corrlab::reach::{estimate_region, threshold_upper_bound, SearchOptions};
use corrlab::Correlation;

fn main() -> corrlab::Result<()> {
    let cases = [
        ("near-diagonal", vec![vec![0.4, 0.1], vec![0.1, 0.4]]),
        ("skewed", vec![vec![0.6, 0.05], vec![0.05, 0.3]]),
        ("product", vec![vec![0.12, 0.28], vec![0.18, 0.42]]),
    ];
    for (name, rows) in cases {
        let p = Correlation::validate(&rows, 1e-12)?;
        let est = estimate_region(&p, 1e-4, &SearchOptions::default())?;
        println!(
            "{name:>14}: bound {:.5}, reachable up to [{:.5}, {:.5}] ({:?})",
            threshold_upper_bound(&p),
            est.lambda_lo,
            est.lambda_hi,
            est.boundary_kind
        );
    }
    Ok(())
}
