//! Squared-distance matrices of points on a line: PSD rank 2 regardless of
//! size, while the classical rank grows.

use corrlab::corrmat::make_edm;
use corrlab::factorize::{edm_rank_bounds, explicit_edm_factorization, nonneg_rank_upper, verify_psd_factorization, NmfOptions};

fn main() -> corrlab::Result<()> {
    for m in [4, 6, 9] {
        let alphas: Vec<f64> = (0..m).map(|i| i as f64 - (m - 1) as f64 / 2.0).collect();
        let p = make_edm(&alphas)?;
        let f = explicit_edm_factorization(&alphas)?;
        let report = verify_psd_factorization(&p, &f, 1e-10)?;
        let bounds = edm_rank_bounds(m)?;
        let opts = NmfOptions { restarts: 8, iterations: 3000, ..NmfOptions::default() };
        println!(
            "m={m}: PSD rank {} (residual {:.1e}); nonnegative rank in [{}, {}], search finds <= {}",
            f.r(),
            report.residual,
            bounds.nonneg.lower,
            bounds.nonneg.upper,
            nonneg_rank_upper(&p, m, opts)
        );
    }
    Ok(())
}
