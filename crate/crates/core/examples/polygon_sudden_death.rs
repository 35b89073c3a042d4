//! Slack matrices of nested regular polygons: a two-dimensional quantum
//! seed generates them up to noise `1 − √k` and not at all beyond.

use corrlab::corrmat::make_bm;
use corrlab::factorize::{bm_nonneg_rank_lower, explicit_bm_factorization, verify_noisy_psd_factorization};
use corrlab::reach::{classify_sudden_death, threshold_upper_bound, ClassifyOptions};

fn main() -> corrlab::Result<()> {
    let (m, k) = (6, 0.5);
    let p = make_bm(m, k)?;
    let f = explicit_bm_factorization(m, k)?;
    let edge = 1.0 - f64::sqrt(k);
    println!("polygon m={m} k={k}: edge 1-sqrt(k) = {edge:.6}");
    println!("permutation bound      = {:.6}", threshold_upper_bound(&p));
    println!(
        "classical rank >= {} (angle bound), >= {} (matrix rank)",
        bm_nonneg_rank_lower(m, k)?,
        p.rank(1e-10)
    );
    for lambda in [0.0, edge - 0.01, edge, edge + 1e-6, edge + 0.01] {
        let r = verify_noisy_psd_factorization(&p, &f, lambda, 1e-9)?;
        println!(
            "  noise {lambda:.7}: noisy factors {} (min eigenvalue {:+.2e})",
            if r.passed { "PSD" } else { "not PSD" },
            r.noisy_min_eigenvalue().unwrap_or(f64::NAN)
        );
    }
    let verdict = classify_sudden_death(&p, &ClassifyOptions::default())?;
    println!("classification: {:?} ({})", verdict.kind, verdict.note);
    Ok(())
}
