//! Find weights certifying that a correlation survives noise, build the
//! protocol from them and simulate it.

use corrlab::quantum::generated_correlation;
use corrlab::reach::{protocol_from_certificate, strictness, threshold_upper_bound, SearchOptions};
use corrlab::Correlation;

fn main() -> corrlab::Result<()> {
    let p = Correlation::validate(
        &[vec![0.20, 0.05, 0.08], vec![0.04, 0.22, 0.06], vec![0.07, 0.03, 0.25]],
        1e-12,
    )?;
    let bound = threshold_upper_bound(&p);
    let lambda = 0.5 * bound;
    println!("permutation bound {bound:.4}; trying noise {lambda:.4}");
    let cert = strictness(&p, lambda, &SearchOptions::default())?.expect("feasible below the bound here");
    let (s, t) = (cert.s.unwrap().weights, cert.t.unwrap().weights);
    println!("s = {s:.4?}\nt = {t:.4?}\nmargin {:.3e}", cert.margin);
    let proto = protocol_from_certificate(&p, lambda, &s, &t)?;
    let out = generated_correlation(&proto)?;
    println!("local dimension {}; max error {:.2e}", proto.local_dim(), out.max_abs_diff(&p));
    Ok(())
}
