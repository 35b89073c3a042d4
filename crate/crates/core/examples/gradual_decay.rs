//! The polygon family extended by one outcome: reachable for every noise
//! below `q`, with a cost that grows without bound as noise approaches `q`.

use corrlab::bounds::{am_cost_bounds, Cost};
use corrlab::corrmat::{am_q, make_am};
use corrlab::reach::{classify_sudden_death, ClassifyOptions};

fn main() -> corrlab::Result<()> {
    let (m, k) = (8, 0.5);
    let q = am_q(k);
    println!("extended polygon m={m} k={k}, q = {q:.6}");
    println!("{:>12} {:>12} {:>12}", "eps", "cost >=", "cost <=");
    for j in 1..=12 {
        let eps = q / f64::powi(2.0, j);
        let b = am_cost_bounds(m, k, eps)?;
        if let (Cost::Finite(lo), Cost::Finite(hi)) = (b.lower, b.upper) {
            println!("{eps:>12.3e} {lo:>12.3} {hi:>12.0}");
        }
    }
    let verdict = classify_sudden_death(&make_am(m, k)?, &ClassifyOptions::default())?;
    println!("classification: {:?}", verdict.kind);
    for (lambda, spread) in &verdict.ladder {
        println!("  noise {lambda:.6}: best smallest weight {spread:.3e}");
    }
    Ok(())
}
