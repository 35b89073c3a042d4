//! A maximally entangled pair measured in the computational basis, with
//! both halves depolarized. Prints the exact output and a sampled estimate.

use corrlab::quantum::{generated_correlation, maximally_entangled, sample, DensityMatrix, NoisyProtocol, Povm};

fn main() -> corrlab::Result<()> {
    let seed = DensityMatrix::pure_bipartite(&maximally_entangled(2), 2)?;
    for lambda in [0.0, 0.25, 0.5, 0.9] {
        let proto = NoisyProtocol::new(seed.clone(), Povm::computational(2), Povm::computational(2), lambda)?;
        let exact = generated_correlation(&proto)?;
        let counts = sample(&proto, 100_000, 1)?;
        let agree = (counts.get(0, 0) + counts.get(1, 1)) as f64 / counts.total() as f64;
        println!(
            "noise {lambda:.2}: P(same) exact {:.4}, sampled {agree:.4}; rows {:?}",
            exact.get(0, 0) + exact.get(1, 1),
            exact.rows()
        );
    }
    Ok(())
}
