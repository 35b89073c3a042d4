//! Programmatic version of `corrlab sweep`: reachability, cost bounds and
//! advantage over a noise grid, written as CSV to stdout.

use corrlab::cli::{build_family, run_sweep, sweep_csv, FamilyName, FamilyParams};
use corrlab::reach::SearchOptions;

fn main() -> corrlab::Result<()> {
    let params = FamilyParams { m: Some(6), k: Some(0.5), ..Default::default() };
    let built = build_family(FamilyName::Am, &params)?;
    let grid: Vec<f64> = (0..10).map(|i| 0.03 * i as f64).collect();
    let rows = run_sweep(&built, &grid, &SearchOptions { seed: 7, ..SearchOptions::default() })?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}
