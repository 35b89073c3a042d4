//! Runs every acceptance check and prints one line each.

fn main() {
    let outcomes = corrlab::checks::all();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
}
