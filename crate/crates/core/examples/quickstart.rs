//! Solve a small consistent system with the partially randomized rule.

use kaczmarz::bench::{gen_gaussian, make_consistent_system};
use kaczmarz::{solve, SelectionStrategy, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let system = make_consistent_system(gen_gaussian(500, 50, 1))?;
    let cfg = SolveConfig::new(SelectionStrategy::MaxHomogenized).tol(1e-8);
    let report = solve(&system, &cfg)?;
    println!(
        "{:?} after {} iterations, error metric {:.2e}",
        report.terminated, report.iterations, report.final_metric
    );
    println!("x[0..5] = {:?}", &report.x_final[..5]);
    Ok(())
}
