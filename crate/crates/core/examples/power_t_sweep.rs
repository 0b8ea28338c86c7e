//! Iterations of the power-t rule as t grows, against the max rule it approaches.

use kaczmarz::bench::{gen_gaussian, make_consistent_system};
use kaczmarz::{solve, SelectionStrategy, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let system = make_consistent_system(gen_gaussian(1000, 100, 0))?;
    let trials = 5;
    let mean = |s: SelectionStrategy| -> Result<f64, kaczmarz::engine::EngineError> {
        let mut total = 0;
        for seed in 0..trials {
            total += solve(&system, &SolveConfig::new(s).seed(seed))?.iterations;
        }
        Ok(total as f64 / trials as f64)
    };
    for t in [1, 2, 4, 6, 8, 16, 64] {
        println!("t = {t:>2}: {:>7.1}", mean(SelectionStrategy::PowerT { t })?);
    }
    println!("max  : {:>7.1}", mean(SelectionStrategy::MaxHomogenized)?);
    Ok(())
}
