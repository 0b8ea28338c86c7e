//! The sampled max rule on a tall system: sample size, Z gate and iterations.

use kaczmarz::bench::{gen_gaussian, make_consistent_system};
use kaczmarz::engine::{SelectionDetail, StepEvent};
use kaczmarz::selection::{draw_sample, sample_size};
use kaczmarz::{solve_with_observer, SampleGate, SelectionStrategy, SolveConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let system = make_consistent_system(gen_gaussian(20_000, 50, 0))?;
    let norms = system.a().row_norms()?;

    let gate = SampleGate::new(0.05, SampleGate::DEFAULT_Q);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = draw_sample(&norms, gate, norms.mean(), &mut rng)?;
    println!(
        "one draw: {} rows, Z = {:.3}, attempts {}",
        s.indices.len(),
        s.z_score,
        s.attempts
    );

    for eta in [0.5, 0.2, 0.05, 0.01] {
        let gate = SampleGate::new(eta, SampleGate::DEFAULT_Q);
        let mut redraws = 0;
        let mut obs = |e: &StepEvent| {
            if let SelectionDetail::Sample { attempts, .. } = e.detail {
                redraws += attempts - 1;
            }
        };
        let cfg = SolveConfig::new(SelectionStrategy::SampledMax(gate));
        let rep = solve_with_observer(&system, &cfg, &mut obs)?;
        println!(
            "eta {eta:<4}: sample {:>5} rows, {:>4} iterations, {redraws} rejected samples",
            sample_size(20_000, eta),
            rep.iterations
        );
    }
    Ok(())
}
