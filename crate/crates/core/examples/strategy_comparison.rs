//! Mean iteration counts of every selection rule on one Gaussian system.

use kaczmarz::bench::{run_experiment, ExperimentSpec, InstanceSource, MethodSpec};
use kaczmarz::{SampleGate, SelectionStrategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let methods = [
        SelectionStrategy::Cyclic,
        SelectionStrategy::NormWeighted,
        SelectionStrategy::Greedy,
        SelectionStrategy::RelaxedGreedy { theta: 0.75 },
        SelectionStrategy::RelaxedGreedy { theta: 1.0 },
        SelectionStrategy::PowerT { t: 8 },
        SelectionStrategy::MaxHomogenized,
        SelectionStrategy::SampledMax(SampleGate::new(0.05, SampleGate::DEFAULT_Q)),
    ];
    let spec = ExperimentSpec::new(
        InstanceSource::GaussianSynthetic { m: 1000, n: 200, seed: 0 },
        methods.into_iter().map(MethodSpec::Linear).collect(),
        1e-6,
    );
    print!("{}", run_experiment(&spec)?);
    Ok(())
}
