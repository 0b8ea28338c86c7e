//! A multi-trial experiment written out as a JSON report and a history CSV.

use kaczmarz::bench::{emit_history_csv, run_experiment, ExperimentSpec, InstanceSource, MethodSpec};
use kaczmarz::{SampleGate, SelectionStrategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ExperimentSpec::new(
        InstanceSource::GaussianSynthetic { m: 400, n: 60, seed: 2 },
        vec![
            MethodSpec::Linear(SelectionStrategy::NormWeighted),
            MethodSpec::Linear(SelectionStrategy::Greedy),
            MethodSpec::Linear(SelectionStrategy::MaxHomogenized),
            MethodSpec::Linear(SelectionStrategy::SampledMax(SampleGate::new(0.1, SampleGate::DEFAULT_Q))),
        ],
        1e-6,
    )
    .trials(3)
    .record_history(25);
    let report = run_experiment(&spec)?;
    print!("{report}");

    let dir = std::env::temp_dir();
    let json = dir.join("kaczmarz_report.json");
    let csv = dir.join("kaczmarz_history.csv");
    report.write_json(&json)?;
    emit_history_csv(&report, &csv)?;
    println!("report: {}\nhistory: {}", json.display(), csv.display());
    Ok(())
}
