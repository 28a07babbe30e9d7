// A reduced error-vs-M sweep on the exp2d target, written to a results
// directory (first argument, default `results/example`).

use std::path::PathBuf;

use kerf_lab::experiment::{emit_outputs, run_sweep, summarize, ExperimentConfig, TargetFunction, TargetKind};
use kerf_lab::Flavor;

pub fn run(out: PathBuf) -> kerf_lab::Result<Vec<kerf_lab::experiment::SummaryRow>> {
    let config = ExperimentConfig {
        n: 300,
        d: 2,
        k: 8,
        m_values: vec![1, 10, 50],
        reps: 4,
        test_fraction: 0.2,
        master_seed: 42,
        target: TargetFunction::benchmark(TargetKind::Exp2d),
        algorithms: Flavor::ALL.to_vec(),
        threads: None,
    };
    let records = run_sweep(&config)?;
    let summary = summarize(&records)?;
    for s in &summary {
        println!("{:<17} M={:<3} mean mse {:.4}  sd {:.4}", s.algorithm, s.m, s.mean_mse, s.std_mse);
    }
    for p in emit_outputs(&records, &summary, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(summary)
}

fn main() -> kerf_lab::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results/example"));
    run(out).map(|_| ())
}
