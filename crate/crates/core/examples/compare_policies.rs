//! COBRA against the Lin-UCB and Lin-TS baselines on the default instance,
//! with outputs written to a directory (first argument, default `out/compare`).

use std::path::PathBuf;

use cobra::harness::{run_experiment, write_outputs, ExperimentConfig};

fn main() -> cobra::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("out/compare"), PathBuf::from);
    let cfg = ExperimentConfig::default();
    let result = run_experiment(&cfg)?;
    for agg in &result.aggregates {
        let elim = result.traces_for(agg.algo).filter(|t| !t.eliminations.is_empty()).count();
        println!(
            "{:<10} regret at T={}: {:>8.2} ± {:<6.2} reps with an elimination: {elim}/{}",
            agg.algo.name(),
            cfg.rounds,
            agg.final_mean(),
            agg.final_ci(),
            cfg.reps
        );
    }
    write_outputs(&result, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
