//! Final regret of COBRA-UCB as the over-report offset η grows.

use cobra::harness::{run_experiment, ExperimentConfig};
use cobra::policies::PolicyKind;

fn main() -> cobra::Result<()> {
    for eta in [0.0, 0.1, 0.2, 0.4, 0.8] {
        let cfg = ExperimentConfig {
            eta,
            algos: vec![PolicyKind::CobraUcb, PolicyKind::LinUcb],
            ..ExperimentConfig::default()
        };
        let r = run_experiment(&cfg)?;
        let line: Vec<String> = r
            .aggregates
            .iter()
            .map(|a| format!("{} {:.2} ± {:.2}", a.algo, a.final_mean(), a.final_ci()))
            .collect();
        println!("eta {eta:<4} {}", line.join("   "));
    }
    Ok(())
}
