//! Does agent 0 gain selections by over-reporting while everyone else is
//! truthful? Paired runs share every random draw.

use cobra::env::Strategy;
use cobra::harness::{ne_deviation_probe, ExperimentConfig, ProbeConfig};
use cobra::policies::PolicyKind;

fn main() -> cobra::Result<()> {
    for algo in PolicyKind::ALL {
        for eta in [0.0, 0.5, 2.0] {
            let deviation = if eta == 0.0 {
                Strategy::truthful()
            } else {
                Strategy::over_report(eta, 0.0)?
            };
            let r = ne_deviation_probe(&ProbeConfig {
                base: ExperimentConfig {
                    algos: vec![algo],
                    ..ExperimentConfig::default()
                },
                algo,
                probe_agent: 0,
                deviation,
            })?;
            println!(
                "{:<10} eta {eta:<4} pulls truthful {:>7.1} deviating {:>7.1} gain {:>7.1}",
                algo.name(),
                r.mean_truthful,
                r.mean_deviating,
                r.gain
            );
        }
    }
    Ok(())
}
