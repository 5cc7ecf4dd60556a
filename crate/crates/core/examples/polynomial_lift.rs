//! Subset-product features and a lifted (nonlinear in the raw features) run.

use cobra::env::poly_lift;
use cobra::harness::{run_experiment, ExperimentConfig, StrategyMix};
use cobra::lin_core::FeatureVec;
use cobra::policies::PolicyKind;

fn main() -> cobra::Result<()> {
    let x = FeatureVec::new(vec![1.0, 2.0, 3.0, 4.0])?;
    println!("lift of {:?}:\n  {:?}", x.as_slice(), poly_lift(&x).as_slice());

    for mix in [StrategyMix::AllTruthful, StrategyMix::AllOverReport] {
        let cfg = ExperimentConfig {
            rounds: 2000,
            d_c: 2,
            d_n: 2,
            lift: true,
            strategy_mix: mix,
            algos: vec![PolicyKind::CobraTs, PolicyKind::LinTs],
            ..ExperimentConfig::default()
        };
        for a in &run_experiment(&cfg)?.aggregates {
            println!("{mix:?} {:<8} {:.2} ± {:.2}", a.algo.name(), a.final_mean(), a.final_ci());
        }
    }
    Ok(())
}
