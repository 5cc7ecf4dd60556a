//! Seeded experiment runner, aggregation and output files.

mod config;
mod episode;
mod experiment;
mod output;
mod probe;

pub use config::{EpisodeSeeds, ExperimentConfig, StrategyMix};
pub use episode::{run_episode, run_with_learner, EpisodeTrace, Learner, RoundRecord};
pub use experiment::{aggregate, run_experiment, AggregateResult, ExperimentResult};
pub use output::{read_summary, write_outputs, SUMMARY_HEADER, TRACE_HEADER};
pub use probe::{ne_deviation_probe, ProbeConfig, ProbeReport};
