use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::gen_instance;
use crate::error::Result;
use crate::policies::PolicyKind;

use super::config::ExperimentConfig;
use super::episode::{run_episode, EpisodeTrace};

/// Mean cumulative regret per round with a 95% normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub algo: PolicyKind,
    pub mean_cum_regret: Vec<f64>,
    pub ci_half_width: Vec<f64>,
}

impl AggregateResult {
    pub fn final_mean(&self) -> f64 {
        self.mean_cum_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_ci(&self) -> f64 {
        self.ci_half_width.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Ordered by algorithm (config order), then repetition.
    pub traces: Vec<EpisodeTrace>,
    pub aggregates: Vec<AggregateResult>,
}

impl ExperimentResult {
    pub fn aggregate_for(&self, algo: PolicyKind) -> Option<&AggregateResult> {
        self.aggregates.iter().find(|a| a.algo == algo)
    }

    pub fn traces_for(&self, algo: PolicyKind) -> impl Iterator<Item = &EpisodeTrace> {
        self.traces.iter().filter(move |t| t.algo == algo)
    }
}

/// Runs every (algorithm, repetition) episode and aggregates per round.
/// Writes nothing; see [`write_outputs`](super::write_outputs).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let spec = config.instance_spec()?;
    let jobs: Vec<(PolicyKind, usize)> = config
        .algos
        .iter()
        .flat_map(|&k| (0..config.reps).map(move |r| (k, r)))
        .collect();
    let traces = jobs
        .into_par_iter()
        .map(|(kind, rep)| {
            let seeds = config.seeds(rep);
            let instance = gen_instance(&spec, seeds.instance)?;
            run_episode(config, &instance, kind, rep, seeds)
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregates = config
        .algos
        .iter()
        .map(|&k| aggregate(k, traces.iter().filter(|t| t.algo == k), config.rounds))
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        traces,
        aggregates,
    })
}

/// Per-round mean and `1.96 · s / √n` over the given traces (0 for a single trace).
pub fn aggregate<'a>(
    algo: PolicyKind,
    traces: impl IntoIterator<Item = &'a EpisodeTrace>,
    rounds: usize,
) -> AggregateResult {
    let traces: Vec<&EpisodeTrace> = traces.into_iter().collect();
    let n = traces.len();
    let mut mean_cum_regret = Vec::with_capacity(rounds);
    let mut ci_half_width = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let vals: Vec<f64> = traces.iter().map(|tr| tr.records[t].cum_regret).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let ci = if n > 1 {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * var.sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        mean_cum_regret.push(mean);
        ci_half_width.push(ci);
    }
    AggregateResult {
        algo,
        mean_cum_regret,
        ci_half_width,
    }
}
