use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{gen_instance, Strategy};
use crate::error::{CobraError, Result};
use crate::policies::PolicyKind;

use super::config::ExperimentConfig;
use super::episode::run_episode;

/// A unilateral deviation to test against the all-truthful profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Rounds, instance family, seeds and repetitions come from here; its
    /// strategy settings are ignored.
    pub base: ExperimentConfig,
    pub algo: PolicyKind,
    pub probe_agent: usize,
    pub deviation: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub algo: PolicyKind,
    pub probe_agent: usize,
    pub deviation: Strategy,
    pub rounds: usize,
    /// `(S_T | truthful, S_T | deviating)` per repetition.
    pub per_rep: Vec<(usize, usize)>,
    pub mean_truthful: f64,
    pub mean_deviating: f64,
    /// `E[S_T | deviate] − E[S_T | truthful]`.
    pub gain: f64,
}

/// Paired runs: everyone truthful vs. only the probe agent deviating.
///
/// Both arms of a pair share instance, contexts, noise and policy seeds; only
/// the probe agent's reports differ.
pub fn ne_deviation_probe(cfg: &ProbeConfig) -> Result<ProbeReport> {
    let base = &cfg.base;
    base.validate()?;
    if cfg.probe_agent >= base.n_agents {
        return Err(CobraError::Config(format!(
            "probe agent {} out of range for N = {}",
            cfg.probe_agent, base.n_agents
        )));
    }
    let truthful = vec![Strategy::truthful(); base.n_agents];
    let mut deviating = truthful.clone();
    deviating[cfg.probe_agent] = cfg.deviation;
    let spec = base.instance_spec()?;

    let per_rep = (0..base.reps)
        .into_par_iter()
        .map(|rep| {
            let seeds = base.seeds(rep);
            let honest = gen_instance(&spec, seeds.instance)?.with_strategies(truthful.clone())?;
            let liar = honest.with_strategies(deviating.clone())?;
            let a = run_episode(base, &honest, cfg.algo, rep, seeds)?;
            let b = run_episode(base, &liar, cfg.algo, rep, seeds)?;
            Ok((a.pulls[cfg.probe_agent], b.pulls[cfg.probe_agent]))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = per_rep.len() as f64;
    let mean_truthful = per_rep.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let mean_deviating = per_rep.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    Ok(ProbeReport {
        algo: cfg.algo,
        probe_agent: cfg.probe_agent,
        deviation: cfg.deviation,
        rounds: base.rounds,
        gain: mean_deviating - mean_truthful,
        per_rep,
        mean_truthful,
        mean_deviating,
    })
}
