use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvStreams, ProblemInstance, RoundOffer};
use crate::error::Result;
use crate::lin_core::FeatureVec;
use crate::loom::LoomOutcome;
use crate::policies::{MonitorRecord, PolicyKind, PolicyState, Selection};

use super::config::{EpisodeSeeds, ExperimentConfig};

/// Anything the episode loop can drive. [`PolicyState`] is the real one.
pub trait Learner {
    fn active(&self) -> &BTreeSet<usize>;

    fn select(&mut self, offers: &[(usize, &FeatureVec)], rng: &mut ChaCha8Rng) -> Result<Selection>;

    fn observe(&mut self, agent_id: usize, x_reported: &FeatureVec, y: f64) -> Result<()>;

    /// Returns the outcomes of agents eliminated this round.
    fn post_round(&mut self) -> Result<Vec<LoomOutcome>>;

    fn monitor(
        &self,
        _offers: &[(usize, &FeatureVec)],
        _selection: Selection,
        _instance: &ProblemInstance,
    ) -> Result<Option<MonitorRecord>> {
        Ok(None)
    }
}

impl Learner for PolicyState {
    fn active(&self) -> &BTreeSet<usize> {
        PolicyState::active(self)
    }

    fn select(&mut self, offers: &[(usize, &FeatureVec)], rng: &mut ChaCha8Rng) -> Result<Selection> {
        self.select_arm(offers, rng)
    }

    fn observe(&mut self, agent_id: usize, x_reported: &FeatureVec, y: f64) -> Result<()> {
        PolicyState::observe(self, agent_id, x_reported, y)
    }

    fn post_round(&mut self) -> Result<Vec<LoomOutcome>> {
        PolicyState::post_round(self)
    }

    fn monitor(
        &self,
        offers: &[(usize, &FeatureVec)],
        selection: Selection,
        instance: &ProblemInstance,
    ) -> Result<Option<MonitorRecord>> {
        self.assumption_monitor(offers, selection, |x| instance.true_reward(x))
            .map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    /// `None` once every agent has been eliminated.
    pub selected_agent: Option<usize>,
    pub observed_reward: Option<f64>,
    pub selected_true_reward: f64,
    pub best_true_reward: f64,
    pub regret_inc: f64,
    pub cum_regret: f64,
    pub eliminated: Vec<usize>,
    pub monitor: Option<MonitorRecord>,
}

/// Everything that happened in one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub algo: PolicyKind,
    pub rep: usize,
    pub seeds: EpisodeSeeds,
    pub records: Vec<RoundRecord>,
    /// `S_T(a)` per agent.
    pub pulls: Vec<usize>,
    pub stopped_rounds: usize,
    pub eliminations: Vec<(usize, LoomOutcome)>,
}

impl EpisodeTrace {
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn cum_regret_at(&self, round: usize) -> Option<f64> {
        round
            .checked_sub(1)
            .and_then(|i| self.records.get(i))
            .map(|r| r.cum_regret)
    }

    pub fn eliminated_agents(&self) -> Vec<usize> {
        self.eliminations.iter().map(|(_, o)| o.agent_id).collect()
    }
}

/// Runs `kind` for `config.rounds` rounds on `instance`.
pub fn run_episode(
    config: &ExperimentConfig,
    instance: &ProblemInstance,
    kind: PolicyKind,
    rep: usize,
    seeds: EpisodeSeeds,
) -> Result<EpisodeTrace> {
    let mut policy = PolicyState::new(config.policy_config(kind, instance)?, instance.n_agents())?;
    run_with_learner(
        &mut policy,
        instance,
        config.rounds,
        kind,
        rep,
        seeds,
        config.monitor_assumptions,
    )
}

/// The episode loop for any [`Learner`].
///
/// Each round every agent's offer is sampled (eliminated agents included, so
/// random streams stay aligned); the learner only sees active agents. The
/// regret benchmark is the best true reward among active offers, or among
/// all offers once the learner has stopped and earns nothing.
pub fn run_with_learner<L: Learner>(
    learner: &mut L,
    instance: &ProblemInstance,
    rounds: usize,
    algo: PolicyKind,
    rep: usize,
    seeds: EpisodeSeeds,
    monitor: bool,
) -> Result<EpisodeTrace> {
    let mut streams = EnvStreams::new(seeds.env, instance.n_agents());
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seeds.policy);
    let mut records = Vec::with_capacity(rounds);
    let mut pulls = vec![0; instance.n_agents()];
    let mut eliminations = Vec::new();
    let mut stopped_rounds = 0;
    let mut cum = 0.0;

    for round in 1..=rounds {
        let offers = instance.sample_round(&mut streams);
        let truths = offers
            .iter()
            .map(|o| instance.true_reward(&o.x_true))
            .collect::<Result<Vec<f64>>>()?;
        let active: Vec<&RoundOffer> = offers
            .iter()
            .filter(|o| learner.active().contains(&o.agent_id))
            .collect();
        let visible: Vec<(usize, &FeatureVec)> =
            active.iter().map(|o| (o.agent_id, &o.x_reported)).collect();

        let selection = if visible.is_empty() {
            Selection::Stopped
        } else {
            learner.select(&visible, &mut policy_rng)?
        };

        let record = match selection {
            Selection::Stopped => {
                stopped_rounds += 1;
                let best = truths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                cum += best;
                RoundRecord {
                    round,
                    selected_agent: None,
                    observed_reward: None,
                    selected_true_reward: 0.0,
                    best_true_reward: best,
                    regret_inc: best,
                    cum_regret: cum,
                    eliminated: Vec::new(),
                    monitor: None,
                }
            }
            Selection::Agent(a) => {
                let mon = if monitor {
                    learner.monitor(&visible, selection, instance)?
                } else {
                    None
                };
                let offer = &offers[a];
                let y = instance.sample_reward(&offer.x_true, &mut streams.noise)?;
                learner.observe(a, &offer.x_reported, y)?;
                let outcomes = learner.post_round()?;
                pulls[a] += 1;

                let best = active
                    .iter()
                    .map(|o| truths[o.agent_id])
                    .fold(f64::NEG_INFINITY, f64::max);
                let inc = best - truths[a];
                cum += inc;
                let eliminated = outcomes.iter().map(|o| o.agent_id).collect();
                eliminations.extend(outcomes.into_iter().map(|o| (round, o)));
                RoundRecord {
                    round,
                    selected_agent: Some(a),
                    observed_reward: Some(y),
                    selected_true_reward: truths[a],
                    best_true_reward: best,
                    regret_inc: inc,
                    cum_regret: cum,
                    eliminated,
                    monitor: mon,
                }
            }
        };
        records.push(record);
    }

    Ok(EpisodeTrace {
        algo,
        rep,
        seeds,
        records,
        pulls,
        stopped_rounds,
        eliminations,
    })
}
