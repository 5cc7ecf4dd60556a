use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{InstanceSpec, Lift, ProblemInstance, Strategy};
use crate::error::{CobraError, Result};
use crate::lin_core::ConfidenceParams;
use crate::policies::{LoomScope, PolicyConfig, PolicyKind};
use crate::seeds::derive_seed;

/// Which agents misreport in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyMix {
    AllTruthful,
    #[default]
    AllOverReport,
}

/// One experiment: instance family, learner settings, repetitions, outputs.
///
/// Serialized as flat TOML using the field names below (`T`, `N`, `R` upper-case).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "T")]
    pub rounds: usize,
    #[serde(rename = "N")]
    pub n_agents: usize,
    pub d_c: usize,
    pub d_n: usize,
    pub lambda: f64,
    #[serde(rename = "R")]
    pub noise_scale: f64,
    pub delta: f64,
    pub reward_scale: f64,
    pub eta: f64,
    pub eps_eta: f64,
    pub reps: usize,
    pub seed: u64,
    pub algos: Vec<PolicyKind>,
    pub lift: bool,
    pub strategy_mix: StrategyMix,
    /// Explicit over-reporting agent ids; overrides `strategy_mix` when set.
    pub over_reporters: Option<Vec<usize>>,
    pub loom_check_scope: LoomScope,
    pub fix_instance_across_reps: bool,
    pub monitor_assumptions: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// Problem instance I with the default manipulation (η = ε_η = 0.1).
    fn default() -> Self {
        ExperimentConfig {
            rounds: 1000,
            n_agents: 5,
            d_c: 5,
            d_n: 5,
            lambda: 0.01,
            noise_scale: 0.1,
            delta: 0.05,
            reward_scale: 5.0,
            eta: 0.1,
            eps_eta: 0.1,
            reps: 20,
            seed: 0,
            algos: PolicyKind::ALL.to_vec(),
            lift: false,
            strategy_mix: StrategyMix::AllOverReport,
            over_reporters: None,
            loom_check_scope: LoomScope::All,
            fix_instance_across_reps: false,
            monitor_assumptions: false,
            out_dir: None,
        }
    }
}

const INSTANCE_TAG: u64 = u64::MAX;
const ENV_TAG: u64 = u64::MAX - 1;
const POLICY_TAG: u64 = u64::MAX - 2;

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CobraError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CobraError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CobraError::Config(m.to_string()));
        if self.reps == 0 {
            return bad("reps must be >= 1");
        }
        if self.n_agents == 0 {
            return bad("N must be >= 1");
        }
        if self.d_c == 0 || self.d_n == 0 {
            return bad("d_c and d_n must be >= 1");
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad("lambda must be > 0");
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return bad("R must be >= 0");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return bad("reward_scale must be > 0");
        }
        if !(self.eta.is_finite() && self.eta >= 0.0 && self.eps_eta.is_finite() && self.eps_eta >= 0.0) {
            return bad("eta and eps_eta must be >= 0");
        }
        if self.algos.is_empty() {
            return bad("algos must name at least one algorithm");
        }
        if let Some(ids) = &self.over_reporters {
            if ids.iter().any(|&i| i >= self.n_agents) {
                return bad("over_reporters contains an id >= N");
            }
        }
        Ok(())
    }

    pub fn strategies(&self) -> Result<Vec<Strategy>> {
        let lie = Strategy::over_report(self.eta, self.eps_eta)?;
        Ok((0..self.n_agents)
            .map(|a| {
                let lies = match &self.over_reporters {
                    Some(ids) => ids.contains(&a),
                    None => self.strategy_mix == StrategyMix::AllOverReport,
                };
                if lies {
                    lie
                } else {
                    Strategy::truthful()
                }
            })
            .collect())
    }

    pub fn instance_spec(&self) -> Result<InstanceSpec> {
        Ok(InstanceSpec {
            n_agents: self.n_agents,
            d_c: self.d_c,
            d_n: self.d_n,
            reward_scale: self.reward_scale,
            noise_scale: self.noise_scale,
            lift: if self.lift {
                Lift::SubsetProductsDeg3
            } else {
                Lift::None
            },
            strategies: self.strategies()?,
        })
    }

    /// Confidence parameters for a generated instance: `S = c`, `L` from the
    /// instance's feature range (recomputed after a lift).
    pub fn confidence_for(&self, instance: &ProblemInstance) -> Result<ConfidenceParams> {
        ConfidenceParams::new(
            self.noise_scale,
            instance.feature_dim(),
            self.lambda,
            self.delta,
            instance.param_bound(),
            instance.feature_bound(),
        )
    }

    pub fn policy_config(&self, kind: PolicyKind, instance: &ProblemInstance) -> Result<PolicyConfig> {
        Ok(PolicyConfig::new(kind, self.confidence_for(instance)?).with_scope(self.loom_check_scope))
    }

    pub fn seeds(&self, rep: usize) -> EpisodeSeeds {
        let instance_rep = if self.fix_instance_across_reps { 0 } else { rep };
        EpisodeSeeds {
            instance: derive_seed(self.seed, INSTANCE_TAG, instance_rep as u64),
            env: derive_seed(self.seed, ENV_TAG, rep as u64),
            policy: derive_seed(self.seed, POLICY_TAG, rep as u64),
        }
    }
}

/// Seeds for one (algorithm, repetition) episode.
///
/// All three depend only on the repetition: every algorithm in a repetition
/// faces the same instance, contexts and noise, and the two sampling
/// algorithms draw the same Gaussian vectors until their histories diverge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSeeds {
    pub instance: u64,
    pub env: u64,
    pub policy: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string();
        assert!(text.contains("T = 1000"));
        assert!(text.contains("R = 0.1"));
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_files_use_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "T = 50\nN = 3\nalgos = [\"lin_ts\"]\nstrategy_mix = \"all_truthful\"\n",
        )
        .unwrap();
        assert_eq!((cfg.rounds, cfg.n_agents), (50, 3));
        assert_eq!(cfg.algos, vec![PolicyKind::LinTs]);
        assert!(cfg.strategies().unwrap().iter().all(|s| s.is_truthful()));
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for text in [
            "reps = 0",
            "delta = 1.5",
            "unknown_key = 3",
            "algos = [\"opt_gtm\"]",
            "N = 2\nover_reporters = [5]",
            "T = \"many\"",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml_str(text), Err(CobraError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn explicit_over_reporters() {
        let cfg = ExperimentConfig {
            over_reporters: Some(vec![1]),
            n_agents: 3,
            ..Default::default()
        };
        let s = cfg.strategies().unwrap();
        assert!(s[0].is_truthful() && !s[1].is_truthful() && s[2].is_truthful());
    }

    #[test]
    fn seeds_share_environment_across_algorithms() {
        let cfg = ExperimentConfig::default();
        let (a, b) = (cfg.seeds(3), cfg.seeds(4));
        assert_ne!(a.instance, b.instance);
        assert_ne!(a.env, b.env);
        assert_ne!(a.policy, b.policy);
        assert_ne!(a.instance, a.env);
        let fixed = ExperimentConfig {
            fix_instance_across_reps: true,
            ..cfg
        };
        assert_eq!(fixed.seeds(3).instance, fixed.seeds(9).instance);
    }
}
