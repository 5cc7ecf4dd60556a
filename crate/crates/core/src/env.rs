//! Synthetic strategic-bandit environments.
//!
//! Each round draws a context `c_t ∈ (0,2)^{d_c}`; agent `n`'s true feature
//! vector is `[c_t, z_n]` for a fixed agent vector `z_n ∈ (0,2)^{d_n}`,
//! optionally passed through [`poly_lift`]. Rewards are `c · xᵀθ⋆` plus
//! Gaussian noise of standard deviation `R`, and always depend on the true
//! features. Over-reporting agents scale their true features by `1 + a`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CobraError, Result};
use crate::lin_core::{check_dim, FeatureVec};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lift {
    #[default]
    None,
    /// Products of all coordinate subsets of size 1, 2 and 3.
    SubsetProductsDeg3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Truthful,
    OverReport,
}

/// How an agent turns its true features into a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub eta: f64,
    pub eps_eta: f64,
}

impl Strategy {
    pub fn truthful() -> Self {
        Strategy {
            kind: StrategyKind::Truthful,
            eta: 0.0,
            eps_eta: 0.0,
        }
    }

    /// Reports `(1 + a) x⋆` with `a ~ U(η, η + ε_η)` redrawn every round;
    /// `ε_η = 0` pins `a = η`.
    pub fn over_report(eta: f64, eps_eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0 && eps_eta.is_finite() && eps_eta >= 0.0) {
            return Err(CobraError::InvalidArgument(format!(
                "over-report needs eta >= 0 and eps_eta >= 0, got ({eta}, {eps_eta})"
            )));
        }
        Ok(Strategy {
            kind: StrategyKind::OverReport,
            eta,
            eps_eta,
        })
    }

    pub fn is_truthful(&self) -> bool {
        self.kind == StrategyKind::Truthful
    }

    /// Truthful agents never touch `rng`.
    pub fn report<R: Rng + ?Sized>(&self, x_true: &FeatureVec, rng: &mut R) -> FeatureVec {
        match self.kind {
            StrategyKind::Truthful => x_true.clone(),
            StrategyKind::OverReport => {
                let a = if self.eps_eta > 0.0 {
                    rng.random_range(self.eta..self.eta + self.eps_eta)
                } else {
                    self.eta
                };
                x_true.scaled(1.0 + a)
            }
        }
    }
}

/// What to generate; see [`gen_instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n_agents: usize,
    pub d_c: usize,
    pub d_n: usize,
    pub reward_scale: f64,
    pub noise_scale: f64,
    pub lift: Lift,
    /// One per agent.
    pub strategies: Vec<Strategy>,
}

/// A generated problem. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    d_c: usize,
    d_n: usize,
    agent_features: Vec<DVector<f64>>,
    theta_star: DVector<f64>,
    reward_scale: f64,
    noise_scale: f64,
    lift: Lift,
    strategies: Vec<Strategy>,
}

/// One agent's offer for the round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOffer {
    pub agent_id: usize,
    pub x_true: FeatureVec,
    pub x_reported: FeatureVec,
}

/// Independent random streams driving one episode's environment.
///
/// Contexts, each agent's misreports and reward noise come from separate
/// generators, so changing one agent's strategy leaves every other draw intact.
#[derive(Debug, Clone)]
pub struct EnvStreams {
    pub context: ChaCha8Rng,
    pub reports: Vec<ChaCha8Rng>,
    pub noise: ChaCha8Rng,
}

impl EnvStreams {
    pub fn new(seed: u64, n_agents: usize) -> Self {
        EnvStreams {
            context: ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0)),
            noise: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1, 0)),
            reports: (0..n_agents)
                .map(|a| ChaCha8Rng::seed_from_u64(derive_seed(seed, 2, a as u64)))
                .collect(),
        }
    }
}

/// Draws from the open interval `(0, 2)`.
fn open_unit2<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let v = rng.random_range(0.0..2.0);
        if v > 0.0 {
            return v;
        }
    }
}

fn uniform_vec<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| open_unit2(rng)))
}

/// Number of nonempty coordinate subsets of size ≤ 3 of a `dim`-vector.
pub fn lifted_dim(dim: usize) -> usize {
    let d = dim;
    d + d * d.saturating_sub(1) / 2 + d * d.saturating_sub(1) * d.saturating_sub(2) / 6
}

/// Products of every coordinate subset of size 1, 2 and 3, ordered by size
/// and then lexicographically by index tuple.
pub fn poly_lift(x: &FeatureVec) -> FeatureVec {
    let v = x.as_slice();
    let d = v.len();
    let mut out = Vec::with_capacity(lifted_dim(d));
    out.extend_from_slice(v);
    for i in 0..d {
        for j in i + 1..d {
            out.push(v[i] * v[j]);
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                out.push(v[i] * v[j] * v[k]);
            }
        }
    }
    FeatureVec::new(out).expect("products of finite values are finite")
}

/// Builds the instance from `seed`: agent vectors first, then `θ⋆`.
///
/// With a lift, `θ⋆` is drawn directly in the lifted space.
pub fn gen_instance(spec: &InstanceSpec, seed: u64) -> Result<ProblemInstance> {
    if spec.n_agents == 0 {
        return Err(CobraError::InvalidArgument("need at least one agent".into()));
    }
    if spec.d_c == 0 || spec.d_n == 0 {
        return Err(CobraError::InvalidArgument("d_c and d_n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agent_features = (0..spec.n_agents)
        .map(|_| uniform_vec(spec.d_n, &mut rng))
        .collect();
    let raw = spec.d_c + spec.d_n;
    let dim = match spec.lift {
        Lift::None => raw,
        Lift::SubsetProductsDeg3 => lifted_dim(raw),
    };
    let theta = uniform_vec(dim, &mut rng);
    let theta_star = theta.normalize();
    ProblemInstance::from_parts(
        spec.d_c,
        agent_features,
        theta_star,
        spec.reward_scale,
        spec.noise_scale,
        spec.lift,
        spec.strategies.clone(),
    )
}

impl ProblemInstance {
    /// Assembles an instance from explicit parts (`d_n` is taken from the
    /// agent vectors).
    pub fn from_parts(
        d_c: usize,
        agent_features: Vec<DVector<f64>>,
        theta_star: DVector<f64>,
        reward_scale: f64,
        noise_scale: f64,
        lift: Lift,
        strategies: Vec<Strategy>,
    ) -> Result<Self> {
        let bad = |m: String| Err(CobraError::InvalidArgument(m));
        let Some(first) = agent_features.first() else {
            return bad("need at least one agent".into());
        };
        let d_n = first.len();
        if agent_features.iter().any(|z| z.len() != d_n) {
            return bad("agent feature vectors differ in length".into());
        }
        if strategies.len() != agent_features.len() {
            return bad(format!(
                "{} strategies for {} agents",
                strategies.len(),
                agent_features.len()
            ));
        }
        let raw = d_c + d_n;
        let dim = match lift {
            Lift::None => raw,
            Lift::SubsetProductsDeg3 => lifted_dim(raw),
        };
        if theta_star.len() != dim {
            return bad(format!("theta has {} entries, expected {dim}", theta_star.len()));
        }
        if !(reward_scale.is_finite() && reward_scale > 0.0) {
            return bad("reward scale must be finite and > 0".into());
        }
        if !(noise_scale.is_finite() && noise_scale >= 0.0) {
            return bad("noise scale must be finite and >= 0".into());
        }
        Ok(ProblemInstance {
            d_c,
            d_n,
            agent_features,
            theta_star,
            reward_scale,
            noise_scale,
            lift,
            strategies,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.agent_features.len()
    }

    pub fn d_c(&self) -> usize {
        self.d_c
    }

    pub fn d_n(&self) -> usize {
        self.d_n
    }

    pub fn lift(&self) -> Lift {
        self.lift
    }

    /// Dimension of the (possibly lifted) feature vectors the learner sees.
    pub fn feature_dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn agent_features(&self) -> &[DVector<f64>] {
        &self.agent_features
    }

    pub fn reward_scale(&self) -> f64 {
        self.reward_scale
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    /// Same agents and `θ⋆`, different reporting behaviour.
    pub fn with_strategies(&self, strategies: Vec<Strategy>) -> Result<Self> {
        if strategies.len() != self.n_agents() {
            return Err(CobraError::InvalidArgument(format!(
                "{} strategies for {} agents",
                strategies.len(),
                self.n_agents()
            )));
        }
        Ok(ProblemInstance {
            strategies,
            ..self.clone()
        })
    }

    /// Largest possible `‖x⋆‖₂` for true features with entries in `(0,2)`:
    /// `2√d` unlifted; lifted, each degree-k product is bounded by `2^k`.
    pub fn feature_bound(&self) -> f64 {
        let d = (self.d_c + self.d_n) as f64;
        match self.lift {
            Lift::None => 2.0 * d.sqrt(),
            Lift::SubsetProductsDeg3 => {
                let pairs = d * (d - 1.0) / 2.0;
                let triples = d * (d - 1.0) * (d - 2.0) / 6.0;
                (4.0 * d + 16.0 * pairs + 64.0 * triples).sqrt()
            }
        }
    }

    /// Bound on `‖c θ⋆‖₂`, the parameter the learner estimates.
    pub fn param_bound(&self) -> f64 {
        self.reward_scale
    }

    /// True features of `agent` under context `context`.
    pub fn true_features(&self, context: &DVector<f64>, agent: usize) -> FeatureVec {
        let z = &self.agent_features[agent];
        let raw: Vec<f64> = context.iter().chain(z.iter()).copied().collect();
        let x = FeatureVec::new(raw).expect("context and agent features are finite");
        match self.lift {
            Lift::None => x,
            Lift::SubsetProductsDeg3 => poly_lift(&x),
        }
    }

    /// Draws a context and produces every agent's offer.
    pub fn sample_round(&self, streams: &mut EnvStreams) -> Vec<RoundOffer> {
        let context = uniform_vec(self.d_c, &mut streams.context);
        (0..self.n_agents())
            .map(|a| {
                let x_true = self.true_features(&context, a);
                let x_reported = self.strategies[a].report(&x_true, &mut streams.reports[a]);
                RoundOffer {
                    agent_id: a,
                    x_true,
                    x_reported,
                }
            })
            .collect()
    }

    /// `c · x⋆ᵀθ⋆`.
    pub fn true_reward(&self, x_true: &FeatureVec) -> Result<f64> {
        check_dim(self.feature_dim(), x_true.dim())?;
        Ok(self.reward_scale * x_true.dot(&self.theta_star))
    }

    /// `true_reward + R z`, `z ~ N(0, 1)`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, x_true: &FeatureVec, rng: &mut R) -> Result<f64> {
        let z: f64 = rng.sample(StandardNormal);
        Ok(self.true_reward(x_true)? + self.noise_scale * z)
    }
}
