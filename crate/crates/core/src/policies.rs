//! Arm selection: COBRA (UCB / TS with leave-one-out elimination) and the
//! truthful baselines Lin-UCB and Lin-TS.
//!
//! All four share one [`PolicyState`]; they differ only in how offers are
//! scored and whether [`PolicyState::post_round`] runs the misreport test.

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CobraError, Result};
use crate::lin_core::{
    lcb_value, ts_draw, ucb_value, ConfidenceParams, DesignState, FeatureVec, ThetaEstimate,
};
use crate::loom::{
    apply_elimination, loo_design, loom_check_screened, AgentLedger, LoomOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    CobraUcb,
    CobraTs,
    LinUcb,
    LinTs,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::CobraUcb,
        PolicyKind::CobraTs,
        PolicyKind::LinUcb,
        PolicyKind::LinTs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::CobraUcb => "cobra_ucb",
            PolicyKind::CobraTs => "cobra_ts",
            PolicyKind::LinUcb => "lin_ucb",
            PolicyKind::LinTs => "lin_ts",
        }
    }

    pub fn is_cobra(self) -> bool {
        matches!(self, PolicyKind::CobraUcb | PolicyKind::CobraTs)
    }

    pub fn uses_sampling(self) -> bool {
        matches!(self, PolicyKind::CobraTs | PolicyKind::LinTs)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = CobraError;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CobraError::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Which agents the misreport test visits after each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoomScope {
    /// Every active agent, every round.
    #[default]
    All,
    /// Only the agent selected this round.
    Selected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub confidence: ConfidenceParams,
    pub loom_enabled: bool,
    pub loom_check_scope: LoomScope,
}

impl PolicyConfig {
    /// LOOM is switched on exactly for the COBRA variants.
    pub fn new(kind: PolicyKind, confidence: ConfidenceParams) -> Self {
        PolicyConfig {
            kind,
            confidence,
            loom_enabled: kind.is_cobra(),
            loom_check_scope: LoomScope::All,
        }
    }

    pub fn with_scope(mut self, scope: LoomScope) -> Self {
        self.loom_check_scope = scope;
        self
    }

    /// Overrides the LOOM switch (ablations only).
    pub fn with_loom(mut self, enabled: bool) -> Self {
        self.loom_enabled = enabled;
        self
    }
}

/// An estimator with a symmetric confidence half-width, usable by the
/// leave-one-out test on both the full and the reduced observation pool.
pub trait ConfidenceBound<P> {
    fn estimate(&self, pool: &P, x: &FeatureVec) -> Result<f64>;

    fn half_width(&self, pool: &P, x: &FeatureVec) -> Result<f64>;

    fn upper(&self, pool: &P, x: &FeatureVec) -> Result<f64> {
        Ok(self.estimate(pool, x)? + self.half_width(pool, x)?)
    }

    fn lower(&self, pool: &P, x: &FeatureVec) -> Result<f64> {
        Ok(self.estimate(pool, x)? - self.half_width(pool, x)?)
    }
}

/// A ridge pool with its fitted estimate and ellipsoid radius.
#[derive(Debug, Clone)]
pub struct LinearPool<'a> {
    pub design: Cow<'a, DesignState>,
    pub theta: ThetaEstimate,
    pub alpha: f64,
}

impl<'a> LinearPool<'a> {
    /// All observations; radius `α_t` at `t = design.count()`.
    pub fn full(design: &'a DesignState, params: &ConfidenceParams) -> Self {
        LinearPool {
            theta: design.fit(),
            alpha: params.alpha(design.count()),
            design: Cow::Borrowed(design),
        }
    }

    /// All observations except the ledger's agent; radius `α_{t,−a}`.
    pub fn leave_one_out(
        global: &DesignState,
        ledger: &AgentLedger,
        params: &ConfidenceParams,
    ) -> Result<LinearPool<'static>> {
        let design = loo_design(global, ledger)?;
        Ok(LinearPool {
            theta: design.fit(),
            alpha: params.loo_alpha(global.count(), ledger.pull_count())?,
            design: Cow::Owned(design),
        })
    }
}

/// `h(x) = α ‖x‖_{V⁻¹}` around the ridge estimate.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearBound;

impl ConfidenceBound<LinearPool<'_>> for LinearBound {
    fn estimate(&self, pool: &LinearPool<'_>, x: &FeatureVec) -> Result<f64> {
        pool.theta.predict(x)
    }

    fn half_width(&self, pool: &LinearPool<'_>, x: &FeatureVec) -> Result<f64> {
        Ok(pool.alpha * pool.design.weighted_norm(x)?)
    }

    fn upper(&self, pool: &LinearPool<'_>, x: &FeatureVec) -> Result<f64> {
        ucb_value(&pool.theta, x, pool.alpha, &pool.design)
    }

    fn lower(&self, pool: &LinearPool<'_>, x: &FeatureVec) -> Result<f64> {
        lcb_value(&pool.theta, x, pool.alpha, &pool.design)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    Agent(usize),
    Stopped,
}

/// Per-round check of the optimism assumptions; diagnostics only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub offers_checked: usize,
    /// Offers whose true value at the reported features exceeded `UCB_t`.
    pub optimism_violations: usize,
    /// `UCB_t(x) ≤ UCB_{t,−a}(x)` for the selected agent.
    pub loo_ordering_holds: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct PolicyState {
    config: PolicyConfig,
    global: DesignState,
    ledgers: Vec<AgentLedger>,
    active: BTreeSet<usize>,
    round: usize,
    stopped: bool,
    pending: Option<usize>,
}

impl PolicyState {
    /// Fresh state for agents `0..n_agents`.
    pub fn new(config: PolicyConfig, n_agents: usize) -> Result<Self> {
        config.confidence.validate()?;
        if n_agents == 0 {
            return Err(CobraError::InvalidArgument("need at least one agent".into()));
        }
        let dim = config.confidence.dim;
        Ok(PolicyState {
            global: DesignState::new(dim, config.confidence.lambda)?,
            ledgers: (0..n_agents).map(|a| AgentLedger::new(a, dim)).collect(),
            active: (0..n_agents).collect(),
            round: 0,
            stopped: false,
            pending: None,
            config,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn global(&self) -> &DesignState {
        &self.global
    }

    pub fn ledgers(&self) -> &[AgentLedger] {
        &self.ledgers
    }

    pub fn ledger(&self, agent_id: usize) -> Option<&AgentLedger> {
        self.ledgers.get(agent_id)
    }

    pub fn active(&self) -> &BTreeSet<usize> {
        &self.active
    }

    /// Number of observed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// Scores the offers and returns the argmax, ties going to the smallest id.
    ///
    /// TS variants draw a single `θ̃` per round shared by every offer.
    pub fn select_arm<R: Rng + ?Sized>(
        &mut self,
        offers: &[(usize, &FeatureVec)],
        rng: &mut R,
    ) -> Result<Selection> {
        if self.stopped || offers.is_empty() {
            return Ok(Selection::Stopped);
        }
        if let Some(&(id, _)) = offers.iter().find(|(id, _)| !self.active.contains(id)) {
            return Err(CobraError::InvalidState(format!(
                "offer from inactive or unknown agent {id}"
            )));
        }
        let scores = self.scores(offers, rng)?;
        let best = offers
            .iter()
            .zip(&scores)
            .fold(None::<(usize, f64)>, |best, (&(id, _), &s)| match best {
                Some((bid, bs)) if bs > s || (bs == s && bid < id) => Some((bid, bs)),
                _ => Some((id, s)),
            })
            .map(|(id, _)| id)
            .expect("offers are non-empty");
        self.pending = Some(best);
        Ok(Selection::Agent(best))
    }

    fn scores<R: Rng + ?Sized>(
        &self,
        offers: &[(usize, &FeatureVec)],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let params = &self.config.confidence;
        if self.config.kind.uses_sampling() {
            let theta = self.global.fit();
            let beta = params.beta(self.round + 1);
            let sample = ts_draw(&theta, &self.global, beta, rng);
            offers.iter().map(|(_, x)| sample_score(&sample, x)).collect()
        } else {
            let pool = LinearPool::full(&self.global, params);
            offers.iter().map(|(_, x)| LinearBound.upper(&pool, x)).collect()
        }
    }

    /// Absorbs the selected agent's reported features and observed reward.
    pub fn observe(&mut self, agent_id: usize, x_reported: &FeatureVec, y: f64) -> Result<()> {
        if !self.active.contains(&agent_id) {
            return Err(CobraError::InvalidState(format!("agent {agent_id} is not active")));
        }
        if let Some(p) = self.pending {
            if p != agent_id {
                return Err(CobraError::InvalidState(format!(
                    "agent {agent_id} observed but agent {p} was selected"
                )));
            }
        }
        self.global.update(x_reported, y)?;
        self.ledgers[agent_id].record(x_reported, y)?;
        self.round += 1;
        self.pending = Some(agent_id);
        Ok(())
    }

    /// Runs the misreport test (when enabled) and removes tripped agents.
    /// Returns the outcomes of the eliminated agents.
    pub fn post_round(&mut self) -> Result<Vec<LoomOutcome>> {
        let observed = self.pending.take();
        if !self.config.loom_enabled || self.stopped {
            return Ok(Vec::new());
        }
        let candidates: Vec<usize> = match self.config.loom_check_scope {
            LoomScope::All => self.active.iter().copied().collect(),
            LoomScope::Selected => observed.into_iter().collect(),
        };
        let n_agents = self.ledgers.len();
        let mut tripped = Vec::new();
        for a in candidates {
            let outcome =
                loom_check_screened(&self.ledgers[a], &self.global, &self.config.confidence, n_agents)?;
            if let Some(o) = outcome.filter(|o| o.tripped) {
                tripped.push(o);
            }
        }
        for a in apply_elimination(&mut self.active, &tripped) {
            self.ledgers[a].deactivate();
        }
        if self.active.is_empty() {
            self.stopped = true;
        }
        Ok(tripped)
    }

    /// Checks, at the current (pre-observation) state, whether
    /// `f(x) ≤ UCB_t(x)` for every offer and whether `UCB_t ≤ UCB_{t,−a}` for
    /// the selected agent. `true_value` evaluates the true reward function.
    pub fn assumption_monitor(
        &self,
        offers: &[(usize, &FeatureVec)],
        selection: Selection,
        true_value: impl Fn(&FeatureVec) -> Result<f64>,
    ) -> Result<MonitorRecord> {
        let params = &self.config.confidence;
        let pool = LinearPool::full(&self.global, params);
        let mut violations = 0;
        for (_, x) in offers {
            if true_value(x)? > LinearBound.upper(&pool, x)? {
                violations += 1;
            }
        }
        let loo_ordering_holds = match selection {
            Selection::Agent(a) => {
                let x = offers
                    .iter()
                    .find(|(id, _)| *id == a)
                    .map(|(_, x)| *x)
                    .ok_or_else(|| {
                        CobraError::InvalidArgument(format!("selected agent {a} made no offer"))
                    })?;
                let loo = LinearPool::leave_one_out(&self.global, &self.ledgers[a], params)?;
                Some(LinearBound.upper(&pool, x)? <= LinearBound.upper(&loo, x)?)
            }
            Selection::Stopped => None,
        };
        Ok(MonitorRecord {
            offers_checked: offers.len(),
            optimism_violations: violations,
            loo_ordering_holds,
        })
    }
}

fn sample_score(sample: &DVector<f64>, x: &FeatureVec) -> Result<f64> {
    crate::lin_core::check_dim(sample.len(), x.dim())?;
    Ok(x.dot(sample))
}
