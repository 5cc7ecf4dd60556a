//! Leave-one-out misreport detection.
//!
//! For agent `a`, the data of every *other* agent gives an estimate
//! `θ̂_{−a}` that `a` cannot influence. Summing the pessimistic scores of
//! `a`'s reported features under that estimate gives a lower bound on the
//! reward `a` should have produced; a sub-Gaussian tail bound on the rewards
//! `a` did produce gives an upper bound. When the lower bound exceeds the
//! upper bound the agent must have inflated its reports and is eliminated.

use std::collections::BTreeSet;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CobraError, Result};
use crate::lin_core::{check_dim, lcb_value, ConfidenceParams, DesignState, FeatureVec, ThetaEstimate};

/// Tolerance below `λ` accepted for the smallest eigenvalue of a
/// leave-one-out Gram matrix.
const LOO_EIGEN_SLACK: f64 = 1e-6;

/// Everything an agent has contributed to the global design.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLedger {
    agent_id: usize,
    selected_features: Vec<FeatureVec>,
    reward_sum: f64,
    contrib_gram: DMatrix<f64>,
    contrib_moment: DVector<f64>,
    feature_sum: DVector<f64>,
    active: bool,
}

impl AgentLedger {
    pub fn new(agent_id: usize, dim: usize) -> Self {
        AgentLedger {
            agent_id,
            selected_features: Vec::new(),
            reward_sum: 0.0,
            contrib_gram: DMatrix::zeros(dim, dim),
            contrib_moment: DVector::zeros(dim),
            feature_sum: DVector::zeros(dim),
            active: true,
        }
    }

    pub fn agent_id(&self) -> usize {
        self.agent_id
    }

    pub fn dim(&self) -> usize {
        self.contrib_moment.len()
    }

    /// Reported features at the rounds this agent was selected, frozen as reported.
    pub fn selected_features(&self) -> &[FeatureVec] {
        &self.selected_features
    }

    pub fn reward_sum(&self) -> f64 {
        self.reward_sum
    }

    /// `S_t(a)`.
    pub fn pull_count(&self) -> usize {
        self.selected_features.len()
    }

    pub fn contrib_gram(&self) -> &DMatrix<f64> {
        &self.contrib_gram
    }

    pub fn contrib_moment(&self) -> &DVector<f64> {
        &self.contrib_moment
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub(crate) fn deactivate(&mut self) {
        self.active = false;
    }

    pub fn record(&mut self, x: &FeatureVec, y: f64) -> Result<()> {
        check_dim(self.dim(), x.dim())?;
        let v = x.as_vector();
        self.contrib_gram.ger(1.0, v, v, 1.0);
        self.contrib_moment.axpy(y, v, 1.0);
        self.feature_sum += v;
        self.reward_sum += y;
        self.selected_features.push(x.clone());
        Ok(())
    }
}

/// Result of one misreport test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoomOutcome {
    pub agent_id: usize,
    pub lcb_sum_x: f64,
    pub ucb_sum_y: f64,
    pub tripped: bool,
    pub delta_x: f64,
    pub delta_y: f64,
}

/// Per-agent, per-round failure probability `δ / (2 N t (t+1))`.
///
/// Summed over agents and rounds `t ≥ 1` this telescopes to at most `δ/2`
/// for each of the two bounds.
pub fn delta_schedule(delta: f64, n_agents: usize, t: usize) -> f64 {
    let t = t.max(1) as f64;
    delta / (2.0 * n_agents.max(1) as f64 * t * (t + 1.0))
}

/// The design with agent `a`'s observations removed.
pub fn loo_design(global: &DesignState, ledger: &AgentLedger) -> Result<DesignState> {
    check_dim(global.dim(), ledger.dim())?;
    let pulls = ledger.pull_count();
    if pulls == 0 {
        return Ok(global.clone());
    }
    if pulls > global.count() {
        return Err(CobraError::Consistency(format!(
            "agent {} has {pulls} pulls but the design holds {} observations",
            ledger.agent_id,
            global.count()
        )));
    }
    if pulls == global.count() {
        return DesignState::new(global.dim(), global.lambda());
    }
    let gram = global.gram() - &ledger.contrib_gram;
    check_min_eigen(&gram, global.lambda(), ledger.agent_id)?;
    let moment = global.moment() - &ledger.contrib_moment;
    DesignState::from_parts(global.lambda(), gram, moment, global.count() - pulls)
}

fn check_min_eigen(gram: &DMatrix<f64>, lambda: f64, agent_id: usize) -> Result<()> {
    // Cholesky of V − (λ − slack)I succeeds iff every eigenvalue exceeds λ − slack.
    let dim = gram.nrows();
    let shifted = gram - DMatrix::identity(dim, dim) * (lambda - LOO_EIGEN_SLACK);
    if Cholesky::new(shifted).is_none() {
        return Err(CobraError::Consistency(format!(
            "leave-one-out gram for agent {agent_id} has an eigenvalue below lambda"
        )));
    }
    Ok(())
}

/// `Σ_s LCB_{−a}(x_s)` over the agent's selected reported features.
pub fn lcb_sum_x(
    ledger: &AgentLedger,
    loo_state: &DesignState,
    loo_theta: &ThetaEstimate,
    loo_alpha: f64,
) -> Result<f64> {
    ledger
        .selected_features
        .iter()
        .map(|x| lcb_value(loo_theta, x, loo_alpha, loo_state))
        .sum()
}

/// `Σ y_s + √(2 R² S_t(a) log(1/δ_y))`.
pub fn ucb_sum_y(ledger: &AgentLedger, noise_scale: f64, delta_y: f64) -> f64 {
    let n = ledger.pull_count() as f64;
    let bonus = (2.0 * noise_scale * noise_scale * n * (1.0 / delta_y).ln()).max(0.0);
    ledger.reward_sum + bonus.sqrt()
}

/// Runs the misreport test for one agent against the current global design.
///
/// `n_agents` is the size of the original agent population (it enters the
/// failure-probability schedule). Side-effect free.
pub fn loom_check(
    ledger: &AgentLedger,
    global: &DesignState,
    params: &ConfidenceParams,
    n_agents: usize,
) -> Result<LoomOutcome> {
    let t = global.count();
    let delta_x = delta_schedule(params.delta, n_agents, t);
    let delta_y = delta_x;
    if ledger.pull_count() == 0 {
        return Ok(LoomOutcome {
            agent_id: ledger.agent_id,
            lcb_sum_x: 0.0,
            ucb_sum_y: 0.0,
            tripped: false,
            delta_x,
            delta_y,
        });
    }
    let loo = loo_design(global, ledger)?;
    let theta = loo.fit();
    let alpha = params.loo_alpha_with_delta(t, ledger.pull_count(), delta_x)?;
    let lcb = lcb_sum_x(ledger, &loo, &theta, alpha)?;
    let ucb = ucb_sum_y(ledger, params.noise_scale, delta_y);
    Ok(LoomOutcome {
        agent_id: ledger.agent_id,
        lcb_sum_x: lcb,
        ucb_sum_y: ucb,
        tripped: lcb > ucb,
        delta_x,
        delta_y,
    })
}

/// Like [`loom_check`], but first tries to clear the agent cheaply.
///
/// The pessimistic sum is at most `(Σ_s x_s)ᵀ θ̂_{−a}` because every bonus is
/// nonnegative, so if that already falls below the reward bound the test
/// cannot trip and `None` is returned. Otherwise the full outcome is computed.
pub fn loom_check_screened(
    ledger: &AgentLedger,
    global: &DesignState,
    params: &ConfidenceParams,
    n_agents: usize,
) -> Result<Option<LoomOutcome>> {
    if ledger.pull_count() == 0 {
        return Ok(None);
    }
    let t = global.count();
    let delta_y = delta_schedule(params.delta, n_agents, t);
    let ucb = ucb_sum_y(ledger, params.noise_scale, delta_y);
    if ledger.pull_count() < t {
        let gram = global.gram() - &ledger.contrib_gram;
        let moment = global.moment() - &ledger.contrib_moment;
        if let Some(chol) = Cholesky::new(gram) {
            let theta = chol.solve(&moment);
            if ledger.feature_sum.dot(&theta) <= ucb {
                return Ok(None);
            }
        }
    } else if 0.0 <= ucb {
        // No other data: θ̂_{−a} = 0.
        return Ok(None);
    }
    loom_check(ledger, global, params, n_agents).map(Some)
}

/// Removes every tripped agent from `active`; returns the removed ids in order.
pub fn apply_elimination(active: &mut BTreeSet<usize>, outcomes: &[LoomOutcome]) -> Vec<usize> {
    outcomes
        .iter()
        .filter(|o| o.tripped && active.remove(&o.agent_id))
        .map(|o| o.agent_id)
        .collect()
}
