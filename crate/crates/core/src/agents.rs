//! Decision policies: closed-form myopic best response, noisy local search
//! and tabular Q-learning.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, DiscountParams, ModelParams, PolicyParams};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Myopic,
    LocalSearch,
    QLearning,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::Myopic,
        PolicyKind::LocalSearch,
        PolicyKind::QLearning,
    ];
}

/// Injection maximizing one round's expected payoff, capped to `[0, r_max]`.
///
/// The expected payoff is concave and quadratic in `r`, so the maximizer is
/// the clamped root of the first-order condition
/// `rep * (beta1 * (1 - s) + beta2 * s) - tau - theta * fine_rate - 2 c r = 0`.
pub fn myopic_best_response(s: f64, rep: f64, p: &PolicyParams, m: &ModelParams) -> Result<f64> {
    let theta = model::detection_prob(rep, p)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain {
            what: "transparency",
            value: s,
            expected: "within [0, 1]",
        });
    }
    Ok(unclamped_response(s, rep, theta, p.tau, p, m).clamp(0.0, p.r_max))
}

/// First-order-condition root before clamping. `tau` is passed separately so
/// finite differences may step below zero.
pub(crate) fn unclamped_response(
    s: f64,
    rep: f64,
    theta: f64,
    tau: f64,
    p: &PolicyParams,
    m: &ModelParams,
) -> f64 {
    let fine_rate = match p.fine_mode {
        model::FineMode::KappaProportional => p.kappa,
        model::FineMode::TauProportional => tau,
    };
    let marginal_rent = rep * (m.beta1 * (1.0 - s) + m.beta2 * s);
    (marginal_rent - tau - theta * fine_rate) / (2.0 * m.c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalSearchConfig {
    pub initial_step: f64,
    /// Step multiplier applied after a rejected proposal.
    pub shrink: f64,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        LocalSearchConfig {
            initial_step: 0.1,
            shrink: 0.95,
        }
    }
}

impl LocalSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(Error::invalid(
                "local_search.initial_step",
                format!("must be > 0, got {}", self.initial_step),
            ));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid(
                "local_search.shrink",
                format!("must lie in (0, 1), got {}", self.shrink),
            ));
        }
        Ok(())
    }
}

/// Memory of a perturb-and-compare hill climber.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchState {
    pub step_size: f64,
    pub last_r: f64,
    /// Realized payoff of `last_r`; `None` until the first round is played.
    pub last_payoff: Option<f64>,
}

impl LocalSearchState {
    pub fn new(start_r: f64, cfg: &LocalSearchConfig) -> Self {
        LocalSearchState {
            step_size: cfg.initial_step,
            last_r: start_r,
            last_payoff: None,
        }
    }

    /// Proposes `last_r +/- U(0, step_size)` clamped to `[0, r_max]`. The
    /// very first round plays `last_r` itself to obtain a reference payoff.
    pub fn choose(&self, rng: &mut SimRng, r_max: f64) -> f64 {
        if self.last_payoff.is_none() {
            return self.last_r.clamp(0.0, r_max);
        }
        let magnitude = rng.random::<f64>() * self.step_size;
        let signed = if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        };
        (self.last_r + signed).clamp(0.0, r_max)
    }

    /// Keeps `proposal` if it improved on the reference payoff, otherwise
    /// reverts and shrinks the step. Returns whether the proposal was kept.
    pub fn update(&mut self, proposal: f64, realized: f64, cfg: &LocalSearchConfig) -> bool {
        match self.last_payoff {
            Some(best) if realized <= best => {
                self.step_size *= cfg.shrink;
                false
            }
            _ => {
                self.last_r = proposal;
                self.last_payoff = Some(realized);
                true
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QConfig {
    pub s_bins: usize,
    pub rep_bins: usize,
    /// Number of evenly spaced injection levels on `[0, r_max]`.
    pub n_actions: usize,
    pub learning_rate: f64,
    pub epsilon0: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub lr_schedule: LearningRateSchedule,
}

/// Step size used by the temporal-difference update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRateSchedule {
    /// Always `learning_rate`.
    #[default]
    Constant,
    /// `1 / (1 + n * learning_rate)` after `n` earlier visits of the
    /// state-action pair: starts at 1 and decays like `1 / (n * learning_rate)`.
    VisitCount,
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig {
            s_bins: 10,
            rep_bins: 5,
            n_actions: 11,
            learning_rate: 0.1,
            epsilon0: 0.2,
            epsilon_decay: 0.99,
            epsilon_floor: 0.01,
            lr_schedule: LearningRateSchedule::Constant,
        }
    }
}

impl QConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s_bins == 0 {
            return Err(Error::invalid("q_learning.s_bins", "must be at least 1"));
        }
        if self.rep_bins == 0 {
            return Err(Error::invalid("q_learning.rep_bins", "must be at least 1"));
        }
        if self.n_actions < 2 {
            return Err(Error::invalid("q_learning.n_actions", "must be at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(
                "q_learning.learning_rate",
                format!("must lie in (0, 1], got {}", self.learning_rate),
            ));
        }
        for (field, v) in [
            ("q_learning.epsilon0", self.epsilon0),
            ("q_learning.epsilon_decay", self.epsilon_decay),
            ("q_learning.epsilon_floor", self.epsilon_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(
                    field,
                    format!("must lie in [0, 1], got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Tabular action values over binned `(s, rep)` states.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    s_bins: usize,
    rep_bins: usize,
    action_grid: Vec<f64>,
    values: Vec<f64>,
    visits: Vec<u32>,
    learning_rate: f64,
    lr_schedule: LearningRateSchedule,
    epsilon: f64,
    epsilon_decay: f64,
    epsilon_floor: f64,
}

/// Observed state of a learner: transparency and own reputation.
pub type Observation = (f64, f64);

impl QTable {
    pub fn new(cfg: &QConfig, r_max: f64) -> Result<Self> {
        cfg.validate()?;
        let last = (cfg.n_actions - 1) as f64;
        let action_grid = (0..cfg.n_actions)
            .map(|k| (r_max * k as f64 / last).min(r_max))
            .collect();
        Ok(QTable {
            s_bins: cfg.s_bins,
            rep_bins: cfg.rep_bins,
            action_grid,
            values: vec![0.0; cfg.s_bins * cfg.rep_bins * cfg.n_actions],
            visits: vec![0; cfg.s_bins * cfg.rep_bins * cfg.n_actions],
            learning_rate: cfg.learning_rate,
            lr_schedule: cfg.lr_schedule,
            epsilon: cfg.epsilon0,
            epsilon_decay: cfg.epsilon_decay,
            epsilon_floor: cfg.epsilon_floor.min(cfg.epsilon0),
        })
    }

    pub fn action_grid(&self) -> &[f64] {
        &self.action_grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(0.0, 1.0);
        self.epsilon_floor = self.epsilon_floor.min(self.epsilon);
    }

    fn bin(x: f64, bins: usize) -> usize {
        ((x.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
    }

    pub fn state_bins(&self, obs: Observation) -> (usize, usize) {
        (
            Self::bin(obs.0, self.s_bins),
            Self::bin(obs.1, self.rep_bins),
        )
    }

    fn row(&self, obs: Observation) -> std::ops::Range<usize> {
        let (sb, rb) = self.state_bins(obs);
        let n = self.action_grid.len();
        let start = (sb * self.rep_bins + rb) * n;
        start..start + n
    }

    pub fn value(&self, obs: Observation, action: usize) -> Result<f64> {
        self.check_action(action)?;
        Ok(self.values[self.row(obs).start + action])
    }

    pub fn action_values(&self, obs: Observation) -> &[f64] {
        &self.values[self.row(obs)]
    }

    /// Greedy action index; ties go to the lowest index.
    pub fn greedy(&self, obs: Observation) -> usize {
        let row = self.action_values(obs);
        let mut best = 0;
        for (k, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = k;
            }
        }
        best
    }

    /// Epsilon-greedy choice. Returns the action index and its injection level.
    pub fn choose(&self, obs: Observation, rng: &mut SimRng) -> (usize, f64) {
        let a = if rng.random::<f64>() < self.epsilon {
            rng.random_range(0..self.action_grid.len())
        } else {
            self.greedy(obs)
        };
        (a, self.action_grid[a])
    }

    /// One-step temporal-difference update, then epsilon decay.
    pub fn update(
        &mut self,
        prev: Observation,
        action: usize,
        reward: f64,
        next: Observation,
        beta_disc: f64,
    ) -> Result<()> {
        self.check_action(action)?;
        if !reward.is_finite() {
            return Err(Error::Domain {
                what: "reward",
                value: reward,
                expected: "finite",
            });
        }
        let next_max = self
            .action_values(next)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let idx = self.row(prev).start + action;
        let v = self.values[idx];
        let step = match self.lr_schedule {
            LearningRateSchedule::Constant => self.learning_rate,
            LearningRateSchedule::VisitCount => {
                1.0 / (1.0 + self.visits[idx] as f64 * self.learning_rate)
            }
        };
        self.visits[idx] = self.visits[idx].saturating_add(1);
        self.values[idx] = v + step * (reward + beta_disc * next_max - v);
        self.epsilon = (self.epsilon * self.epsilon_decay).max(self.epsilon_floor);
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action < self.action_grid.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "action",
                index: action,
                len: self.action_grid.len(),
            })
        }
    }

    #[cfg(test)]
    pub(crate) fn set_value(&mut self, obs: Observation, action: usize, v: f64) {
        let idx = self.row(obs).start + action;
        self.values[idx] = v;
    }
}

/// Policy-specific learning state.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionPolicy {
    Myopic,
    LocalSearch(LocalSearchState),
    QLearning(QTable),
}

impl DecisionPolicy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            DecisionPolicy::Myopic => PolicyKind::Myopic,
            DecisionPolicy::LocalSearch(_) => PolicyKind::LocalSearch,
            DecisionPolicy::QLearning(_) => PolicyKind::QLearning,
        }
    }
}

/// One rent-seeker.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: u32,
    pub r_current: f64,
    pub rep: f64,
    pub disc_utility: f64,
    pub policy: DecisionPolicy,
}

/// What an agent played this round, kept until its learning update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub r: f64,
    /// Q-table action index, for learners.
    pub action: Option<usize>,
}

impl AgentState {
    pub fn policy_kind(&self) -> PolicyKind {
        self.policy.kind()
    }

    /// Chooses this round's injection from the shared transparency snapshot.
    pub fn decide(
        &self,
        s: f64,
        p: &PolicyParams,
        m: &ModelParams,
        rng: &mut SimRng,
    ) -> Result<Decision> {
        let decision = match &self.policy {
            DecisionPolicy::Myopic => Decision {
                r: myopic_best_response(s, self.rep, p, m)?,
                action: None,
            },
            DecisionPolicy::LocalSearch(state) => Decision {
                r: state.choose(rng, p.r_max),
                action: None,
            },
            DecisionPolicy::QLearning(q) => {
                let (a, r) = q.choose((s, self.rep), rng);
                Decision { r, action: Some(a) }
            }
        };
        Ok(decision)
    }

    /// Applies the policy's learning rule after the round has been realized.
    pub fn learn(
        &mut self,
        decision: Decision,
        prev: Observation,
        reward: f64,
        next: Observation,
        beta_disc: f64,
        ls: &LocalSearchConfig,
    ) -> Result<()> {
        match &mut self.policy {
            DecisionPolicy::Myopic => {}
            DecisionPolicy::LocalSearch(state) => {
                state.update(decision.r, reward, ls);
            }
            DecisionPolicy::QLearning(q) => {
                let action = decision.action.ok_or(Error::IndexOutOfRange {
                    what: "action",
                    index: usize::MAX,
                    len: q.action_grid().len(),
                })?;
                q.update(prev, action, reward, next, beta_disc)?;
            }
        }
        Ok(())
    }
}

/// Trains a Q-table in an environment where transparency and reputation are
/// held fixed, with detection drawn each round and realized payoffs as
/// rewards. Each episode lasts `discount.horizon_t` rounds.
#[allow(clippy::too_many_arguments)]
pub fn train_frozen(
    q: &mut QTable,
    s: f64,
    rep: f64,
    p: &PolicyParams,
    m: &ModelParams,
    discount: &DiscountParams,
    episodes: usize,
    decision_rng: &mut SimRng,
    detection_rng: &mut SimRng,
) -> Result<()> {
    let theta = model::detection_prob(rep, p)?;
    let obs = (s, rep);
    for _ in 0..episodes {
        for _ in 0..discount.horizon_t {
            let (a, r) = q.choose(obs, decision_rng);
            let detected = detection_rng.random::<f64>() < theta && r > 0.0;
            let reward = model::payoff(r, s, rep, p, m, detected)?;
            q.update(obs, a, reward, obs, discount.beta_disc)?;
        }
    }
    Ok(())
}
