//! Round-by-round simulation.
//!
//! Each round every agent acts on the same transparency snapshot:
//! decision, detection draw, realized payoff, reputation update, learning
//! update, then the transparency transition driven by this round's mean
//! injection. Aggregates are order independent, and every agent draws from
//! streams keyed by its id, so a run is a pure function of its config.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    AgentState, DecisionPolicy, LocalSearchConfig, LocalSearchState, PolicyKind, QConfig, QTable,
};
use crate::error::{Error, Result};
use crate::model::{self, DiscountParams, ModelParams, PolicyParams};
use crate::rng::{self, SimRng, StreamId};
use crate::stats;

/// Range from which initial injections are drawn.
pub const INITIAL_INJECTION: (f64, f64) = (0.8, 1.0);
pub const HISTOGRAM_BINS: usize = 10;

/// Shares of the population running each decision policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyMix {
    pub myopic: f64,
    pub local_search: f64,
    pub q_learning: f64,
}

impl Default for PolicyMix {
    fn default() -> Self {
        PolicyMix::only(PolicyKind::Myopic)
    }
}

impl PolicyMix {
    pub fn only(kind: PolicyKind) -> Self {
        let mut mix = PolicyMix {
            myopic: 0.0,
            local_search: 0.0,
            q_learning: 0.0,
        };
        *mix.share_mut(kind) = 1.0;
        mix
    }

    pub fn share(&self, kind: PolicyKind) -> f64 {
        match kind {
            PolicyKind::Myopic => self.myopic,
            PolicyKind::LocalSearch => self.local_search,
            PolicyKind::QLearning => self.q_learning,
        }
    }

    fn share_mut(&mut self, kind: PolicyKind) -> &mut f64 {
        match kind {
            PolicyKind::Myopic => &mut self.myopic,
            PolicyKind::LocalSearch => &mut self.local_search,
            PolicyKind::QLearning => &mut self.q_learning,
        }
    }

    /// Agent counts per policy by largest remainder; ties favour the
    /// earlier policy in [`PolicyKind::ALL`].
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let exact: Vec<f64> = PolicyKind::ALL
            .iter()
            .map(|k| self.share(*k) * n as f64)
            .collect();
        let mut counts = [0usize; 3];
        for (c, e) in counts.iter_mut().zip(&exact) {
            *c = e.floor() as usize;
        }
        let mut left = n.saturating_sub(counts.iter().sum());
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|a, b| {
            let fa = exact[*a] - exact[*a].floor();
            let fb = exact[*b] - exact[*b].floor();
            fb.total_cmp(&fa).then(a.cmp(b))
        });
        for k in order {
            if left == 0 {
                break;
            }
            counts[k] += 1;
            left -= 1;
        }
        counts
    }

    fn validate(&self) -> Result<()> {
        for kind in PolicyKind::ALL {
            let v = self.share(kind);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(
                    "agent_policy_mix",
                    format!("share of {kind:?} must be >= 0, got {v}"),
                ));
            }
        }
        let total = self.myopic + self.local_search + self.q_learning;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "agent_policy_mix",
                format!("shares must sum to 1, got {total}"),
            ));
        }
        Ok(())
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelParams,
    pub policy: PolicyParams,
    pub discount: DiscountParams,
    pub n_agents: usize,
    pub agent_policy_mix: PolicyMix,
    pub s0: f64,
    pub master_seed: u64,
    pub snapshot_rounds: Vec<usize>,
    pub local_search: LocalSearchConfig,
    pub q_learning: QConfig,
    /// Unrecorded episodes played before the recorded one. Q-tables carry
    /// over between episodes; everything else is reset.
    pub training_episodes: usize,
    /// Diversity level below which the population counts as converged.
    pub convergence_threshold: f64,
    /// Share of agents without access to manipulation rents (`beta2 = 0`).
    pub troll_fraction: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            model: ModelParams::default(),
            policy: PolicyParams::default(),
            discount: DiscountParams::default(),
            n_agents: 100,
            agent_policy_mix: PolicyMix::default(),
            s0: 0.5,
            master_seed: 0,
            snapshot_rounds: vec![0, 50, 99],
            local_search: LocalSearchConfig::default(),
            q_learning: QConfig::default(),
            training_episodes: 0,
            convergence_threshold: 0.02,
            troll_fraction: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.policy.validate()?;
        self.discount.validate()?;
        self.local_search.validate()?;
        self.q_learning.validate()?;
        self.agent_policy_mix.validate()?;
        if self.n_agents == 0 {
            return Err(Error::invalid("n_agents", "must be at least 1"));
        }
        if self.n_agents > u32::MAX as usize {
            return Err(Error::invalid("n_agents", "too many agents"));
        }
        if !(0.0..=1.0).contains(&self.s0) {
            return Err(Error::invalid(
                "s0",
                format!("must lie in [0, 1], got {}", self.s0),
            ));
        }
        if let Some(r) = self
            .snapshot_rounds
            .iter()
            .find(|r| **r >= self.discount.horizon_t)
        {
            return Err(Error::invalid(
                "snapshot_rounds",
                format!("round {r} is beyond horizon {}", self.discount.horizon_t),
            ));
        }
        if !(self.convergence_threshold.is_finite() && self.convergence_threshold > 0.0) {
            return Err(Error::invalid(
                "convergence_threshold",
                format!("must be > 0, got {}", self.convergence_threshold),
            ));
        }
        if !(0.0..=1.0).contains(&self.troll_fraction) {
            return Err(Error::invalid(
                "troll_fraction",
                format!("must lie in [0, 1], got {}", self.troll_fraction),
            ));
        }
        Ok(())
    }

    /// Sets a numeric field addressed by a dotted path such as `policy.tau`.
    pub fn set_param(&mut self, path: &str, value: f64) -> Result<()> {
        let slot: &mut f64 = match path {
            "model.gamma" => &mut self.model.gamma,
            "model.delta" => &mut self.model.delta,
            "model.beta1" => &mut self.model.beta1,
            "model.beta2" => &mut self.model.beta2,
            "model.c" => &mut self.model.c,
            "model.phi" => &mut self.model.phi,
            "model.psi" => &mut self.model.psi,
            "model.eta" => &mut self.model.eta,
            "model.sigma_eps" => &mut self.model.sigma_eps,
            "policy.tau" => &mut self.policy.tau,
            "policy.theta0" => &mut self.policy.theta0,
            "policy.alpha" => &mut self.policy.alpha,
            "policy.kappa" => &mut self.policy.kappa,
            "policy.delta_rep" => &mut self.policy.delta_rep,
            "policy.rho" => &mut self.policy.rho,
            "policy.r_max" => &mut self.policy.r_max,
            "policy.rep_recovery" => &mut self.policy.rep_recovery,
            "discount.beta_disc" => &mut self.discount.beta_disc,
            "s0" => &mut self.s0,
            "convergence_threshold" => &mut self.convergence_threshold,
            "troll_fraction" => &mut self.troll_fraction,
            "local_search.initial_step" => &mut self.local_search.initial_step,
            "local_search.shrink" => &mut self.local_search.shrink,
            "q_learning.learning_rate" => &mut self.q_learning.learning_rate,
            "q_learning.epsilon0" => &mut self.q_learning.epsilon0,
            "q_learning.epsilon_decay" => &mut self.q_learning.epsilon_decay,
            "q_learning.epsilon_floor" => &mut self.q_learning.epsilon_floor,
            "discount.horizon_t" | "n_agents" | "training_episodes" | "master_seed" => {
                let n = as_count(path, value)?;
                match path {
                    "discount.horizon_t" => self.discount.horizon_t = n as usize,
                    "n_agents" => self.n_agents = n as usize,
                    "training_episodes" => self.training_episodes = n as usize,
                    _ => self.master_seed = n,
                }
                return Ok(());
            }
            _ => {
                return Err(Error::invalid(path, "unknown parameter path"));
            }
        };
        *slot = value;
        Ok(())
    }
}

fn as_count(path: &str, value: f64) -> Result<u64> {
    if value.is_finite() && value >= 0.0 && value.fract() == 0.0 && value < u64::MAX as f64 {
        Ok(value as u64)
    } else {
        Err(Error::invalid(
            path,
            format!("must be a non-negative integer, got {value}"),
        ))
    }
}

/// Metrics of one round, taken at decision time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub r_bar: f64,
    pub s: f64,
    pub loss: f64,
    pub mean_utility: f64,
    pub diversity: f64,
    pub theta_bar: f64,
    pub collateral: f64,
    pub detected_count: usize,
}

/// Equal-width histogram over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0; bins];
        let width = (hi - lo) / bins as f64;
        for v in values {
            let k = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + width * k as f64, self.lo + width * (k + 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub round: usize,
    pub histogram: Histogram,
}

/// Pearson matrix with `None` wherever a series is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        self.values[i][j]
    }
}

pub fn correlation_matrix(series: &[(&str, &[f64])]) -> Result<CorrelationMatrix> {
    let n = series.len();
    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let rho = if i == j {
                stats::pearson(series[i].1, series[j].1)?.map(|_| 1.0)
            } else {
                stats::pearson(series[i].1, series[j].1)?
            };
            values[i][j] = rho;
            values[j][i] = rho;
        }
    }
    Ok(CorrelationMatrix {
        labels: series.iter().map(|(l, _)| l.to_string()).collect(),
        values,
    })
}

/// Population standard deviation of this round's injections.
pub fn diversity(r_values: &[f64]) -> Result<f64> {
    stats::pop_std(r_values)
}

/// End-of-run state of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub id: u32,
    pub kind: PolicyKind,
    pub final_r: f64,
    pub final_rep: f64,
    pub disc_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub series: Vec<RoundRecord>,
    pub rep_snapshots: Vec<Snapshot>,
    pub r_snapshots: Vec<Snapshot>,
    pub correlation: CorrelationMatrix,
    pub convergence_step: Option<usize>,
    /// Mean collateral damage per round.
    pub false_injury_rate: f64,
    pub agents: Vec<AgentSummary>,
}

impl RunResult {
    /// `sum_t beta^t * loss_t` over the recorded rounds.
    pub fn cumulative_discounted_loss(&self, beta: f64) -> f64 {
        let mut weight = 1.0;
        let mut total = 0.0;
        for rec in &self.series {
            total += weight * rec.loss;
            weight *= beta;
        }
        total
    }

    pub fn column(&self, f: impl Fn(&RoundRecord) -> f64) -> Vec<f64> {
        self.series.iter().map(f).collect()
    }
}

pub const CORRELATION_LABELS: [&str; 4] = ["r_bar", "s", "loss", "mean_utility"];

struct AgentSlot {
    state: AgentState,
    initial_r: f64,
    /// Model seen by this agent; trolls have no manipulation rents.
    model: ModelParams,
    decision_rng: SimRng,
    detection_rng: SimRng,
}

/// A configured simulation. Most callers want [`run`].
pub struct Engine {
    cfg: ScenarioConfig,
    slots: Vec<AgentSlot>,
    noise_rng: SimRng,
}

impl Engine {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let counts = cfg.agent_policy_mix.counts(cfg.n_agents);
        let kinds = PolicyKind::ALL
            .iter()
            .zip(counts)
            .flat_map(|(k, c)| std::iter::repeat_n(*k, c));
        let n_trolls = (cfg.troll_fraction * cfg.n_agents as f64).round() as usize;
        let first_troll = cfg.n_agents - n_trolls;

        let mut slots = Vec::with_capacity(cfg.n_agents);
        for (i, kind) in kinds.enumerate() {
            let id = i as u32;
            let mut init = rng::rng_stream(cfg.master_seed, StreamId::Init(id));
            let (lo, hi) = INITIAL_INJECTION;
            let initial_r = (lo + (hi - lo) * init.random::<f64>()).min(cfg.policy.r_max);
            let policy = match kind {
                PolicyKind::Myopic => DecisionPolicy::Myopic,
                PolicyKind::LocalSearch => {
                    DecisionPolicy::LocalSearch(LocalSearchState::new(initial_r, &cfg.local_search))
                }
                PolicyKind::QLearning => {
                    DecisionPolicy::QLearning(QTable::new(&cfg.q_learning, cfg.policy.r_max)?)
                }
            };
            let mut model = cfg.model;
            if i >= first_troll {
                model.beta2 = 0.0;
            }
            slots.push(AgentSlot {
                state: AgentState {
                    id,
                    r_current: initial_r,
                    rep: 1.0,
                    disc_utility: 0.0,
                    policy,
                },
                initial_r,
                model,
                decision_rng: rng::rng_stream(cfg.master_seed, StreamId::Decision(id)),
                detection_rng: rng::rng_stream(cfg.master_seed, StreamId::Detection(id)),
            });
        }
        Ok(Engine {
            cfg: cfg.clone(),
            slots,
            noise_rng: rng::rng_stream(cfg.master_seed, StreamId::Noise),
        })
    }

    /// Reorders agents: position `k` receives the agent previously at
    /// `order[k]`. Agents keep their ids and streams.
    pub fn permute_agents(&mut self, order: &[usize]) -> Result<()> {
        let n = self.slots.len();
        let mut seen = vec![false; n];
        for &k in order {
            if k >= n || seen[k] {
                return Err(Error::invalid(
                    "order",
                    "not a permutation of agent positions",
                ));
            }
            seen[k] = true;
        }
        if order.len() != n {
            return Err(Error::invalid(
                "order",
                "not a permutation of agent positions",
            ));
        }
        let mut old: Vec<Option<AgentSlot>> = self.slots.drain(..).map(Some).collect();
        self.slots = order
            .iter()
            .map(|&k| old[k].take().expect("checked permutation"))
            .collect();
        Ok(())
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentState> {
        self.slots.iter().map(|s| &s.state)
    }

    fn reset_episode(&mut self) {
        for slot in &mut self.slots {
            slot.state.rep = 1.0;
            slot.state.r_current = slot.initial_r;
            slot.state.disc_utility = 0.0;
            if let DecisionPolicy::LocalSearch(ls) = &mut slot.state.policy {
                *ls = LocalSearchState::new(slot.initial_r, &self.cfg.local_search);
            }
        }
    }

    /// Plays the training episodes, then the recorded one.
    pub fn run(mut self) -> Result<RunResult> {
        for _ in 0..self.cfg.training_episodes {
            self.reset_episode();
            self.play_episode(None)?;
        }
        self.reset_episode();
        let mut rec = Recorder::new(&self.cfg);
        self.play_episode(Some(&mut rec))?;
        rec.finish(&self.cfg, &self.slots)
    }

    fn play_episode(&mut self, mut rec: Option<&mut Recorder>) -> Result<()> {
        let p = self.cfg.policy;
        let m = self.cfg.model;
        let beta = self.cfg.discount.beta_disc;
        let n = self.slots.len();
        let mut s = self.cfg.s0;
        let mut weight = 1.0;

        let mut decisions = Vec::with_capacity(n);
        let mut r_values = vec![0.0; n];
        let mut thetas = vec![0.0; n];
        let mut payoffs = vec![0.0; n];
        let mut old_reps = vec![0.0; n];

        for t in 0..self.cfg.discount.horizon_t {
            decisions.clear();
            for slot in self.slots.iter_mut() {
                decisions.push(
                    slot.state
                        .decide(s, &p, &slot.model, &mut slot.decision_rng)?,
                );
            }

            let mut detected_count = 0;
            for (k, slot) in self.slots.iter_mut().enumerate() {
                let r = decisions[k].r;
                let rep = slot.state.rep;
                let theta = model::detection_prob(rep, &p)?;
                // Nothing to catch when nothing was injected.
                let detected = slot.detection_rng.random::<f64>() < theta && r > 0.0;
                detected_count += detected as usize;
                let pay = model::payoff(r, s, rep, &p, &slot.model, detected)?;

                r_values[k] = r;
                thetas[k] = theta;
                payoffs[k] = pay;
                old_reps[k] = rep;

                slot.state.disc_utility += weight * pay;
                slot.state.r_current = r;
                slot.state.rep = model::reputation_update(rep, detected, &p)?;
            }

            let r_bar = stats::mean(&r_values)?;
            let theta_bar = stats::mean(&thetas)?.clamp(0.0, 1.0);
            let collateral = model::collateral_damage(theta_bar, &p)?;
            let loss = model::social_loss(r_bar, s, collateral, &m)?;
            let eps = rng::gaussian(&mut self.noise_rng, m.sigma_eps);
            let s_next = model::transition(s, r_bar, eps, &m)?;

            for (k, slot) in self.slots.iter_mut().enumerate() {
                let next_obs = (s_next, slot.state.rep);
                slot.state.learn(
                    decisions[k],
                    (s, old_reps[k]),
                    payoffs[k],
                    next_obs,
                    beta,
                    &self.cfg.local_search,
                )?;
            }

            if let Some(rec) = rec.as_deref_mut() {
                rec.push(
                    RoundRecord {
                        t,
                        r_bar,
                        s,
                        loss,
                        mean_utility: stats::mean(&payoffs)?,
                        diversity: diversity(&r_values)?,
                        theta_bar,
                        collateral,
                        detected_count,
                    },
                    &r_values,
                    &old_reps,
                );
            }

            s = s_next;
            weight *= beta;
        }
        Ok(())
    }
}

struct Recorder {
    series: Vec<RoundRecord>,
    rep_snapshots: Vec<Snapshot>,
    r_snapshots: Vec<Snapshot>,
    snapshot_rounds: Vec<usize>,
    r_max: f64,
}

impl Recorder {
    fn new(cfg: &ScenarioConfig) -> Self {
        let mut snapshot_rounds = cfg.snapshot_rounds.clone();
        snapshot_rounds.sort_unstable();
        snapshot_rounds.dedup();
        Recorder {
            series: Vec::with_capacity(cfg.discount.horizon_t),
            rep_snapshots: Vec::new(),
            r_snapshots: Vec::new(),
            snapshot_rounds,
            r_max: cfg.policy.r_max,
        }
    }

    fn push(&mut self, record: RoundRecord, r_values: &[f64], reps: &[f64]) {
        if self.snapshot_rounds.contains(&record.t) {
            self.r_snapshots.push(Snapshot {
                round: record.t,
                histogram: Histogram::build(r_values, 0.0, self.r_max, HISTOGRAM_BINS),
            });
            self.rep_snapshots.push(Snapshot {
                round: record.t,
                histogram: Histogram::build(reps, 0.0, 1.0, HISTOGRAM_BINS),
            });
        }
        self.series.push(record);
    }

    fn finish(self, cfg: &ScenarioConfig, slots: &[AgentSlot]) -> Result<RunResult> {
        let columns: Vec<Vec<f64>> = vec![
            self.series.iter().map(|r| r.r_bar).collect(),
            self.series.iter().map(|r| r.s).collect(),
            self.series.iter().map(|r| r.loss).collect(),
            self.series.iter().map(|r| r.mean_utility).collect(),
        ];
        let correlation = if self.series.len() >= 2 {
            let named: Vec<(&str, &[f64])> = CORRELATION_LABELS
                .iter()
                .zip(&columns)
                .map(|(l, c)| (*l, c.as_slice()))
                .collect();
            correlation_matrix(&named)?
        } else {
            CorrelationMatrix {
                labels: CORRELATION_LABELS.iter().map(|l| l.to_string()).collect(),
                values: vec![vec![None; 4]; 4],
            }
        };
        let convergence_step = self
            .series
            .iter()
            .find(|r| r.diversity < cfg.convergence_threshold)
            .map(|r| r.t);
        let collateral: Vec<f64> = self.series.iter().map(|r| r.collateral).collect();
        let false_injury_rate = collateral.iter().sum::<f64>() / collateral.len() as f64;
        let agents = slots
            .iter()
            .map(|s| AgentSummary {
                id: s.state.id,
                kind: s.state.policy_kind(),
                final_r: s.state.r_current,
                final_rep: s.state.rep,
                disc_utility: s.state.disc_utility,
            })
            .collect();
        Ok(RunResult {
            series: self.series,
            rep_snapshots: self.rep_snapshots,
            r_snapshots: self.r_snapshots,
            correlation,
            convergence_step,
            false_injury_rate,
            agents,
        })
    }
}

/// Runs one scenario to completion.
pub fn run(cfg: &ScenarioConfig) -> Result<RunResult> {
    Engine::new(cfg)?.run()
}
