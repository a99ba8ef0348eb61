//! Tabular Q-learning for per-SBS power control.
//!
//! Each SBS is an independent agent with a 2 x N table: the state says
//! whether its QoS (SINR threshold) was met on the last slot, the action is a
//! power-level index. All agents of an MNO act simultaneously each episode;
//! the joint RB and power choices determine every agent's reward.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::Matching;
use crate::radio::{self, group_sinrs, rate_from_sinr, PowerAssignment, PowerPolicy, RateReport};
use crate::scenario::NetworkTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    EpsilonGreedy,
    Boltzmann,
}

/// What the bootstrap term of the update maximizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapTarget {
    /// `max_{a' != a} Q(s, a')`
    OtherActions,
    /// The textbook `max_{a'} Q(s, a')`.
    AllActions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearningConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_explore: f64,
    pub boltzmann_temp: f64,
    pub episodes: usize,
    pub policy_kind: PolicyKind,
    pub bootstrap: BootstrapTarget,
    /// Use `gamma` as the exploration probability as well as the discount.
    pub literal_exploration: bool,
    /// Monte Carlo draws used to evaluate the learned greedy policy.
    pub eval_draws: usize,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            learning_rate: 0.5,
            epsilon_explore: 0.1,
            boltzmann_temp: 0.5,
            episodes: 2000,
            policy_kind: PolicyKind::EpsilonGreedy,
            bootstrap: BootstrapTarget::OtherActions,
            literal_exploration: false,
            eval_draws: 200,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} not in [0, 1]", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.learning_rate) {
            return Err(Error::Config(format!(
                "learning_rate {} not in [0, 1)",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon_explore) {
            return Err(Error::Config(format!(
                "epsilon_explore {} not in [0, 1]",
                self.epsilon_explore
            )));
        }
        if !(self.boltzmann_temp > 0.0) || !self.boltzmann_temp.is_finite() {
            return Err(Error::Config("boltzmann_temp must be positive".into()));
        }
        Ok(())
    }

    fn exploration_probability(&self) -> f64 {
        if self.literal_exploration {
            self.gamma
        } else {
            self.epsilon_explore
        }
    }
}

/// Binary QoS state of an SBS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QosState {
    Violated = 0,
    Satisfied = 1,
}

impl QosState {
    /// Satisfied iff `sinr >= threshold` (inclusive).
    pub fn from_sinr(sinr: f64, threshold: f64) -> Self {
        if sinr >= threshold {
            QosState::Satisfied
        } else {
            QosState::Violated
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Power levels `{0, d, 2d, ..., (N-1)d}` with `d = p_tot / N`.
pub fn action_space(p_tot: f64, levels: usize) -> Result<Vec<f64>> {
    if levels < 2 {
        return Err(Error::Config(format!(
            "need at least 2 power levels, got {levels}"
        )));
    }
    if !(p_tot > 0.0) || !p_tot.is_finite() {
        return Err(Error::Config(format!(
            "total power must be positive, got {p_tot}"
        )));
    }
    let delta = p_tot / levels as f64;
    Ok((0..levels).map(|n| n as f64 * delta).collect())
}

/// Utility: the rate if the QoS constraint holds, zero otherwise.
pub fn reward(sinr: f64, threshold: f64) -> f64 {
    match QosState::from_sinr(sinr, threshold) {
        QosState::Satisfied => rate_from_sinr(sinr),
        QosState::Violated => 0.0,
    }
}

pub fn observe_state(
    topo: &NetworkTopology,
    pa: &PowerAssignment,
    f: usize,
    l: usize,
) -> Result<QosState> {
    radio::sinr(topo, pa, f, l).map(|s| QosState::from_sinr(s, topo.sinr_threshold()))
}

pub fn reward_at(topo: &NetworkTopology, pa: &PowerAssignment, f: usize, l: usize) -> Result<f64> {
    radio::sinr(topo, pa, f, l).map(|s| reward(s, topo.sinr_threshold()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn new(actions: usize) -> Self {
        Self {
            actions,
            q: vec![0.0; 2 * actions],
        }
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn get(&self, s: QosState, a: usize) -> f64 {
        self.q[s.index() * self.actions + a]
    }

    pub fn set(&mut self, s: QosState, a: usize, v: f64) {
        self.q[s.index() * self.actions + a] = v;
    }

    pub fn row(&self, s: QosState) -> &[f64] {
        let start = s.index() * self.actions;
        &self.q[start..start + self.actions]
    }

    /// Highest-valued action; ties go to the lowest index.
    pub fn greedy(&self, s: QosState) -> usize {
        argmax(self.row(s))
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// One Q-learning step on cell `(s, a)` with reward `w`.
pub fn q_update(q: &mut QTable, s: QosState, a: usize, w: f64, cfg: &QLearningConfig) {
    let row = q.row(s);
    let bootstrap = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| cfg.bootstrap == BootstrapTarget::AllActions || i != a)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let bootstrap = if bootstrap.is_finite() {
        bootstrap
    } else {
        0.0
    };
    let beta = cfg.learning_rate;
    let updated = (1.0 - beta) * row[a] + beta * (w + cfg.gamma * bootstrap);
    q.set(s, a, updated);
}

pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    s: QosState,
    cfg: &QLearningConfig,
    rng: &mut R,
) -> usize {
    match cfg.policy_kind {
        PolicyKind::EpsilonGreedy => {
            if rng.random::<f64>() < cfg.exploration_probability() {
                rng.random_range(0..q.actions())
            } else {
                q.greedy(s)
            }
        }
        PolicyKind::Boltzmann => {
            let row = q.row(s);
            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = row
                .iter()
                .map(|v| ((v - top) / cfg.boltzmann_temp).exp())
                .collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (a, w) in weights.iter().enumerate() {
                if u < *w {
                    return a;
                }
                u -= w;
            }
            weights.len() - 1
        }
    }
}

/// Greedy power policy extracted from learned tables, indexed by global SBS id.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPolicy {
    levels: Vec<f64>,
    greedy: Vec<[usize; 2]>,
    start: Vec<QosState>,
}

impl GreedyPolicy {
    pub fn new(num_sbs: usize, levels: Vec<f64>) -> Self {
        Self {
            levels,
            greedy: vec![[0, 0]; num_sbs],
            start: vec![QosState::Violated; num_sbs],
        }
    }

    pub fn learn_from(&mut self, f: usize, table: &QTable, last_state: QosState) {
        self.greedy[f] = [
            table.greedy(QosState::Violated),
            table.greedy(QosState::Satisfied),
        ];
        self.start[f] = last_state;
    }

    /// Greedy action index of SBS `f` in state `s`.
    pub fn action(&self, f: usize, s: QosState) -> usize {
        self.greedy[f][s.index()]
    }
}

impl PowerPolicy for GreedyPolicy {
    fn power(&self, sbs: usize, state: QosState, _rng: &mut dyn RngCore) -> f64 {
        self.levels[self.action(sbs, state)]
    }

    fn initial_state(&self, sbs: usize) -> QosState {
        self.start[sbs]
    }
}

/// Learned tables for a group of co-MNO SBSs.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLearning {
    pub members: Vec<usize>,
    pub tables: Vec<QTable>,
    pub last_states: Vec<QosState>,
    /// Largest reward observed during training (0 when nothing was learned).
    pub max_reward: f64,
}

/// Trains the agents of one MNO on its slice set.
///
/// Every episode each agent draws an RB uniformly from `slices`, picks a power
/// level from the state observed on the previous episode, and all agents are
/// rewarded from the joint outcome. `observer` is called after every episode
/// with the current tables.
pub fn train_group_with<R: Rng + ?Sized>(
    topo: &NetworkTopology,
    members: &[usize],
    slices: &[usize],
    cfg: &QLearningConfig,
    rng: &mut R,
    mut observer: impl FnMut(&[QTable]),
) -> GroupLearning {
    let n = members.len();
    let levels = topo.power_levels();
    let mut tables = vec![QTable::new(levels.len()); n];
    let mut states = vec![QosState::Violated; n];
    let mut max_reward: f64 = 0.0;
    if !slices.is_empty() {
        let th = topo.sinr_threshold();
        let mut rbs = vec![0usize; n];
        let mut actions = vec![0usize; n];
        let mut powers = vec![0.0; n];
        let mut sinrs = vec![0.0; n];
        for _ in 0..cfg.episodes {
            for i in 0..n {
                rbs[i] = slices[rng.random_range(0..slices.len())];
                actions[i] = select_action(&tables[i], states[i], cfg, rng);
                powers[i] = levels[actions[i]];
            }
            group_sinrs(topo, members, &rbs, &powers, &mut sinrs);
            for i in 0..n {
                let w = reward(sinrs[i], th);
                max_reward = max_reward.max(w);
                q_update(&mut tables[i], states[i], actions[i], w, cfg);
                states[i] = QosState::from_sinr(sinrs[i], th);
            }
            observer(&tables);
        }
    }
    GroupLearning {
        members: members.to_vec(),
        tables,
        last_states: states,
        max_reward,
    }
}

pub fn train_group<R: Rng + ?Sized>(
    topo: &NetworkTopology,
    members: &[usize],
    slices: &[usize],
    cfg: &QLearningConfig,
    rng: &mut R,
) -> GroupLearning {
    train_group_with(topo, members, slices, cfg, rng, |_| {})
}

/// Trains MNO `k` on `slices` and returns the greedy policy's expected
/// per-SBS rates, in the order of `topo.sbs_of(k)`.
pub fn learned_mno_rates<R: Rng>(
    topo: &NetworkTopology,
    k: usize,
    slices: &[usize],
    cfg: &QLearningConfig,
    rng: &mut R,
) -> Vec<f64> {
    let members = topo.sbs_of(k);
    let learning = train_group(topo, members, slices, cfg, rng);
    let mut policy = GreedyPolicy::new(topo.num_sbs(), topo.power_levels().to_vec());
    for ((&f, table), &s) in members
        .iter()
        .zip(&learning.tables)
        .zip(&learning.last_states)
    {
        policy.learn_from(f, table, s);
    }
    radio::expected_rates(topo, members, slices, &policy, cfg.eval_draws, rng)
        .into_iter()
        .map(|e| e.mean)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearningOutcome {
    pub policy: GreedyPolicy,
    /// Tables indexed by global SBS id.
    pub tables: Vec<QTable>,
    pub report: RateReport,
}

/// Runs Q-learning for every MNO under a fixed matching and reports the
/// expected rates of the resulting greedy policies.
pub fn run_qlearning<R: Rng>(
    topo: &NetworkTopology,
    matching: &Matching,
    cfg: &QLearningConfig,
    rng: &mut R,
) -> QLearningOutcome {
    let levels = topo.power_levels().to_vec();
    let mut policy = GreedyPolicy::new(topo.num_sbs(), levels.clone());
    let mut tables = vec![QTable::new(levels.len()); topo.num_sbs()];
    for k in 0..topo.num_mnos() {
        let learning = train_group(topo, topo.sbs_of(k), &matching.slices_of(k), cfg, rng);
        for ((&f, table), &s) in learning
            .members
            .iter()
            .zip(learning.tables)
            .zip(&learning.last_states)
        {
            policy.learn_from(f, &table, s);
            tables[f] = table;
        }
    }
    let report = radio::rate_report(topo, matching, &policy, cfg.eval_draws, rng);
    QLearningOutcome {
        policy,
        tables,
        report,
    }
}
