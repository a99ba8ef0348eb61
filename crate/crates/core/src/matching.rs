//! Slice-to-MNO allocation by MCMC swap search.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlearning::{learned_mno_rates, QLearningConfig};
use crate::radio::{expected_rates, ConstantPower, RateEstimate, UniformLevels};
use crate::scenario::NetworkTopology;
use crate::seed::{self, stream};

/// Allocation of RBs (slices) to MNOs. Each RB has at most one owner, so
/// the exclusivity constraint holds by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    owner: Vec<Option<usize>>,
    num_mnos: usize,
}

impl Matching {
    pub fn empty(num_rbs: usize, num_mnos: usize) -> Self {
        Self {
            owner: vec![None; num_rbs],
            num_mnos,
        }
    }

    pub fn from_owners(owner: Vec<Option<usize>>, num_mnos: usize) -> Result<Self> {
        if let Some(k) = owner.iter().flatten().find(|&&k| k >= num_mnos) {
            return Err(Error::Contract(format!("owner {k} is not an MNO index")));
        }
        Ok(Self { owner, num_mnos })
    }

    /// Builds a matching from a `num_rbs x num_mnos` indicator matrix.
    pub fn from_indicator(x: &[Vec<bool>]) -> Result<Self> {
        let num_mnos = x.first().map_or(0, Vec::len);
        let mut owner = Vec::with_capacity(x.len());
        for (l, row) in x.iter().enumerate() {
            let holders: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(k, _)| k)
                .collect();
            if holders.len() > 1 || row.len() != num_mnos {
                return Err(Error::Contract(format!(
                    "RB {l} is allocated to {holders:?}"
                )));
            }
            owner.push(holders.first().copied());
        }
        Ok(Self { owner, num_mnos })
    }

    pub fn num_rbs(&self) -> usize {
        self.owner.len()
    }

    pub fn num_mnos(&self) -> usize {
        self.num_mnos
    }

    pub fn owner(&self, rb: usize) -> Option<usize> {
        self.owner[rb]
    }

    pub fn owners(&self) -> &[Option<usize>] {
        &self.owner
    }

    pub fn set_owner(&mut self, rb: usize, owner: Option<usize>) {
        debug_assert!(owner.is_none_or(|k| k < self.num_mnos));
        self.owner[rb] = owner;
    }

    /// `x[l][k]`
    pub fn x(&self, rb: usize, mno: usize) -> bool {
        self.owner[rb] == Some(mno)
    }

    /// RBs held by `mno`, ascending.
    pub fn slices_of(&self, mno: usize) -> Vec<usize> {
        (0..self.owner.len())
            .filter(|&l| self.owner[l] == Some(mno))
            .collect()
    }

    pub fn count(&self, mno: usize) -> usize {
        self.owner.iter().filter(|o| **o == Some(mno)).count()
    }

    /// Bitmask of the RBs held by `mno`; requires at most 64 RBs.
    pub fn mask_of(&self, mno: usize) -> u64 {
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(mno))
            .fold(0, |m, (l, _)| m | (1u64 << l))
    }
}

/// Capacity check: every MNO holds at most its capacity.
pub fn validate_matching(m: &Matching, capacities: &[usize]) -> bool {
    capacities.len() == m.num_mnos() && (0..m.num_mnos()).all(|k| m.count(k) <= capacities[k])
}

/// Checks both constraints on a raw indicator matrix `x[l][k]`.
pub fn validate_indicator(x: &[Vec<bool>], capacities: &[usize]) -> bool {
    let per_rb_ok = x
        .iter()
        .all(|row| row.iter().filter(|b| **b).count() <= 1 && row.len() == capacities.len());
    per_rb_ok
        && (0..capacities.len()).all(|k| x.iter().filter(|row| row[k]).count() <= capacities[k])
}

/// Logistic acceptance probability `1 / (1 + exp(-t_b (s_new - s_old)))`.
pub fn swap_probability(s_new: f64, s_old: f64, t_b: f64) -> f64 {
    let z = t_b * (s_new - s_old);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapProposal {
    pub matching: Matching,
    pub rbs: (usize, usize),
    /// Owners of `rbs.0` and `rbs.1` before the exchange.
    pub owners: (Option<usize>, Option<usize>),
}

/// Picks two distinct RBs uniformly and exchanges their owners. An
/// unassigned RB takes part like any other owner. Needs at least two RBs.
pub fn propose_swap<R: Rng + ?Sized>(m: &Matching, rng: &mut R) -> Option<SwapProposal> {
    let n = m.num_rbs();
    if n < 2 {
        return None;
    }
    let l = rng.random_range(0..n);
    let mut l2 = rng.random_range(0..n - 1);
    if l2 >= l {
        l2 += 1;
    }
    let (a, b) = (m.owner(l), m.owner(l2));
    let mut next = m.clone();
    next.set_owner(l, b);
    next.set_owner(l2, a);
    Some(SwapProposal {
        matching: next,
        rbs: (l, l2),
        owners: (a, b),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relocation {
    pub matching: Matching,
    pub rb: usize,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

/// Moves one uniformly chosen RB to a different owner (or releases it).
/// This is the only move that changes slice counts.
pub fn propose_relocation<R: Rng + ?Sized>(m: &Matching, rng: &mut R) -> Option<Relocation> {
    if m.num_rbs() == 0 {
        return None;
    }
    let rb = rng.random_range(0..m.num_rbs());
    let from = m.owner(rb);
    // K + 1 owners including "unassigned", minus the current one.
    let mut pick = rng.random_range(0..m.num_mnos());
    let encode = |o: Option<usize>| o.map_or(m.num_mnos(), |k| k);
    if pick >= encode(from) {
        pick += 1;
    }
    let to = (pick < m.num_mnos()).then_some(pick);
    let mut next = m.clone();
    next.set_owner(rb, to);
    Some(Relocation {
        matching: next,
        rb,
        from,
        to,
    })
}

/// Initial matching: RBs are shuffled and dealt so that MNO `k` receives
/// `min(c_k, L / K)` of them (at least one while RBs remain).
pub fn initial_matching<R: Rng + ?Sized>(
    num_rbs: usize,
    capacities: &[usize],
    rng: &mut R,
) -> Matching {
    let k_count = capacities.len();
    let fair = (num_rbs / k_count.max(1)).max(1);
    let mut rbs: Vec<usize> = (0..num_rbs).collect();
    rbs.shuffle(rng);
    let mut m = Matching::empty(num_rbs, k_count);
    let mut next = rbs.into_iter();
    for (k, &c) in capacities.iter().enumerate() {
        for _ in 0..c.min(fair) {
            match next.next() {
                Some(l) => m.set_owner(l, Some(k)),
                None => return m,
            }
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Powers learned per SBS with Q-learning.
    Qlearning,
    /// Every SBS draws a power level uniformly at random on every slot.
    Uniform,
    /// Every SBS always transmits at the highest power level.
    MaxPower,
}

impl std::fmt::Display for PowerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PowerMode::Qlearning => "qlearning",
            PowerMode::Uniform => "uniform",
            PowerMode::MaxPower => "max_power",
        })
    }
}

impl std::str::FromStr for PowerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qlearning" => Ok(PowerMode::Qlearning),
            "uniform" => Ok(PowerMode::Uniform),
            "max_power" => Ok(PowerMode::MaxPower),
            other => Err(Error::Config(format!("unknown power mode {other:?}"))),
        }
    }
}

/// How MNO rates are combined into social welfare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WelfareReading {
    /// Sum of the rates of MNOs holding at least one slice.
    DistinctMnos,
    /// `sum_l sum_k x_lk R_k`: each MNO rate counted once per slice held.
    PerSlice,
}

/// Deterministic sum rate of an MNO for a given slice set.
pub trait MnoRateModel: Sync {
    /// `slices` are ascending RB ids held by MNO `k`.
    fn mno_rate(&self, k: usize, slices: &[usize]) -> f64;
}

impl<M: MnoRateModel + ?Sized> MnoRateModel for &M {
    fn mno_rate(&self, k: usize, slices: &[usize]) -> f64 {
        (**self).mno_rate(k, slices)
    }
}

/// Monte Carlo rates under either power mode. The random stream used for a
/// given `(k, slices)` is derived from `seed`, so re-evaluating a slice set
/// always yields the same value.
#[derive(Debug, Clone)]
pub struct SampledRates<'a> {
    pub topo: &'a NetworkTopology,
    pub power_mode: PowerMode,
    pub qlearning: QLearningConfig,
    pub seed: u64,
}

impl MnoRateModel for SampledRates<'_> {
    fn mno_rate(&self, k: usize, slices: &[usize]) -> f64 {
        if slices.is_empty() {
            return 0.0;
        }
        let mask = slices.iter().fold(0u64, |m, &l| m | (1u64 << l));
        let mut rng = seed::rng_from(self.seed, &[stream::MNO_RATE, k as u64, mask]);
        let members = self.topo.sbs_of(k);
        let draws = self.qlearning.eval_draws;
        let sum = |e: Vec<RateEstimate>| e.iter().map(|e| e.mean).sum();
        match self.power_mode {
            PowerMode::Uniform => {
                let policy = UniformLevels(self.topo.power_levels().to_vec());
                sum(expected_rates(
                    self.topo, members, slices, &policy, draws, &mut rng,
                ))
            }
            PowerMode::MaxPower => {
                let policy = ConstantPower(self.topo.max_power_level());
                sum(expected_rates(
                    self.topo, members, slices, &policy, draws, &mut rng,
                ))
            }
            PowerMode::Qlearning => {
                learned_mno_rates(self.topo, k, slices, &self.qlearning, &mut rng)
                    .iter()
                    .sum()
            }
        }
    }
}

fn combine(rates: &[f64], counts: &[usize], reading: WelfareReading) -> f64 {
    rates
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&r, &c)| match reading {
            WelfareReading::DistinctMnos => r,
            WelfareReading::PerSlice => r * c as f64,
        })
        .sum()
}

pub fn social_welfare(m: &Matching, model: &dyn MnoRateModel, reading: WelfareReading) -> f64 {
    let rates: Vec<f64> = (0..m.num_mnos())
        .map(|k| model.mno_rate(k, &m.slices_of(k)))
        .collect();
    let counts: Vec<usize> = (0..m.num_mnos()).map(|k| m.count(k)).collect();
    combine(&rates, &counts, reading)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: usize,
    /// Inverse temperature `T_b` of the logistic acceptance rule.
    pub temperature: f64,
    /// Probability that a step proposes a single-RB relocation instead of
    /// a pairwise swap.
    pub relocation_prob: f64,
    /// Probability that a step chains two elementary moves and evaluates
    /// only the end point, which lets the chain cross single-move barriers.
    pub compound_prob: f64,
    /// Use the two-branch acceptance rule (see [`mcmc_swap`]).
    pub literal_mode: bool,
    pub welfare_reading: WelfareReading,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 2500,
            temperature: 100.0,
            relocation_prob: 0.5,
            compound_prob: 0.2,
            literal_mode: false,
            welfare_reading: WelfareReading::DistinctMnos,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::Config(
                "temperature must be finite and non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.relocation_prob) {
            return Err(Error::Config("relocation_prob must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.compound_prob) {
            return Err(Error::Config("compound_prob must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub welfare: f64,
    pub best_welfare: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WelfareTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcOutcome {
    pub best: Matching,
    pub best_welfare: f64,
    pub initial_welfare: f64,
    pub last: Matching,
    pub trace: WelfareTrace,
    /// Distinct `(MNO, slice set)` rate evaluations performed.
    pub evaluations: usize,
}

struct RateCache<'m> {
    model: &'m dyn MnoRateModel,
    cache: HashMap<(usize, u64), f64>,
}

impl RateCache<'_> {
    fn rate(&mut self, m: &Matching, k: usize) -> f64 {
        let model = self.model;
        *self
            .cache
            .entry((k, m.mask_of(k)))
            .or_insert_with(|| model.mno_rate(k, &m.slices_of(k)))
    }
}

/// One pairwise exchange or (with probability `relocation_prob`) one
/// relocation, with the owners it touched. Exchanges between RBs of the same
/// owner are no-ops and yield `None`.
fn elementary_move<R: Rng + ?Sized>(
    m: &Matching,
    relocation_prob: f64,
    rng: &mut R,
) -> Option<(Matching, Vec<Option<usize>>)> {
    if rng.random::<f64>() < relocation_prob {
        propose_relocation(m, rng).map(|r| (r.matching, vec![r.from, r.to]))
    } else {
        propose_swap(m, rng)
            .filter(|s| s.owners.0 != s.owners.1)
            .map(|s| (s.matching, vec![s.owners.0, s.owners.1]))
    }
}

/// MCMC swap search over slice allocations.
///
/// Each step proposes either a pairwise owner exchange or (with probability
/// `relocation_prob`) a single-RB relocation; with probability
/// `compound_prob` two such moves are chained. Candidates that exceed a
/// capacity are rejected outright. Only the affected MNOs' rates are
/// re-evaluated, and a candidate with welfare `S'` replaces the current
/// matching with probability [`swap_probability`]`(S', S, T_b)`. The best
/// matching seen is tracked and returned.
///
/// In literal mode a candidate that lost the draw is still taken when the
/// current welfare exceeds the previous step's candidate welfare.
pub fn mcmc_swap<R: Rng + ?Sized>(
    model: &dyn MnoRateModel,
    num_rbs: usize,
    capacities: &[usize],
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<McmcOutcome> {
    let start = initial_matching(num_rbs, capacities, rng);
    mcmc_swap_from(model, start, capacities, cfg, rng)
}

pub fn mcmc_swap_from<R: Rng + ?Sized>(
    model: &dyn MnoRateModel,
    start: Matching,
    capacities: &[usize],
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<McmcOutcome> {
    cfg.validate()?;
    if start.num_rbs() > 64 {
        return Err(Error::Config("at most 64 RBs are supported".into()));
    }
    if !validate_matching(&start, capacities) {
        return Err(Error::Contract(
            "initial matching violates capacities".into(),
        ));
    }
    let k_count = capacities.len();
    let mut cache = RateCache {
        model,
        cache: HashMap::new(),
    };
    let mut current = start;
    let mut rates: Vec<f64> = (0..k_count).map(|k| cache.rate(&current, k)).collect();
    let mut counts: Vec<usize> = (0..k_count).map(|k| current.count(k)).collect();
    let mut welfare = combine(&rates, &counts, cfg.welfare_reading);
    let initial_welfare = welfare;
    let mut best = current.clone();
    let mut best_welfare = welfare;
    let mut prev_candidate = f64::NEG_INFINITY;
    let mut trace = WelfareTrace {
        rows: Vec::with_capacity(cfg.iterations),
    };

    for iteration in 1..=cfg.iterations {
        let steps = if rng.random::<f64>() < cfg.compound_prob {
            2
        } else {
            1
        };
        let mut candidate: Option<(Matching, Vec<Option<usize>>)> = None;
        for _ in 0..steps {
            let base = candidate.as_ref().map_or(&current, |(m, _)| m);
            let step = elementary_move(base, cfg.relocation_prob, rng);
            candidate = match (candidate, step) {
                (None, s) => s,
                (Some(c), None) => Some(c),
                (Some((_, mut owners)), Some((m, more))) => {
                    owners.extend(more);
                    Some((m, owners))
                }
            };
        }
        let candidate = candidate
            .filter(|(m, owners)| {
                owners
                    .iter()
                    .flatten()
                    .all(|&k| m.count(k) <= capacities[k])
            })
            .filter(|(m, _)| m != &current);

        let mut accepted = false;
        if let Some((next, affected)) = candidate {
            debug_assert!(validate_matching(&next, capacities));
            let mut next_rates = rates.clone();
            let mut next_counts = counts.clone();
            for k in affected.into_iter().flatten() {
                next_rates[k] = cache.rate(&next, k);
                next_counts[k] = next.count(k);
            }
            let next_welfare = combine(&next_rates, &next_counts, cfg.welfare_reading);
            let p = swap_probability(next_welfare, welfare, cfg.temperature);
            accepted = rng.random::<f64>() < p || (cfg.literal_mode && welfare > prev_candidate);
            prev_candidate = next_welfare;
            if accepted {
                current = next;
                rates = next_rates;
                counts = next_counts;
                welfare = next_welfare;
            }
        }
        if welfare > best_welfare {
            best_welfare = welfare;
            best = current.clone();
        }
        trace.rows.push(TraceRow {
            iteration,
            welfare,
            best_welfare,
            accepted,
        });
    }

    Ok(McmcOutcome {
        best,
        best_welfare,
        initial_welfare,
        last: current,
        trace,
        evaluations: cache.cache.len(),
    })
}
