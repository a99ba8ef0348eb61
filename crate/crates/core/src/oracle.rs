//! Ground-truth baselines: exact rate expectations, exhaustive matching
//! enumeration and swap-stability certification.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matching::{social_welfare, validate_matching, Matching, MnoRateModel, WelfareReading};
use crate::radio::{self, group_sinrs, rate_from_sinr, ConstantPower, RateReport, UniformLevels};
use crate::scenario::NetworkTopology;

pub const MAX_JOINT_CHOICES: u64 = 1_000_000;
pub const MAX_ENUM_RBS: usize = 8;
pub const MAX_ENUM_MNOS: usize = 3;

fn joint_choices(options: impl IntoIterator<Item = usize>) -> Option<u64> {
    options
        .into_iter()
        .try_fold(1u64, |acc, n| acc.checked_mul(n as u64))
        .filter(|&t| t <= MAX_JOINT_CHOICES)
}

/// Exact expected rate of each SBS in `members` (one MNO). Every SBS picks
/// an RB uniformly from `slices` and a power uniformly from its entry of
/// `power_options`; all joint outcomes are enumerated with equal weight.
pub fn exact_expected_rates(
    topo: &NetworkTopology,
    members: &[usize],
    slices: &[usize],
    power_options: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let n = members.len();
    assert_eq!(power_options.len(), n);
    if slices.is_empty() {
        return Ok(vec![0.0; n]);
    }
    if power_options.iter().any(|o| o.is_empty()) {
        return Err(Error::Contract(
            "every SBS needs at least one power option".into(),
        ));
    }
    let radix: Vec<usize> = power_options
        .iter()
        .map(|o| slices.len() * o.len())
        .collect();
    let total = joint_choices(radix.iter().copied())
        .ok_or_else(|| Error::TooLarge(format!("more than {MAX_JOINT_CHOICES} joint choices")))?;
    let mut digits = vec![0usize; n];
    let mut rbs = vec![0usize; n];
    let mut powers = vec![0.0; n];
    let mut sinrs = vec![0.0; n];
    let mut sum = vec![0.0; n];
    for _ in 0..total {
        for i in 0..n {
            rbs[i] = slices[digits[i] % slices.len()];
            powers[i] = power_options[i][digits[i] / slices.len()];
        }
        group_sinrs(topo, members, &rbs, &powers, &mut sinrs);
        for i in 0..n {
            sum[i] += rate_from_sinr(sinrs[i]);
        }
        for (d, &r) in digits.iter_mut().zip(&radix) {
            *d += 1;
            if *d < r {
                break;
            }
            *d = 0;
        }
    }
    Ok(sum.into_iter().map(|s| s / total as f64).collect())
}

/// Exact expected rate of SBS `f` under fixed powers indexed by global SBS id.
pub fn exact_expected_rate(
    topo: &NetworkTopology,
    matching: &Matching,
    powers: &[f64],
    f: usize,
) -> Result<f64> {
    let k = topo.mno_of(f);
    let members = topo.sbs_of(k);
    let p: Vec<Vec<f64>> = members.iter().map(|&g| vec![powers[g]]).collect();
    let rates = exact_expected_rates(topo, members, &matching.slices_of(k), &p)?;
    Ok(rates[members.iter().position(|&g| g == f).expect("member")])
}

/// Rate model using exact expectations. Each SBS draws its power uniformly
/// from its own option list (a single entry means a fixed power).
#[derive(Debug, Clone)]
pub struct ExactRates<'a> {
    topo: &'a NetworkTopology,
    options: Vec<Vec<f64>>,
}

impl<'a> ExactRates<'a> {
    /// Fails when some MNO could need more than [`MAX_JOINT_CHOICES`]
    /// joint choices (i.e. if it held every RB).
    pub fn with_options(topo: &'a NetworkTopology, options: Vec<Vec<f64>>) -> Result<Self> {
        if options.len() != topo.num_sbs() || options.iter().any(|o| o.is_empty()) {
            return Err(Error::Contract(
                "one non-empty power option list per SBS required".into(),
            ));
        }
        for k in 0..topo.num_mnos() {
            let radix = topo
                .sbs_of(k)
                .iter()
                .map(|&f| topo.num_rbs() * options[f].len());
            if joint_choices(radix).is_none() {
                return Err(Error::TooLarge(format!(
                    "MNO {k} exceeds {MAX_JOINT_CHOICES} joint choices"
                )));
            }
        }
        Ok(Self { topo, options })
    }

    /// Fixed per-SBS powers.
    pub fn new(topo: &'a NetworkTopology, powers: Vec<f64>) -> Result<Self> {
        Self::with_options(topo, powers.into_iter().map(|p| vec![p]).collect())
    }

    /// Every SBS draws a power level uniformly at random.
    pub fn uniform(topo: &'a NetworkTopology) -> Result<Self> {
        Self::with_options(topo, vec![topo.power_levels().to_vec(); topo.num_sbs()])
    }

    /// Every SBS at the highest power level.
    pub fn max_power(topo: &'a NetworkTopology) -> Result<Self> {
        Self::new(topo, vec![topo.max_power_level(); topo.num_sbs()])
    }
}

impl MnoRateModel for ExactRates<'_> {
    fn mno_rate(&self, k: usize, slices: &[usize]) -> f64 {
        let members = self.topo.sbs_of(k);
        let p: Vec<Vec<f64>> = members.iter().map(|&f| self.options[f].clone()).collect();
        exact_expected_rates(self.topo, members, slices, &p)
            .expect("bounded at construction")
            .iter()
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub optimal_welfare: f64,
    pub optimal_matching: Matching,
    /// Ownership vectors visited, `(K + 1)^L`.
    pub num_states: u64,
    /// Vectors satisfying the capacity constraint.
    pub num_valid: u64,
}

/// Enumerates every ownership vector and returns the welfare maximizer
/// (the lexicographically first one on ties).
pub fn exhaustive_matching(
    model: &dyn MnoRateModel,
    num_rbs: usize,
    capacities: &[usize],
    reading: WelfareReading,
) -> Result<OracleResult> {
    let k_count = capacities.len();
    if num_rbs > MAX_ENUM_RBS || k_count > MAX_ENUM_MNOS {
        return Err(Error::TooLarge(format!(
            "L = {num_rbs}, K = {k_count} exceeds L <= {MAX_ENUM_RBS}, K <= {MAX_ENUM_MNOS}"
        )));
    }
    // rate of each MNO for each subset it could hold
    let subsets = 1usize << num_rbs;
    let mut table = vec![vec![f64::NAN; subsets]; k_count];
    for (k, row) in table.iter_mut().enumerate() {
        for (mask, slot) in row.iter_mut().enumerate() {
            if (mask.count_ones() as usize) <= capacities[k] {
                let slices: Vec<usize> = (0..num_rbs).filter(|l| mask & (1 << l) != 0).collect();
                *slot = model.mno_rate(k, &slices);
            }
        }
    }

    let base = k_count + 1;
    let num_states = (base as u64).pow(num_rbs as u32);
    let mut digits = vec![0usize; num_rbs];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut num_valid = 0;
    for _ in 0..num_states {
        let mut masks = vec![0usize; k_count];
        for (l, &d) in digits.iter().enumerate() {
            if d < k_count {
                masks[d] |= 1 << l;
            }
        }
        let valid = masks
            .iter()
            .zip(capacities)
            .all(|(m, &c)| (m.count_ones() as usize) <= c);
        if valid {
            num_valid += 1;
            let welfare: f64 = masks
                .iter()
                .enumerate()
                .filter(|(_, m)| **m != 0)
                .map(|(k, &m)| match reading {
                    WelfareReading::DistinctMnos => table[k][m],
                    WelfareReading::PerSlice => table[k][m] * m.count_ones() as f64,
                })
                .sum();
            if best.as_ref().is_none_or(|(w, _)| welfare > *w) {
                best = Some((welfare, digits.clone()));
            }
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < base {
                break;
            }
            *d = 0;
        }
    }

    let (optimal_welfare, digits) = best.expect("the empty matching is always valid");
    let owners = digits
        .into_iter()
        .map(|d| (d < k_count).then_some(d))
        .collect();
    Ok(OracleResult {
        optimal_welfare,
        optimal_matching: Matching::from_owners(owners, k_count)?,
        num_states,
        num_valid,
    })
}

/// Rates when every SBS draws a power level uniformly at random each slot.
pub fn uniform_power_baseline<R: Rng>(
    topo: &NetworkTopology,
    matching: &Matching,
    draws: usize,
    rng: &mut R,
) -> RateReport {
    let policy = UniformLevels(topo.power_levels().to_vec());
    radio::rate_report(topo, matching, &policy, draws, rng)
}

/// Rates when every SBS always transmits at the highest power level.
pub fn max_power_baseline<R: Rng>(
    topo: &NetworkTopology,
    matching: &Matching,
    draws: usize,
    rng: &mut R,
) -> RateReport {
    radio::rate_report(
        topo,
        matching,
        &ConstantPower(topo.max_power_level()),
        draws,
        rng,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwapStability {
    Stable,
    /// Exchanging the owners of `rbs` raises welfare to `improved_welfare`.
    Unstable {
        rbs: (usize, usize),
        improved_welfare: f64,
    },
}

impl SwapStability {
    pub fn is_stable(&self) -> bool {
        matches!(self, SwapStability::Stable)
    }
}

/// Relative margin below which a welfare gain counts as a tie.
const STABILITY_TOL: f64 = 1e-12;

/// A matching is swap-stable when no exchange of the owners of two RBs
/// (an unassigned RB included) strictly increases welfare. Exchanges keep
/// every MNO's slice count, so capacities stay satisfied.
pub fn check_swap_stability(
    m: &Matching,
    model: &dyn MnoRateModel,
    capacities: &[usize],
    reading: WelfareReading,
) -> Result<SwapStability> {
    if !validate_matching(m, capacities) {
        return Err(Error::Contract("matching violates capacities".into()));
    }
    let current = social_welfare(m, model, reading);
    for l in 0..m.num_rbs() {
        for l2 in l + 1..m.num_rbs() {
            if m.owner(l) == m.owner(l2) {
                continue;
            }
            let mut next = m.clone();
            next.set_owner(l, m.owner(l2));
            next.set_owner(l2, m.owner(l));
            let w = social_welfare(&next, model, reading);
            if w > current + STABILITY_TOL * current.abs().max(1.0) {
                return Ok(SwapStability::Unstable {
                    rbs: (l, l2),
                    improved_welfare: w,
                });
            }
        }
    }
    Ok(SwapStability::Stable)
}
