//! SINR and rate evaluation.
//!
//! Slices are exclusive per MNO, so an SBS only sees interference from SBSs
//! of its own MNO that picked the same RB.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::Matching;
use crate::qlearning::QosState;
use crate::scenario::NetworkTopology;

/// Instantaneous transmit power and RB per SBS, indexed by global SBS id.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAssignment {
    pub power: Vec<f64>,
    pub rb_choice: Vec<usize>,
}

impl PowerAssignment {
    pub fn new(power: Vec<f64>, rb_choice: Vec<usize>) -> Self {
        assert_eq!(power.len(), rb_choice.len());
        Self { power, rb_choice }
    }

    /// Checks that every SBS of an MNO holding slices transmits on one of them.
    pub fn validate(&self, topo: &NetworkTopology, matching: &Matching) -> Result<()> {
        if self.power.len() != topo.num_sbs() {
            return Err(Error::Contract("power assignment has wrong length".into()));
        }
        for f in 0..topo.num_sbs() {
            let k = topo.mno_of(f);
            if matching.count(k) > 0 && matching.owner(self.rb_choice[f]) != Some(k) {
                return Err(Error::Contract(format!(
                    "SBS {f} uses RB {} outside the slice set of MNO {k}",
                    self.rb_choice[f]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// bits/s/Hz
    pub rate_per_sbs: Vec<f64>,
    /// bits/s/Hz, sum over the MNO's SBSs
    pub rate_per_mno: Vec<f64>,
}

impl RateReport {
    pub fn from_sbs_rates(topo: &NetworkTopology, rate_per_sbs: Vec<f64>) -> Self {
        let rate_per_mno = (0..topo.num_mnos())
            .map(|k| topo.sbs_of(k).iter().map(|&f| rate_per_sbs[f]).sum())
            .collect();
        Self {
            rate_per_sbs,
            rate_per_mno,
        }
    }

    pub fn total(&self) -> f64 {
        self.rate_per_mno.iter().sum()
    }
}

/// A (possibly state-dependent) power rule used when evaluating rates.
pub trait PowerPolicy: Sync {
    /// Transmit power in mW for `sbs` when its last observed state is
    /// `state`. Randomized policies draw from `rng`.
    fn power(&self, sbs: usize, state: QosState, rng: &mut dyn RngCore) -> f64;

    fn initial_state(&self, _sbs: usize) -> QosState {
        QosState::Satisfied
    }
}

/// Every SBS transmits at the same fixed power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPower(pub f64);

impl PowerPolicy for ConstantPower {
    fn power(&self, _sbs: usize, _state: QosState, _rng: &mut dyn RngCore) -> f64 {
        self.0
    }
}

/// Every SBS draws its power level uniformly from `levels` on every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformLevels(pub Vec<f64>);

impl PowerPolicy for UniformLevels {
    fn power(&self, _sbs: usize, _state: QosState, rng: &mut dyn RngCore) -> f64 {
        self.0[rng.random_range(0..self.0.len())]
    }
}

/// Fixed per-SBS powers, indexed by global SBS id.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPowers(pub Vec<f64>);

impl PowerPolicy for FixedPowers {
    fn power(&self, sbs: usize, _state: QosState, _rng: &mut dyn RngCore) -> f64 {
        self.0[sbs]
    }
}

pub fn rate_from_sinr(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// SINR of SBS `f` on RB `l`. `l` must be the RB recorded for `f` in `pa`.
pub fn sinr(topo: &NetworkTopology, pa: &PowerAssignment, f: usize, l: usize) -> Result<f64> {
    if l >= topo.num_rbs() || pa.rb_choice.get(f) != Some(&l) {
        return Err(Error::Contract(format!(
            "SBS {f} does not transmit on RB {l}"
        )));
    }
    let p = pa.power[f];
    if p == 0.0 {
        return Ok(0.0);
    }
    let interference: f64 = topo
        .sbs_of(topo.mno_of(f))
        .iter()
        .filter(|&&j| j != f && pa.rb_choice[j] == l)
        .map(|&j| topo.gain(j, f, l) * pa.power[j])
        .sum();
    Ok(topo.gain(f, f, l) * p / (interference + topo.noise_mw()))
}

pub fn rate_fixed(topo: &NetworkTopology, pa: &PowerAssignment, f: usize, l: usize) -> Result<f64> {
    sinr(topo, pa, f, l).map(rate_from_sinr)
}

/// SINRs for a group of co-MNO SBSs. `rbs[i]` and `powers[i]` belong to
/// `members[i]`.
pub(crate) fn group_sinrs(
    topo: &NetworkTopology,
    members: &[usize],
    rbs: &[usize],
    powers: &[f64],
    out: &mut [f64],
) {
    let noise = topo.noise_mw();
    for (i, &f) in members.iter().enumerate() {
        if powers[i] == 0.0 {
            out[i] = 0.0;
            continue;
        }
        let l = rbs[i];
        let mut interference = 0.0;
        for (j, &g) in members.iter().enumerate() {
            if j != i && rbs[j] == l {
                interference += topo.gain(g, f, l) * powers[j];
            }
        }
        out[i] = topo.gain(f, f, l) * powers[i] / (interference + noise);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of the expected rate of each SBS in `members`, all of
/// which belong to the MNO holding `slices`. On every draw each SBS picks an
/// RB uniformly from `slices`; the joint outcome determines the rates.
/// State-dependent policies see the QoS state produced by the previous draw.
pub fn expected_rates<R: Rng>(
    topo: &NetworkTopology,
    members: &[usize],
    slices: &[usize],
    policy: &dyn PowerPolicy,
    draws: usize,
    rng: &mut R,
) -> Vec<RateEstimate> {
    let n = members.len();
    if slices.is_empty() || draws == 0 {
        return vec![
            RateEstimate {
                mean: 0.0,
                std_error: 0.0
            };
            n
        ];
    }
    let th = topo.sinr_threshold();
    let mut states: Vec<QosState> = members.iter().map(|&f| policy.initial_state(f)).collect();
    let mut rbs = vec![0usize; n];
    let mut powers = vec![0.0; n];
    let mut sinrs = vec![0.0; n];
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..draws {
        for i in 0..n {
            rbs[i] = slices[rng.random_range(0..slices.len())];
            powers[i] = policy.power(members[i], states[i], rng);
        }
        group_sinrs(topo, members, &rbs, &powers, &mut sinrs);
        for i in 0..n {
            let r = rate_from_sinr(sinrs[i]);
            sum[i] += r;
            sum_sq[i] += r * r;
            states[i] = QosState::from_sinr(sinrs[i], th);
        }
    }
    let d = draws as f64;
    (0..n)
        .map(|i| {
            let mean = sum[i] / d;
            let var = if draws > 1 {
                ((sum_sq[i] - d * mean * mean) / (d - 1.0)).max(0.0)
            } else {
                0.0
            };
            RateEstimate {
                mean,
                std_error: (var / d).sqrt(),
            }
        })
        .collect()
}

/// Expected rate of a single SBS under `matching`.
pub fn rate_expected<R: Rng>(
    topo: &NetworkTopology,
    matching: &Matching,
    policy: &dyn PowerPolicy,
    f: usize,
    draws: usize,
    rng: &mut R,
) -> f64 {
    let k = topo.mno_of(f);
    let members = topo.sbs_of(k);
    let idx = members
        .iter()
        .position(|&g| g == f)
        .expect("SBS belongs to its MNO");
    expected_rates(topo, members, &matching.slices_of(k), policy, draws, rng)[idx].mean
}

/// Sum of the expected rates of MNO `k`'s SBSs; zero when it holds no slices.
pub fn mno_rate<R: Rng>(
    topo: &NetworkTopology,
    matching: &Matching,
    policy: &dyn PowerPolicy,
    k: usize,
    draws: usize,
    rng: &mut R,
) -> f64 {
    expected_rates(
        topo,
        topo.sbs_of(k),
        &matching.slices_of(k),
        policy,
        draws,
        rng,
    )
    .iter()
    .map(|e| e.mean)
    .sum()
}

pub fn rate_report<R: Rng>(
    topo: &NetworkTopology,
    matching: &Matching,
    policy: &dyn PowerPolicy,
    draws: usize,
    rng: &mut R,
) -> RateReport {
    let mut per_sbs = vec![0.0; topo.num_sbs()];
    for k in 0..topo.num_mnos() {
        let members = topo.sbs_of(k);
        let est = expected_rates(topo, members, &matching.slices_of(k), policy, draws, rng);
        for (&f, e) in members.iter().zip(est) {
            per_sbs[f] = e.mean;
        }
    }
    RateReport::from_sbs_rates(topo, per_sbs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn two_sbs(g_direct: f64, g_cross: f64, noise: f64, rbs: usize) -> NetworkTopology {
        NetworkTopology::from_gains(
            vec![vec![0, 1]],
            rbs,
            noise,
            2.0,
            vec![0.0, 5.0],
            |tx, rx, _| {
                if tx == rx {
                    g_direct
                } else {
                    g_cross
                }
            },
        )
        .unwrap()
    }

    #[test]
    fn sinr_without_interference() {
        let t = two_sbs(1e-6, 1e-30, 1e-12, 2);
        let pa = PowerAssignment::new(vec![10.0, 10.0], vec![0, 1]);
        assert_relative_eq!(sinr(&t, &pa, 0, 0).unwrap(), 1e7, max_relative = 1e-12);
    }

    #[test]
    fn zero_power_gives_zero_sinr() {
        let t = two_sbs(1e-6, 1e-6, 1e-12, 1);
        let pa = PowerAssignment::new(vec![0.0, 10.0], vec![0, 0]);
        assert_eq!(sinr(&t, &pa, 0, 0).unwrap(), 0.0);
        assert_eq!(rate_fixed(&t, &pa, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_interferer_gives_unit_sinr() {
        let t = two_sbs(1e-6, 1e-6, 1e-300, 1);
        let pa = PowerAssignment::new(vec![3.0, 3.0], vec![0, 0]);
        assert_relative_eq!(sinr(&t, &pa, 0, 0).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            rate_fixed(&t, &pa, 0, 0).unwrap(),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn wrong_rb_is_contract_violation() {
        let t = two_sbs(1e-6, 1e-6, 1e-12, 2);
        let pa = PowerAssignment::new(vec![3.0, 3.0], vec![0, 1]);
        assert!(matches!(sinr(&t, &pa, 0, 1), Err(Error::Contract(_))));
        assert!(matches!(sinr(&t, &pa, 0, 7), Err(Error::Contract(_))));
    }

    #[test]
    fn rate_of_sinr() {
        assert_eq!(rate_from_sinr(1.0), 1.0);
        assert_eq!(rate_from_sinr(3.0), 2.0);
        assert_eq!(rate_from_sinr(0.0), 0.0);
    }

    #[test]
    fn single_slice_average_equals_fixed_rate() {
        let t = two_sbs(2e-9, 1e-10, 1e-12, 3);
        let mut m = Matching::empty(3, 1);
        m.set_owner(2, Some(0));
        let mut rng = SimRng::seed_from_u64(1);
        let est = expected_rates(&t, &[0, 1], &[2], &ConstantPower(5.0), 50, &mut rng);
        let pa = PowerAssignment::new(vec![5.0, 5.0], vec![2, 2]);
        assert_relative_eq!(
            est[0].mean,
            rate_fixed(&t, &pa, 0, 2).unwrap(),
            max_relative = 1e-12
        );
        assert_eq!(est[0].std_error, 0.0);
    }

    #[test]
    fn no_slices_means_zero_rate() {
        let t = two_sbs(1e-6, 1e-6, 1e-12, 2);
        let m = Matching::empty(2, 1);
        let mut rng = SimRng::seed_from_u64(1);
        assert_eq!(mno_rate(&t, &m, &ConstantPower(5.0), 0, 100, &mut rng), 0.0);
    }

    #[test]
    fn report_is_additive() {
        let t = crate::scenario::generate_topology(&crate::ScenarioConfig::default()).unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        let m = crate::matching::initial_matching(15, &[2, 3, 4], &mut rng);
        let r = rate_report(&t, &m, &ConstantPower(8.0), 50, &mut rng);
        for k in 0..3 {
            let s: f64 = t.sbs_of(k).iter().map(|&f| r.rate_per_sbs[f]).sum();
            assert_eq!(s, r.rate_per_mno[k]);
        }
    }
}
