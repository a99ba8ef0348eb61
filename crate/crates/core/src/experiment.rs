//! Replicated, seeded experiment drivers.
//!
//! All randomness is derived from `scenario.rng_seed` through
//! [`crate::seed::derive`], keyed by replication index and stream label, so
//! results do not depend on thread scheduling. Replications and sweep cells
//! run on the rayon pool; rows come back in a fixed order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{
    initial_matching, mcmc_swap, McmcConfig, McmcOutcome, MnoRateModel, PowerMode, SampledRates,
    WelfareReading,
};
use crate::mec::{delay_profile, fractional_knapsack, knapsack_capacity, MecConfig};
use crate::oracle::{check_swap_stability, exhaustive_matching, ExactRates};
use crate::qlearning::{learned_mno_rates, QLearningConfig};
use crate::scenario::{generate_topology, NetworkTopology, ScenarioConfig};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingSpec {
    pub iterations: usize,
    #[serde(alias = "t_b")]
    pub temperature: f64,
    pub relocation_prob: f64,
    pub compound_prob: f64,
    pub literal_mode: bool,
    pub welfare_reading: WelfareReading,
    pub power_mode: PowerMode,
}

impl Default for MatchingSpec {
    fn default() -> Self {
        let m = McmcConfig::default();
        Self {
            iterations: m.iterations,
            temperature: m.temperature,
            relocation_prob: m.relocation_prob,
            compound_prob: m.compound_prob,
            literal_mode: m.literal_mode,
            welfare_reading: m.welfare_reading,
            power_mode: PowerMode::Qlearning,
        }
    }
}

impl MatchingSpec {
    pub fn mcmc(&self) -> McmcConfig {
        McmcConfig {
            iterations: self.iterations,
            temperature: self.temperature,
            relocation_prob: self.relocation_prob,
            compound_prob: self.compound_prob,
            literal_mode: self.literal_mode,
            welfare_reading: self.welfare_reading,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub qlearning: QLearningConfig,
    pub mec: MecConfig,
    pub matching: MatchingSpec,
    pub replications: usize,
    /// Directory that result files are written to.
    pub output_dir: String,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            qlearning: QLearningConfig::default(),
            mec: MecConfig::default(),
            matching: MatchingSpec::default(),
            replications: 1,
            output_dir: "results".into(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        self.scenario.validate()?;
        self.qlearning.validate()?;
        self.mec.validate()?;
        self.matching.mcmc().validate()
    }

    /// Switches on the two-branch MCMC acceptance rule and discount-as-exploration
    /// Q-learning together.
    pub fn set_literal_mode(&mut self, on: bool) {
        self.matching.literal_mode = on;
        self.qlearning.literal_exploration = on;
    }

    pub fn base_seed(&self) -> u64 {
        self.scenario.rng_seed
    }
}

/// Capacities for `k` MNOs, cycling through `base`.
pub fn capacities_for(base: &[usize], k: usize) -> Vec<usize> {
    (0..k).map(|i| base[i % base.len()]).collect()
}

/// Scenario of replication `r`: same parameters, derived topology seed.
pub fn replication_scenario(
    spec: &ExperimentSpec,
    scenario: &ScenarioConfig,
    r: usize,
) -> ScenarioConfig {
    ScenarioConfig {
        rng_seed: seed::derive(spec.base_seed(), &[stream::TOPOLOGY, r as u64]),
        ..scenario.clone()
    }
}

fn sampled_model<'a>(
    spec: &ExperimentSpec,
    topo: &'a NetworkTopology,
    mode: PowerMode,
    r: usize,
) -> SampledRates<'a> {
    SampledRates {
        topo,
        power_mode: mode,
        qlearning: spec.qlearning.clone(),
        seed: seed::derive(spec.base_seed(), &[stream::MNO_RATE, r as u64]),
    }
}

/// One MCMC chain for replication `r` on `scenario` under `mode`.
pub fn run_chain(
    spec: &ExperimentSpec,
    scenario: &ScenarioConfig,
    mode: PowerMode,
    r: usize,
) -> Result<McmcOutcome> {
    let scenario = replication_scenario(spec, scenario, r);
    let topo = generate_topology(&scenario)?;
    let model = sampled_model(spec, &topo, mode, r);
    let mut rng = seed::rng_from(spec.base_seed(), &[stream::CHAIN, r as u64]);
    mcmc_swap(
        &model,
        scenario.num_slices,
        &scenario.capacities,
        &spec.matching.mcmc(),
        &mut rng,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub replication: usize,
    pub iteration: usize,
    pub welfare: f64,
    pub best_welfare: f64,
    pub accepted: bool,
}

/// Welfare traces, one chain per replication.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<Vec<ConvergenceRow>> {
    spec.validate()?;
    let chains: Vec<McmcOutcome> = (0..spec.replications)
        .into_par_iter()
        .map(|r| run_chain(spec, &spec.scenario, spec.matching.power_mode, r))
        .collect::<Result<_>>()?;
    Ok(chains
        .iter()
        .enumerate()
        .flat_map(|(r, c)| {
            c.trace.rows.iter().map(move |t| ConvergenceRow {
                replication: r,
                iteration: t.iteration,
                welfare: t.welfare,
                best_welfare: t.best_welfare,
                accepted: t.accepted,
            })
        })
        .collect())
}

/// Sweep dimensions for [`run_cdf`]; an empty list keeps the experiment's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdfSweep {
    pub num_slices: Vec<usize>,
    pub power_modes: Vec<PowerMode>,
    pub num_mnos: Vec<usize>,
}

impl CdfSweep {
    /// Slice-count sweep under both power modes.
    pub fn slices_and_power() -> Self {
        Self {
            num_slices: vec![15, 20, 25, 30],
            power_modes: vec![PowerMode::Qlearning, PowerMode::Uniform],
            num_mnos: vec![],
        }
    }

    /// MNO-count sweep at the experiment's slice count.
    pub fn mnos() -> Self {
        Self {
            num_slices: vec![],
            power_modes: vec![],
            num_mnos: vec![3, 4, 5],
        }
    }

    /// `(K, L, mode)` cells in row order.
    pub fn cells(&self, spec: &ExperimentSpec) -> Vec<(usize, usize, PowerMode)> {
        let or = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        let modes = if self.power_modes.is_empty() {
            vec![spec.matching.power_mode]
        } else {
            self.power_modes.clone()
        };
        let mut cells = Vec::new();
        for k in or(&self.num_mnos, spec.scenario.num_mnos) {
            for l in or(&self.num_slices, spec.scenario.num_slices) {
                for &mode in &modes {
                    cells.push((k, l, mode));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub num_mnos: usize,
    pub num_slices: usize,
    pub power_mode: PowerMode,
    pub replication: usize,
    pub seed: u64,
    pub welfare: f64,
}

/// Final best welfare for every sweep cell and replication.
pub fn run_cdf(spec: &ExperimentSpec, sweep: &CdfSweep) -> Result<Vec<CdfRow>> {
    spec.validate()?;
    let jobs: Vec<((usize, usize, PowerMode), usize)> = sweep
        .cells(spec)
        .into_iter()
        .flat_map(|cell| (0..spec.replications).map(move |r| (cell, r)))
        .collect();
    jobs.into_par_iter()
        .map(|((k, l, mode), r)| {
            let scenario = ScenarioConfig {
                num_mnos: k,
                num_slices: l,
                capacities: capacities_for(&spec.scenario.capacities, k),
                ..spec.scenario.clone()
            };
            let out = run_chain(spec, &scenario, mode, r)?;
            Ok(CdfRow {
                num_mnos: k,
                num_slices: l,
                power_mode: mode,
                replication: r,
                seed: replication_scenario(spec, &scenario, r).rng_seed,
                welfare: out.best_welfare,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnapsackSweep {
    pub delay_thresholds: Vec<f64>,
    pub tolerances: Vec<f64>,
}

impl KnapsackSweep {
    pub fn full() -> Self {
        Self {
            delay_thresholds: vec![0.001, 0.003, 0.005],
            tolerances: vec![0.3, 0.4],
        }
    }

    pub fn cells(&self, mec: &MecConfig) -> Vec<(f64, f64)> {
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let mut cells = Vec::new();
        for d in or(&self.delay_thresholds, mec.delay_threshold) {
            for e in or(&self.tolerances, mec.tolerance) {
                cells.push((d, e));
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnapsackRow {
    pub replication: usize,
    pub delay_threshold: f64,
    pub tolerance: f64,
    pub sbs: usize,
    pub cost: f64,
    pub rate: f64,
    pub service_delay: f64,
    pub downlink_delay: f64,
    pub total_delay: f64,
    pub fraction: f64,
    pub weighted_delay: f64,
}

/// Learned downlink rates of the first MNO's SBSs for replication `r`.
pub fn knapsack_rates(spec: &ExperimentSpec, r: usize) -> Result<Vec<f64>> {
    let scenario = replication_scenario(spec, &spec.scenario, r);
    let topo = generate_topology(&scenario)?;
    let mut rng = seed::rng_from(spec.base_seed(), &[stream::KNAPSACK, r as u64]);
    let m = initial_matching(scenario.num_slices, &scenario.capacities, &mut rng);
    Ok(learned_mno_rates(
        &topo,
        0,
        &m.slices_of(0),
        &spec.qlearning,
        &mut rng,
    ))
}

/// Per-SBS delays and knapsack fractions of the first MNO for every
/// `(D_th, epsilon)` cell. Rates are learned once per replication and shared
/// by all cells.
pub fn run_knapsack(spec: &ExperimentSpec, sweep: &KnapsackSweep) -> Result<Vec<KnapsackRow>> {
    spec.validate()?;
    if spec.mec.costs.len() != spec.scenario.sbs_per_mno {
        return Err(Error::Config(format!(
            "{} SBS costs for {} SBSs per MNO",
            spec.mec.costs.len(),
            spec.scenario.sbs_per_mno
        )));
    }
    let cells = sweep.cells(&spec.mec);
    for &(d, e) in &cells {
        MecConfig {
            delay_threshold: d,
            tolerance: e,
            ..spec.mec.clone()
        }
        .validate()?;
    }
    let per_rep: Vec<Vec<KnapsackRow>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let rates = knapsack_rates(spec, r)?;
            let profile = delay_profile(&spec.mec, &rates);
            let mut rows = Vec::new();
            for &(d, e) in &cells {
                let mec = MecConfig {
                    delay_threshold: d,
                    tolerance: e,
                    ..spec.mec.clone()
                };
                let sol = fractional_knapsack(&mec.costs, &profile.total, knapsack_capacity(&mec))?;
                for (f, &rate) in rates.iter().enumerate() {
                    rows.push(KnapsackRow {
                        replication: r,
                        delay_threshold: d,
                        tolerance: e,
                        sbs: f,
                        cost: mec.costs[f],
                        rate,
                        service_delay: profile.service[f],
                        downlink_delay: profile.downlink[f],
                        total_delay: profile.total[f],
                        fraction: sol.y[f],
                        weighted_delay: sol.y[f] * profile.total[f],
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyRow {
    pub replication: usize,
    pub seed: u64,
    pub power_mode: PowerMode,
    pub oracle_welfare: f64,
    pub mcmc_welfare: f64,
    pub attained: bool,
    pub oracle_stable: bool,
    pub mcmc_stable: bool,
    pub num_valid: u64,
}

/// Relative tolerance for "MCMC attained the optimum".
pub const ATTAIN_TOL: f64 = 1e-9;

/// Exhaustive optimum, MCMC result and swap stability of both on a small
/// instance per replication. Uniform and max power use exact rate
/// expectations.
pub fn run_certify(spec: &ExperimentSpec) -> Result<Vec<CertifyRow>> {
    spec.validate()?;
    let mode = spec.matching.power_mode;
    (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let scenario = replication_scenario(spec, &spec.scenario, r);
            let topo = generate_topology(&scenario)?;
            let exact;
            let sampled;
            let model: &dyn MnoRateModel = match mode {
                PowerMode::Uniform => {
                    exact = ExactRates::uniform(&topo)?;
                    &exact
                }
                PowerMode::MaxPower => {
                    exact = ExactRates::max_power(&topo)?;
                    &exact
                }
                PowerMode::Qlearning => {
                    sampled = sampled_model(spec, &topo, mode, r);
                    &sampled
                }
            };
            let mcmc_cfg = spec.matching.mcmc();
            let caps = &scenario.capacities;
            let oracle =
                exhaustive_matching(model, scenario.num_slices, caps, mcmc_cfg.welfare_reading)?;
            let mut rng = seed::rng_from(spec.base_seed(), &[stream::CHAIN, r as u64]);
            let chain = mcmc_swap(model, scenario.num_slices, caps, &mcmc_cfg, &mut rng)?;
            let reading = mcmc_cfg.welfare_reading;
            Ok(CertifyRow {
                replication: r,
                seed: scenario.rng_seed,
                power_mode: mode,
                oracle_welfare: oracle.optimal_welfare,
                mcmc_welfare: chain.best_welfare,
                attained: chain.best_welfare >= oracle.optimal_welfare * (1.0 - ATTAIN_TOL),
                oracle_stable: check_swap_stability(
                    &oracle.optimal_matching,
                    model,
                    caps,
                    reading,
                )?
                .is_stable(),
                mcmc_stable: check_swap_stability(&chain.best, model, caps, reading)?.is_stable(),
                num_valid: oracle.num_valid,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            scenario: ScenarioConfig {
                num_mnos: 2,
                sbs_per_mno: 2,
                num_slices: 4,
                capacities: vec![2, 2],
                rng_seed: 5,
                ..Default::default()
            },
            qlearning: QLearningConfig {
                episodes: 100,
                eval_draws: 50,
                ..Default::default()
            },
            mec: MecConfig {
                costs: vec![50.0, 80.0],
                ..Default::default()
            },
            matching: MatchingSpec {
                iterations: 100,
                ..Default::default()
            },
            replications: 2,
            ..Default::default()
        }
    }

    #[test]
    fn cycles_capacities() {
        assert_eq!(capacities_for(&[2, 3, 4], 5), vec![2, 3, 4, 2, 3]);
    }

    #[test]
    fn sweep_cells() {
        let spec = ExperimentSpec::default();
        assert_eq!(CdfSweep::slices_and_power().cells(&spec).len(), 8);
        assert_eq!(CdfSweep::mnos().cells(&spec).len(), 3);
        assert_eq!(
            CdfSweep::default().cells(&spec),
            vec![(3, 15, PowerMode::Qlearning)]
        );
        assert_eq!(KnapsackSweep::full().cells(&spec.mec).len(), 6);
        assert_eq!(
            KnapsackSweep::default().cells(&spec.mec),
            vec![(0.001, 0.3)]
        );
    }

    #[test]
    fn convergence_is_reproducible() {
        let spec = small_spec();
        let a = run_convergence(&spec).unwrap();
        assert_eq!(a.len(), 200);
        assert_eq!(a, run_convergence(&spec).unwrap());
    }

    #[test]
    fn knapsack_requires_matching_costs() {
        let mut spec = small_spec();
        spec.mec.costs = vec![1.0];
        assert!(matches!(
            run_knapsack(&spec, &KnapsackSweep::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn certify_small_instance() {
        let mut spec = small_spec();
        spec.matching.power_mode = PowerMode::Uniform;
        spec.matching.iterations = 500;
        let rows = run_certify(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert!(row.oracle_stable);
            assert!(row.mcmc_welfare <= row.oracle_welfare * (1.0 + ATTAIN_TOL));
        }
    }

    #[test]
    fn literal_mode_switch() {
        let mut spec = ExperimentSpec::default();
        spec.set_literal_mode(true);
        assert!(spec.matching.literal_mode && spec.qlearning.literal_exploration);
    }
}
