use proptest::prelude::*;
use rand::SeedableRng;

use moslice_core::matching::{
    initial_matching, mcmc_swap, propose_relocation, propose_swap, swap_probability,
    validate_matching, McmcConfig, MnoRateModel,
};
use moslice_core::mec::fractional_knapsack;
use moslice_core::oracle::{exact_expected_rates, exhaustive_matching};
use moslice_core::qlearning::{q_update, select_action, QLearningConfig, QTable, QosState};
use moslice_core::radio::{expected_rates, rate_fixed, FixedPowers, PowerAssignment};
use moslice_core::scenario::{path_loss_cross, path_loss_direct, NetworkTopology};
use moslice_core::seed::SimRng;
use moslice_core::WelfareReading;

fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// One MNO of `n` SBSs on `rbs` RBs with the given flat gain matrix.
fn topology(n: usize, rbs: usize, gains: &[f64]) -> NetworkTopology {
    NetworkTopology::from_gains(
        vec![(0..n).collect()],
        rbs,
        1e-3,
        2.0,
        vec![0.0, 1.0, 2.0],
        |tx, rx, l| gains[(tx * n + rx) * rbs + l],
    )
    .unwrap()
}

struct Additive(Vec<Vec<f64>>);

impl MnoRateModel for Additive {
    fn mno_rate(&self, k: usize, slices: &[usize]) -> f64 {
        if slices.is_empty() {
            return 0.0;
        }
        slices.iter().map(|&l| self.0[k][l]).sum::<f64>() / slices.len() as f64
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn path_loss_increases_with_distance(d in 1.0f64..1e4, step in 0.01f64..100.0) {
        prop_assert!(path_loss_direct(d + step).unwrap() > path_loss_direct(d).unwrap());
        prop_assert!(path_loss_cross(d + step, 15.0).unwrap() > path_loss_cross(d, 15.0).unwrap());
    }

    #[test]
    fn swap_probability_is_a_monotone_probability(
        old in -1e3f64..1e3,
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
        t in 0.1f64..200.0,
    ) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p_lo = swap_probability(old + lo, old, t);
        let p_hi = swap_probability(old + hi, old, t);
        prop_assert!((0.0..=1.0).contains(&p_lo));
        prop_assert!(p_lo <= p_hi);
        prop_assert!((swap_probability(old, old, t) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rate_monotone_in_own_and_interferer_power(
        g in prop::collection::vec(1e-3f64..10.0, 4),
        p in 0.1f64..10.0,
        q in 0.1f64..10.0,
        extra in 0.01f64..5.0,
    ) {
        let topo = topology(2, 1, &g);
        let at = |p0: f64, p1: f64| rate_fixed(&topo, &PowerAssignment::new(vec![p0, p1], vec![0, 0]), 0, 0).unwrap();
        prop_assert!(at(p + extra, q) > at(p, q));
        prop_assert!(at(p, q + extra) < at(p, q));
    }

    #[test]
    fn q_values_stay_bounded(
        rewards in prop::collection::vec((0usize..2, 0usize..4, 0.0f64..5.0), 1..400),
        beta in 0.01f64..0.99,
        gamma in 0.0f64..0.99,
    ) {
        let cfg = QLearningConfig { learning_rate: beta, gamma, ..Default::default() };
        let bound = 5.0 / (1.0 - gamma);
        let mut q = QTable::new(4);
        for (s, a, w) in rewards {
            let s = if s == 0 { QosState::Violated } else { QosState::Satisfied };
            let before = q.clone();
            q_update(&mut q, s, a, w, &cfg);
            let touched = q.values().iter().zip(before.values()).filter(|(x, y)| x != y).count();
            prop_assert!(touched <= 1);
            prop_assert!(q.values().iter().all(|v| v.abs() <= bound + 1e-9));
        }
    }

    #[test]
    fn knapsack_never_exceeds_capacity(
        items in prop::collection::vec((0.0f64..100.0, 0.001f64..50.0), 0..20),
        frac in 0.0f64..1.5,
    ) {
        let costs: Vec<f64> = items.iter().map(|i| i.0).collect();
        let delays: Vec<f64> = items.iter().map(|i| i.1).collect();
        let capacity = frac * delays.iter().sum::<f64>();
        let sol = fractional_knapsack(&costs, &delays, capacity).unwrap();
        let used: f64 = sol.y.iter().zip(&delays).map(|(y, d)| y * d).sum();
        prop_assert!(used <= capacity * (1.0 + 1e-12));
        prop_assert!(sol.y.iter().all(|y| (0.0..=1.0).contains(y)));
        prop_assert!(sol.y.iter().filter(|&&y| y > 0.0 && y < 1.0).count() <= 1);
    }

    #[test]
    fn moves_preserve_capacities(seed in any::<u64>(), l in 2usize..16) {
        let caps = [2, 3, 4];
        let mut r = rng(seed);
        let m = initial_matching(l, &caps, &mut r);
        prop_assert!(validate_matching(&m, &caps));
        let s = propose_swap(&m, &mut r).unwrap();
        for k in 0..3 {
            prop_assert_eq!(s.matching.count(k), m.count(k));
        }
        let rel = propose_relocation(&m, &mut r).unwrap();
        prop_assert_ne!(rel.from, rel.to);
        prop_assert_eq!(rel.matching.owner(rel.rb), rel.to);
    }

    #[test]
    fn chain_never_beats_exhaustive_optimum(
        table in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 5), 2),
        seed in any::<u64>(),
    ) {
        let model = Additive(table);
        let caps = [2, 3];
        let cfg = McmcConfig { iterations: 300, ..Default::default() };
        let oracle = exhaustive_matching(&model, 5, &caps, WelfareReading::DistinctMnos).unwrap();
        let chain = mcmc_swap(&model, 5, &caps, &cfg, &mut rng(seed)).unwrap();
        prop_assert!(validate_matching(&chain.best, &caps));
        prop_assert!(chain.best_welfare <= oracle.optimal_welfare * (1.0 + 1e-12));
        prop_assert!(chain.trace.rows.windows(2).all(|w| w[1].best_welfare >= w[0].best_welfare));
    }
}

#[test]
fn swap_pairs_are_uniform() {
    let l = 15;
    let caps = [5, 5, 5];
    let mut r = rng(3);
    let m = initial_matching(l, &caps, &mut r);
    let draws = 10_000;
    let mut counts = vec![0u32; l * l];
    for _ in 0..draws {
        let (a, b) = propose_swap(&m, &mut r).unwrap().rbs;
        counts[a.min(b) * l + a.max(b)] += 1;
    }
    let pairs = l * (l - 1) / 2;
    let expected = draws as f64 / pairs as f64;
    let chi2: f64 = (0..l)
        .flat_map(|a| (a + 1..l).map(move |b| (a, b)))
        .map(|(a, b)| (counts[a * l + b] as f64 - expected).powi(2) / expected)
        .sum();
    // 104 degrees of freedom; the 0.999 quantile is about 155
    assert!(chi2 < 155.0, "chi2 = {chi2}");
}

#[test]
fn full_exploration_is_uniform() {
    let cfg = QLearningConfig {
        epsilon_explore: 1.0,
        ..Default::default()
    };
    let mut q = QTable::new(4);
    q.set(QosState::Satisfied, 2, 10.0);
    let mut r = rng(11);
    let draws = 10_000;
    let mut counts = [0u32; 4];
    for _ in 0..draws {
        counts[select_action(&q, QosState::Satisfied, &cfg, &mut r)] += 1;
    }
    let p = 0.25;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!(
            (c as f64 - draws as f64 * p).abs() <= 3.0 * sd,
            "{counts:?}"
        );
    }
}

#[test]
fn sampled_rates_match_enumeration_for_two_sbs() {
    let gains = [2.0, 0.3, 0.1, 0.5, 0.4, 1.5, 0.2, 3.0];
    let topo = topology(2, 2, &gains);
    let powers = vec![2.0, 1.0];
    let exact = exact_expected_rates(&topo, &[0, 1], &[0, 1], &[vec![2.0], vec![1.0]]).unwrap();
    let est = expected_rates(
        &topo,
        &[0, 1],
        &[0, 1],
        &FixedPowers(powers),
        40_000,
        &mut rng(5),
    );
    for (e, x) in est.iter().zip(&exact) {
        assert!((e.mean - x).abs() <= 4.0 * e.std_error, "{e:?} vs {x}");
    }
}
