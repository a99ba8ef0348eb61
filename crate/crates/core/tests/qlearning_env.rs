use rand::SeedableRng;

use moslice_core::matching::Matching;
use moslice_core::qlearning::{run_qlearning, QLearningConfig, QosState};
use moslice_core::scenario::NetworkTopology;
use moslice_core::seed::SimRng;

fn symmetric_pair(direct: f64, cross: f64) -> NetworkTopology {
    NetworkTopology::from_gains(
        vec![vec![0, 1]],
        1,
        1.0,
        2.0,
        vec![0.0, 5.0, 10.0],
        |tx, rx, _| if tx == rx { direct } else { cross },
    )
    .unwrap()
}

#[test]
fn isolated_sbs_learns_max_power() {
    let topo = NetworkTopology::from_gains(
        vec![vec![0]],
        1,
        1.0,
        2.0,
        vec![0.0, 5.0, 10.0],
        |_, _, _| 1.0,
    )
    .unwrap();
    let m = Matching::from_owners(vec![Some(0)], 1).unwrap();
    let out = run_qlearning(
        &topo,
        &m,
        &QLearningConfig::default(),
        &mut SimRng::seed_from_u64(4),
    );
    assert_eq!(out.policy.action(0, QosState::Satisfied), 2);
    assert!((out.report.rate_per_sbs[0] - 11f64.log2()).abs() < 1e-12);
}

#[test]
fn symmetric_agents_get_symmetric_rates() {
    let topo = symmetric_pair(4.0, 1.0);
    let m = Matching::from_owners(vec![Some(0)], 1).unwrap();
    let cfg = QLearningConfig {
        episodes: 300,
        ..Default::default()
    };
    let diffs: Vec<f64> = (0..200)
        .map(|s| {
            let out = run_qlearning(&topo, &m, &cfg, &mut SimRng::seed_from_u64(s));
            out.report.rate_per_sbs[0] - out.report.rate_per_sbs[1]
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!(mean.abs() <= 3.0 * se.max(1e-12), "mean {mean}, se {se}");
}

#[test]
fn learning_is_reproducible() {
    let topo = symmetric_pair(4.0, 1.0);
    let m = Matching::from_owners(vec![Some(0)], 1).unwrap();
    let cfg = QLearningConfig::default();
    let a = run_qlearning(&topo, &m, &cfg, &mut SimRng::seed_from_u64(9));
    let b = run_qlearning(&topo, &m, &cfg, &mut SimRng::seed_from_u64(9));
    assert_eq!(a, b);
}
