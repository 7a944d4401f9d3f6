use std::io::BufReader;

use rcsl_core::environments::{
    build_grid_maze, build_linearq, build_linearq_dataset, generate_maze_dataset, linearq_reference,
};
use rcsl_core::learners::{fit_tabular_behavior, fit_tabular_dynamics, RcslMlpPolicy, RtgFeatures};
use rcsl_core::mbrcsl::{generate_rollout_dataset, run_mbrcsl, MbrcslConfig, RolloutConfig};
use rcsl_core::mdp::{build_rtg_dataset, coverage_checks, read_jsonl, write_jsonl, MdpSpec};
use rcsl_core::nn::{build_analytic_rcsl_policy, TrainConfig};

#[test]
fn linearq_instance_and_dataset_survive_serialization() {
    let env = build_linearq(3).unwrap();
    let text = serde_json::to_string(&env.mdp).unwrap();
    assert!(text.contains("\"deterministic\":true"));
    let back: MdpSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, env.mdp);

    let data = build_linearq_dataset(3, 2, 9).unwrap();
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &data).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), data.len());
    let read = read_jsonl(BufReader::new(&buf[..])).unwrap();
    assert_eq!(read, data);
    assert!(build_rtg_dataset(&read).multiset_eq(&build_rtg_dataset(&data)));
}

#[test]
fn linearq_dataset_covers_everything() {
    for u in [1, 2, 5] {
        let env = build_linearq(u).unwrap();
        let r = linearq_reference(u).unwrap();
        let d = build_linearq_dataset(u, 1, 0).unwrap();
        assert_eq!(d.len(), 4 * (3 * u + 3));
        assert_eq!(build_rtg_dataset(&d).len(), d.len() * env.mdp.horizon());
        let cov = coverage_checks(&d, &env.mdp, Some(&r.pi_star)).unwrap();
        assert!(cov.uniform && cov.covers_optimal);
    }
}

#[test]
fn analytic_policy_errs_only_where_the_construction_says() {
    // Misclassified triples either sit on a key that carries both labels in
    // the dataset, or on the absorbing state with zero return to go.
    for u in [2, 3, 6] {
        let env = build_linearq(u).unwrap();
        let policy = RcslMlpPolicy {
            net: build_analytic_rcsl_policy(u).unwrap(),
            features: RtgFeatures::new(env.n_states(), env.k),
            n_actions: 2,
        };
        let d = build_rtg_dataset(&build_linearq_dataset(u, 1, 0).unwrap());
        let key = |s: usize, g: f64| (s, (2.0 * g / env.k).round() as i64);
        let mut labels = std::collections::BTreeMap::<(usize, i64), [bool; 2]>::new();
        for t in &d.triples {
            labels.entry(key(t.state, t.rtg)).or_default()[t.action] = true;
        }
        for t in &d.triples {
            if policy.act(t.state, t.rtg) != t.action {
                let both = labels[&key(t.state, t.rtg)] == [true, true];
                assert!(both || (t.state == env.absorbing_state() && t.rtg == 0.0), "u={u} {t:?}");
            }
        }
    }
}

#[test]
fn rollouts_improve_on_every_offline_trajectory() {
    let maze = build_grid_maze(8).unwrap();
    let offline = generate_maze_dataset(&maze, 6, 6, 4).unwrap();
    let best_offline = offline.iter().map(|t| t.total_return()).fold(f64::MIN, f64::max);
    let report = generate_rollout_dataset(
        &offline,
        &fit_tabular_dynamics(&offline).unwrap(),
        &fit_tabular_behavior(&offline, 5).unwrap(),
        &RolloutConfig::new(50, 8, 4),
    )
    .unwrap();
    let worst_rollout = report.rollout_dataset.iter().map(|t| t.total_return()).fold(f64::MAX, f64::min);
    assert!(worst_rollout > best_offline);
    let json = serde_json::to_value(&report).unwrap();
    assert!(json.get("high_return_rate").is_some());
}

#[test]
fn mbrcsl_end_to_end_reaches_the_maze_optimum() {
    let maze = build_grid_maze(8).unwrap();
    let offline = generate_maze_dataset(&maze, 10, 10, 0).unwrap();
    let out = run_mbrcsl(
        &offline,
        &maze.mdp,
        &MbrcslConfig {
            rollout: RolloutConfig::new(100, 8, 0),
            train: TrainConfig::default(),
            width: 16,
            eval_episodes: 10,
            rtg_unit: 1.0,
        },
    )
    .unwrap();
    assert_eq!(out.desired_rtg, 6.0);
    assert_eq!(out.eval_return, 6.0);
}
