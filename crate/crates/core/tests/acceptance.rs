//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::distributions::{Distribution, Uniform};
use rcsl_core::analysis::linearq_certificate;
use rcsl_core::environments::{
    build_grid_maze, build_linearq, build_linearq_dataset, build_reward_ambiguity_pair,
    build_stitch_counterexample, generate_maze_dataset, linearq_reference,
};
use rcsl_core::experiments::{
    linearq_sim, mbrcsl_maze, reward_ambiguity, AmbiguityConfig, LinearQSimConfig, MazeConfig, WidthSpec,
};
use rcsl_core::learners::{build_mixture_rc_policy, mixture_act, RcslMlpPolicy, RtgFeatures};
use rcsl_core::learners::{fit_tabular_behavior, fit_tabular_dynamics};
use rcsl_core::mbrcsl::{generate_rollout_dataset, RolloutConfig};
use rcsl_core::mdp::{
    build_rtg_dataset, evaluate_return_conditioned, exact_expected_return_rc, exact_optimal_values, RcHistory,
};
use rcsl_core::nn::{build_analytic_rcsl_policy, ForwardCache, Mlp2, TrainConfig};
use rcsl_core::rng::episode_rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(id: &str, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let ok = out.passed && in_time;
    println!(
        "{} {id} {title}: {} [{:.2?}, budget {:.0?}{}]",
        if ok { "PASS" } else { "FAIL" },
        out.detail,
        elapsed,
        budget,
        if in_time { "" } else { ", over budget" }
    );
    ok
}

fn ac1() -> Outcome {
    let mut worst = 0.0f64;
    for u in 1..=64 {
        let env = build_linearq(u).unwrap();
        let reference = linearq_reference(u).unwrap();
        let vt = exact_optimal_values(&env.mdp);
        for s in 0..env.n_states() {
            for a in 0..2 {
                worst = worst.max((reference.q_star(s, a).unwrap() - vt.q[0][s][a]).abs());
            }
        }
    }
    Outcome { passed: worst <= 1e-9, detail: format!("max |closed form - DP| over u=1..64 is {worst:.2e}") }
}

/// Errors that any deterministic function of `(s, g)` must make on the
/// dataset, with RTGs matched on the half-`k` grid, and the number of keys
/// that carry both labels.
fn label_conflicts(u: usize, k: f64) -> (usize, usize) {
    let d = build_rtg_dataset(&build_linearq_dataset(u, 1, 0).unwrap());
    let mut counts: BTreeMap<(usize, i64), [usize; 2]> = BTreeMap::new();
    for t in &d.triples {
        counts.entry((t.state, (2.0 * t.rtg / k).round() as i64)).or_default()[t.action] += 1;
    }
    let both: Vec<_> = counts.values().filter(|c| c[0] > 0 && c[1] > 0).collect();
    (both.iter().map(|c| c[0].min(c[1])).sum(), both.len())
}

fn ac2() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for u in [2, 4, 8, 16] {
        let env = build_linearq(u).unwrap();
        let reference = linearq_reference(u).unwrap();
        let policy = RcslMlpPolicy {
            net: build_analytic_rcsl_policy(u).unwrap(),
            features: RtgFeatures::new(env.n_states(), env.k),
            n_actions: 2,
        };
        let d = build_rtg_dataset(&build_linearq_dataset(u, 1, 0).unwrap());
        let wrong = d.triples.iter().filter(|t| policy.act(t.state, t.rtg) != t.action).count();
        let g = evaluate_return_conditioned(&env.mdp, &policy, reference.v_star_0, 0).unwrap();
        let return_ok = (g - reference.v_star_0).abs() <= env.k / 10.0;
        passed &= wrong == 0 && return_ok;
        let (floor, keys) = label_conflicts(u, env.k);
        parts.push(format!(
            "u={u}: {wrong}/{} misclassified, floor {floor} from {keys} two-label keys, return {} V*(0)",
            d.len(),
            if return_ok { "=" } else { "!=" }
        ));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn ac3() -> Outcome {
    let mut passed = true;
    let mut bounds = Vec::new();
    for u in (16..=160).step_by(16) {
        let c = linearq_certificate(u).unwrap();
        passed &= c.min_hidden_neurons == (u - 2) / 2;
        bounds.push(format!("{u}:{}", c.min_hidden_neurons));
    }
    Outcome { passed, detail: format!("u:bound {}", bounds.join(" ")) }
}

fn ac4() -> Outcome {
    let cfg = LinearQSimConfig {
        u_list: vec![16, 32],
        rcsl_widths: vec![WidthSpec::Fixed(16)],
        ql_widths: vec![WidthSpec::Fixed(16), WidthSpec::PerU { num: 1, den: 1 }],
        seeds: vec![0, 1, 2, 3],
        train: TrainConfig::default(),
        ..Default::default()
    };
    let report = linearq_sim(&cfg).unwrap();
    let mut passed = true;
    let mut parts = Vec::new();
    let mut cells: BTreeMap<(usize, String, usize), Vec<f64>> = BTreeMap::new();
    for row in report.rows().iter().filter(|r| r.method != "naive") {
        cells
            .entry((row.u.unwrap(), row.method.clone(), row.width.unwrap()))
            .or_default()
            .push(row.gap_k_units.unwrap());
    }
    for ((u, method, width), gaps) in &cells {
        let tol = 0.1;
        let hits = if method == "rcsl" {
            gaps.iter().filter(|&&g| g <= 0.5 + tol).count()
        } else {
            gaps.iter().filter(|&&g| g >= 0.5 - tol).count()
        };
        passed &= hits >= 3;
        let shown: Vec<String> = gaps.iter().map(|g| format!("{g:.1}")).collect();
        parts.push(format!("u={u} {method}-{width} gaps/k [{}] {hits}/4", shown.join(",")));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn ac5() -> Outcome {
    let report = reward_ambiguity(&AmbiguityConfig::default()).unwrap();
    let worst: Vec<_> = report.rows().iter().filter(|r| r.method == "worst-case").collect();
    let min_gap = worst.iter().map(|r| r.gap.unwrap()).fold(f64::INFINITY, f64::min);
    // the identity is part of each row's pass flag
    Outcome {
        passed: !worst.is_empty() && report.all_passed(),
        detail: format!("{} policies (h0 in 1,2 x 4 seeds), smallest worst-case gap {min_gap}", worst.len()),
    }
}

fn ac6() -> Outcome {
    let c = build_stitch_counterexample();
    let policy = build_mixture_rc_policy(&c.dataset, 2).unwrap();
    let j = exact_expected_return_rc(&c.mdp, &policy, 2.0).unwrap();
    let p = mixture_act(&policy, &RcHistory::start(0, 2.0)).unwrap()[0];
    Outcome {
        passed: (j - 1.0).abs() <= 1e-12 && j < 2.0 && (p - 0.5).abs() <= 1e-12,
        detail: format!("J(pi, 2) = {j}, P(a_1 | s_1, 2) = {p}"),
    }
}

fn ac7() -> Outcome {
    let cfg = MazeConfig::default();
    let maze = build_grid_maze(cfg.horizon).unwrap();
    let mut filter_ok = true;
    for &seed in &cfg.seeds {
        let d = generate_maze_dataset(&maze, cfg.n_per_script, cfg.n_per_script, seed).unwrap();
        let g_max = d.iter().map(|t| t.total_return()).fold(f64::NEG_INFINITY, f64::max);
        let rep = generate_rollout_dataset(
            &d,
            &fit_tabular_dynamics(&d).unwrap(),
            &fit_tabular_behavior(&d, maze.mdp.n_actions()).unwrap(),
            &RolloutConfig {
                n_target: cfg.n_target,
                max_attempts: cfg.max_attempts,
                rng_seed: seed,
                horizon: cfg.horizon,
            },
        )
        .unwrap();
        filter_ok &= rep.rollout_dataset.iter().all(|t| t.total_return() > g_max);
    }
    let report = mbrcsl_maze(&cfg).unwrap();
    let rets = |m: &str| -> Vec<(f64, f64)> {
        report
            .rows()
            .iter()
            .filter(|r| r.method == m)
            .map(|r| (r.achieved_return.unwrap(), r.g_max.unwrap()))
            .collect()
    };
    let mb = rets("mbrcsl");
    let plain = rets("rcsl");
    let above = mb.iter().filter(|(g, m)| g > m).count();
    let optimal = mb.iter().filter(|(g, _)| (g - 6.0).abs() < 1e-12).count();
    let plain_ok = plain.iter().all(|(g, m)| g <= m);
    Outcome {
        passed: filter_ok && above >= 3 && optimal >= 2 && plain_ok,
        detail: format!(
            "filter sound {filter_ok}; mbrcsl returns {:?} ({above}/4 above max, {optimal}/4 optimal); plain rcsl {:?}",
            mb.iter().map(|x| x.0).collect::<Vec<_>>(),
            plain.iter().map(|x| x.0).collect::<Vec<_>>()
        ),
    }
}

fn max_gradient_error(net: &Mlp2, seed: u64) -> f64 {
    let mut rng = episode_rng(seed, 7);
    let dist = Uniform::new(-1.5, 1.5);
    let xs: Vec<Vec<f64>> =
        (0..4).map(|_| (0..net.in_dim()).map(|_| dist.sample(&mut rng)).collect()).collect();
    let ys: Vec<Vec<f64>> =
        (0..4).map(|_| (0..net.out_dim()).map(|_| dist.sample(&mut rng)).collect()).collect();
    let loss = |n: &Mlp2| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(x, y)| n.forward(x).unwrap().iter().zip(y).map(|(o, t)| (o - t).powi(2)).sum::<f64>())
            .sum()
    };
    let mut grad = net.zeroed();
    let mut cache = ForwardCache::default();
    let mut out = vec![0.0; net.out_dim()];
    for (x, y) in xs.iter().zip(&ys) {
        net.forward_into(x, &mut cache, &mut out);
        let d: Vec<f64> = out.iter().zip(y).map(|(o, t)| 2.0 * (o - t)).collect();
        net.backward(x, &cache, &d, &mut grad);
    }
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (i, g) in grad.params().enumerate() {
        let mut plus = net.clone();
        *plus.params_mut().nth(i).unwrap() += h;
        let mut minus = net.clone();
        *minus.params_mut().nth(i).unwrap() -= h;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
        worst = worst.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-6));
    }
    worst
}

fn ac8() -> Outcome {
    let grad_err = (0..20u64)
        .map(|i| max_gradient_error(&Mlp2::random(3, 4 + (i as usize % 5), 2, 1000 + i), i))
        .fold(0.0f64, f64::max);

    let small = LinearQSimConfig {
        u_list: vec![4],
        ql_widths: vec![WidthSpec::Fixed(8)],
        seeds: vec![0, 1],
        train: TrainConfig { epochs: 30, ..Default::default() },
        ..Default::default()
    };
    let maze = MazeConfig {
        seeds: vec![0, 1],
        train: TrainConfig { epochs: 30, ..Default::default() },
        ..Default::default()
    };
    let reproducible = linearq_sim(&small).unwrap() == linearq_sim(&small).unwrap()
        && mbrcsl_maze(&maze).unwrap() == mbrcsl_maze(&maze).unwrap();

    let mut multiset = true;
    for h0 in [1, 2] {
        let p = build_reward_ambiguity_pair(h0, 1, 1.0, 0.0).unwrap();
        multiset &= build_rtg_dataset(&p.d1).multiset_eq(&build_rtg_dataset(&p.d2));
    }
    Outcome {
        passed: grad_err < 1e-4 && reproducible && multiset,
        detail: format!(
            "max gradient rel. error {grad_err:.2e} over 20 nets; reruns bitwise identical {reproducible}; D1/D2 triples equal {multiset}"
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        check("AC1", "closed-form Q* matches DP", secs(1), ac1),
        check("AC2", "analytic 16-neuron policy", secs(1), ac2),
        check("AC3", "ReLU width certificate", secs(1), ac3),
        check("AC4", "RCSL vs Q-learning on LinearQ", secs(600), ac4),
        check("AC5", "reward ambiguity gap", secs(60), ac5),
        check("AC6", "stitching counterexample", secs(1), ac6),
        check("AC7", "model-based stitching on the maze", secs(300), ac7),
        check("AC8", "numerical hygiene", secs(120), ac8),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
