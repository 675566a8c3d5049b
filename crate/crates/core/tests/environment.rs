use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softpg_core::env::{
    grid_optimum, AttributeId, AttributeSchedule, EnvSpec, Environment, Episode, SyntheticScorer,
};

fn desk_env() -> Environment<f64> {
    Environment::from_spec(&EnvSpec::default()).unwrap()
}

fn start(env: &Environment<f64>, seed: u64) -> Episode<f64> {
    env.sample_episode(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn generator_at_origin_is_sum_of_layer_origins() {
    let env = desk_env();
    let g = env.generator();
    let obs = g.generate(&vec![0.0; g.eps_dim()], &vec![0.0; g.latent_dim()]).unwrap();
    for (r, o) in obs.iter().enumerate() {
        let expected: f64 = g.layers.iter().map(|l| l.origin[r]).sum();
        assert!((o - expected).abs() < 1e-12);
    }
}

#[test]
fn generator_is_affine() {
    let env = desk_env();
    let g = env.generator();
    let (e, n) = (g.eps_dim(), g.latent_dim());
    let zero = g.generate(&vec![0.0; e], &vec![0.0; n]).unwrap();
    let ea: Vec<f64> = (0..e).map(|i| (i as f64 * 0.7).sin()).collect();
    let eb: Vec<f64> = (0..e).map(|i| (i as f64 * 1.3).cos()).collect();
    let ya: Vec<f64> = (0..n).map(|i| (i as f64 * 0.4).sin()).collect();
    let yb: Vec<f64> = (0..n).map(|i| 0.5 - (i % 5) as f64 * 0.2).collect();
    let sum = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
    let fa = g.generate(&ea, &ya).unwrap();
    let fb = g.generate(&eb, &yb).unwrap();
    let fab = g.generate(&sum(&ea, &eb), &sum(&ya, &yb)).unwrap();
    for i in 0..fa.len() {
        let lhs = fab[i] - zero[i];
        let rhs = (fa[i] - zero[i]) + (fb[i] - zero[i]);
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

#[test]
fn moving_one_attribute_moves_along_its_basis_column() {
    let env = desk_env();
    let g = env.generator();
    let attr = AttributeId::new(3, 4);
    let layer = &g.layers[attr.layer - 1];
    let column = layer.basis.column(attr.dim - 1);
    let scale = layer.importance[attr.dim - 1];
    let ep = start(&env, 1);
    let mut moved = ep.y.clone();
    let delta = 1.75;
    moved[attr.flat_index(6)] += delta;
    let before = g.generate(&ep.epsilon, &ep.y).unwrap();
    let after = g.generate(&ep.epsilon, &moved).unwrap();
    let diff: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    assert!((dot(&diff, &column) - delta * scale).abs() < 1e-12);
    // nothing leaks outside that column
    for (d, c) in diff.iter().zip(&column) {
        assert!((d - delta * scale * c).abs() < 1e-12);
    }
    for (j, other) in layer.basis.transpose().data().chunks(layer.basis.rows()).enumerate() {
        if j != attr.dim - 1 {
            assert!(dot(&diff, other).abs() < 1e-12);
        }
    }
}

/// Straight reimplementation of the scorer from its definition.
fn reference_score(s: &SyntheticScorer<f64>, obs: &[f64]) -> f64 {
    let mut d2 = 0.0;
    let mut trend = 0.0;
    for r in 0..s.probe.rows() {
        let mut p = 0.0;
        for (c, &o) in obs.iter().enumerate() {
            p += s.probe.at(r, c) * o;
        }
        d2 += (p - s.target[r]).powi(2);
        if let Some(w) = &s.monotone_weights {
            trend += w[r] * p;
        }
    }
    let gauss = (-d2 / (2.0 * s.bandwidth * s.bandwidth)).exp();
    match s.monotone_weights {
        Some(_) => gauss / (1.0 + (-trend).exp()),
        None => gauss,
    }
}

#[test]
fn scorer_matches_reference_and_stays_in_unit_interval() {
    let env = desk_env();
    for seed in 0..50 {
        let ep = start(&env, seed);
        let obs = env.observe(&ep).unwrap();
        let s = env.score(&obs).unwrap();
        assert!((s - reference_score(env.scorer(), &obs)).abs() < 1e-14);
        assert!((0.0..=1.0).contains(&s));
    }
}

#[test]
fn rollout_touches_only_the_scheduled_coordinate() {
    let env = desk_env();
    let ep = start(&env, 4);
    let slots = ep.scheduled_indices();
    assert_eq!(slots, vec![2 * 6 + 3, 3 * 6 + 4]);
    assert!(slots.iter().all(|&i| ep.y[i] == 0.0));
    let one = ep.rollout_step(1.5).unwrap();
    let two = one.rollout_step(-3.0).unwrap();
    assert!(two.is_terminal());
    for i in 0..ep.y.len() {
        let expected = match i {
            15 => 1.5,
            22 => -3.0,
            _ => ep.y[i],
        };
        assert_eq!(two.y[i], expected);
    }
    assert_eq!(two.epsilon, ep.epsilon);
    assert!(two.rollout_step(0.0).is_err());
    assert!(env.terminal_reward(&one).is_err());
    assert!(ep.rollout_step(4.6).is_err());
}

#[test]
fn oracle_equals_brute_force() {
    let env = desk_env();
    let grid = env.actions().values();
    for seed in 0..3 {
        let ep = start(&env, seed);
        let best = grid_optimum(&env, &ep).unwrap();
        assert_eq!(best.evaluations, 289);
        let mut brute = f64::NEG_INFINITY;
        for &a in &grid {
            for &b in &grid {
                let r = env
                    .terminal_reward(&ep.rollout_step(a).unwrap().rollout_step(b).unwrap())
                    .unwrap();
                brute = brute.max(r);
            }
        }
        assert_eq!(best.best_score, brute);
        let replay = ep
            .rollout_step(best.values[0])
            .unwrap()
            .rollout_step(best.values[1])
            .unwrap();
        assert_eq!(env.terminal_reward(&replay).unwrap(), brute);
    }
}

#[test]
fn single_attribute_oracle_takes_seventeen_evaluations() {
    let spec = EnvSpec {
        schedule: AttributeSchedule::new(vec![AttributeId::new(3, 4)]).unwrap(),
        ..EnvSpec::default()
    };
    let env = Environment::<f64>::from_spec(&spec).unwrap();
    assert_eq!(grid_optimum(&env, &start(&env, 0)).unwrap().evaluations, 17);
}

#[test]
fn reward_does_not_depend_on_decision_order() {
    let env = desk_env();
    let swapped = env
        .with_schedule(AttributeSchedule::new(vec![AttributeId::new(4, 5), AttributeId::new(3, 4)]).unwrap())
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ep = env.sample_episode(&mut rng).unwrap();
    let other = Episode::new(ep.epsilon.clone(), ep.y.clone(), swapped.schedule().clone(), 6).unwrap();
    for (a, b) in [(-4.5, 3.0), (0.0, 0.0), (2.5, -1.0)] {
        let r1 = env.terminal_reward(&ep.rollout_step(a).unwrap().rollout_step(b).unwrap()).unwrap();
        let r2 = swapped
            .terminal_reward(&other.rollout_step(b).unwrap().rollout_step(a).unwrap())
            .unwrap();
        assert_eq!(r1, r2);
    }
}

#[test]
fn coordinate_ascent_never_beats_the_oracle() {
    let env = desk_env();
    let grid = env.actions().values();
    for seed in 0..10 {
        let ep = start(&env, 100 + seed);
        let oracle = grid_optimum(&env, &ep).unwrap().best_score;
        let reward = |a: usize, b: usize| {
            env.terminal_reward(&ep.rollout_step(grid[a]).unwrap().rollout_step(grid[b]).unwrap())
                .unwrap()
        };
        let (mut a, mut b) = (seed as usize % 17, (3 * seed as usize) % 17);
        let mut current = reward(a, b);
        loop {
            let mut improved = false;
            for i in 0..17 {
                for (na, nb) in [(i, b), (a, i)] {
                    let r = reward(na, nb);
                    if r > current {
                        (a, b, current, improved) = (na, nb, r, true);
                    }
                }
            }
            if !improved {
                break;
            }
        }
        assert!(current <= oracle);
    }
}

#[test]
fn constructed_peak_on_grid_scores_exactly_one() {
    let spec = EnvSpec {
        monotone_scale: None,
        ..EnvSpec::default()
    };
    let base = Environment::<f64>::from_spec(&spec).unwrap();
    let ep = start(&base, 21);
    let peak = ep.rollout_step(1.6875).unwrap().rollout_step(-2.25).unwrap();
    let probe = base.scorer().probe.clone();
    let target = probe.matvec(&base.observe(&peak).unwrap()).unwrap();
    let scorer = SyntheticScorer::new(probe, target, 4.0, None).unwrap();
    let env = Environment::from_parts(spec, base.generator().clone(), scorer).unwrap();
    let best = grid_optimum(&env, &ep).unwrap();
    assert_eq!(best.values, vec![1.6875, -2.25]);
    assert!((best.best_score - 1.0).abs() < 1e-12);
}

#[test]
fn oracle_rejects_long_schedules() {
    let attrs = (1..=5).map(|d| AttributeId::new(1, d)).collect();
    let spec = EnvSpec {
        schedule: AttributeSchedule::new(attrs).unwrap(),
        ..EnvSpec::default()
    };
    let env = Environment::<f64>::from_spec(&spec).unwrap();
    assert!(grid_optimum(&env, &start(&env, 0)).is_err());
}

#[test]
fn fixture_json_round_trips() {
    let spec = EnvSpec::default();
    let text = spec.to_json().unwrap();
    let back = EnvSpec::from_json(&text).unwrap();
    assert_eq!(back, spec);
    assert_eq!(back.to_json().unwrap(), text);
    let a = Environment::<f64>::from_spec(&spec).unwrap();
    let b = Environment::<f64>::from_spec(&back).unwrap();
    assert_eq!(a.generator(), b.generator());
    assert_eq!(a.scorer(), b.scorer());
}
