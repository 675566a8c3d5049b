use softpg_core::agent::{sample_categorical, sample_trajectories, Checkpoint, PolicyConfig, PolicyParams};
use softpg_core::diffcore::Tape;
use softpg_core::env::{EnvSpec, Environment};
use softpg_core::nn::{flatten, ParamLayout};
use softpg_core::seeding::rng_for;
use softpg_core::trainer::entropy_of;

fn env() -> Environment<f64> {
    Environment::from_spec(&EnvSpec::default()).unwrap()
}

#[test]
fn categorical_frequencies_within_three_sigma() {
    let probs = [0.05, 0.1, 0.2, 0.3, 0.15, 0.2];
    let n = 200_000;
    let mut counts = [0usize; 6];
    let mut rng = rng_for(17, &[]);
    for _ in 0..n {
        counts[sample_categorical(&probs, &mut rng)] += 1;
    }
    for (c, p) in counts.iter().zip(probs) {
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((*c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn zero_head_starts_uniform() {
    let env = env();
    let params = PolicyParams::<f64>::init(64, 17, &PolicyConfig::desk(), 3).unwrap();
    let start = env.sample_episode(&mut rng_for(0, &[])).unwrap();
    let probs = params.first_step_probs(&env, &start).unwrap();
    assert!(probs.iter().all(|p| (p - 1.0 / 17.0).abs() < 1e-15));
    assert!((entropy_of(&probs) - 17f64.ln()).abs() < 1e-12);
}

#[test]
fn init_weights_follow_fan_in_bounds() {
    let cfg = PolicyConfig {
        zero_head: false,
        ..PolicyConfig::desk()
    };
    let params = PolicyParams::<f64>::init(64, 17, &cfg, 11).unwrap();
    let layout = ParamLayout::of(&params);
    let flat = flatten(&params);
    for block in &layout.blocks {
        let values = &flat[block.offset..block.offset + block.len];
        if block.shape.len() == 1 {
            assert!(values.iter().all(|&v| v == 0.0), "{} should start at zero", block.name);
            continue;
        }
        let bound = 1.0 / (block.shape[1] as f64).sqrt();
        assert!(values.iter().all(|v| v.abs() <= bound), "{}", block.name);
        // uniform on ±bound has variance bound²/3
        let var = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
        let expected = bound * bound / 3.0;
        let se = expected * (0.8f64 / values.len() as f64).sqrt();
        assert!((var - expected).abs() < 4.0 * se, "{}: {var} vs {expected}", block.name);
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let cfg = PolicyConfig {
        zero_head: false,
        ..PolicyConfig::desk()
    };
    let params = PolicyParams::<f64>::init(64, 17, &cfg, 5).unwrap();
    let ck = Checkpoint::capture(&params, &cfg, serde_json::json!({"note": 1}), 5, 12);
    let text = ck.to_json().unwrap();
    let back = Checkpoint::from_json(&text).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_json().unwrap(), text);
    assert_eq!(back.restore::<f64>().unwrap(), params);
}

#[test]
fn checkpoint_with_missing_block_is_rejected() {
    let cfg = PolicyConfig::desk();
    let params = PolicyParams::<f64>::init(64, 17, &cfg, 5).unwrap();
    let mut ck = Checkpoint::capture(&params, &cfg, serde_json::Value::Null, 5, 0);
    ck.params.remove("h0");
    assert!(ck.restore::<f64>().is_err());
    let mut ck = Checkpoint::capture(&params, &cfg, serde_json::Value::Null, 5, 0);
    ck.params.get_mut("h0").unwrap().push(0.0);
    assert!(ck.restore::<f64>().is_err());
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let env = env();
    let cfg = PolicyConfig {
        zero_head: false,
        ..PolicyConfig::desk()
    };
    let params = PolicyParams::<f64>::init(64, 17, &cfg, 2).unwrap();
    let run = |seed: u64| {
        let mut rng = rng_for(seed, &[]);
        let start = env.sample_episode(&mut rng).unwrap();
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        sample_trajectories(&mut tape, &bound, &env, &start, 5, &mut rng)
            .unwrap()
            .into_iter()
            .map(|t| (t.actions, t.reward))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(8), run(8));
    assert_ne!(run(8), run(9));
}

#[test]
fn trajectories_record_consistent_log_probs_and_rewards() {
    let env = env();
    let cfg = PolicyConfig {
        zero_head: false,
        ..PolicyConfig::desk()
    };
    let params = PolicyParams::<f64>::init(64, 17, &cfg, 4).unwrap();
    let mut rng = rng_for(1, &[]);
    let start = env.sample_episode(&mut rng).unwrap();
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let trajs = sample_trajectories(&mut tape, &bound, &env, &start, 4, &mut rng).unwrap();
    for t in &trajs {
        assert_eq!(t.len(), 2);
        for (&node, &v) in t.log_probs.iter().zip(&t.log_prob_values) {
            assert_eq!(tape.value(node).data()[0], v);
            assert!(v <= 0.0);
        }
        let mut ep = start.clone();
        for &a in &t.actions {
            ep = ep.rollout_step(env.actions().value_f64(a).unwrap()).unwrap();
        }
        assert_eq!(ep.y, t.final_y);
        assert_eq!(env.terminal_reward(&ep).unwrap(), t.reward);
        assert!(t.entropies.iter().all(|&h| h > 0.0 && h <= 17f64.ln() + 1e-12));
    }
    assert!(sample_trajectories(&mut tape, &bound, &env, &start, 1, &mut rng).is_err());
}

#[test]
fn greedy_rollout_is_deterministic() {
    let env = env();
    let cfg = PolicyConfig {
        zero_head: false,
        ..PolicyConfig::desk()
    };
    let params = PolicyParams::<f64>::init(64, 17, &cfg, 4).unwrap();
    let start = env.sample_episode(&mut rng_for(2, &[])).unwrap();
    let a = params.greedy(&env, &start).unwrap();
    let b = params.greedy(&env, &start).unwrap();
    assert_eq!(a.actions, b.actions);
    assert_eq!(a.reward, b.reward);
}
