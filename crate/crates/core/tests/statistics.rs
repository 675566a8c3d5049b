use std::collections::BTreeMap;
use std::fs::File;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softpg_core::env::{AttributeId, EnvSpec, Environment};
use softpg_core::stats::{
    analyze, read_published, replay, spearman_p_value, spearman_rho, sweep_all, sweep_attribute,
    sweep_grid, sweep_image, Aggregation, PValueMethod, Thresholds, TraversalSweep,
};

/// Average ranks by counting, then Pearson correlation of the ranks.
fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let below = v.iter().filter(|&&b| b < a).count() as f64;
                let equal = v.iter().filter(|&&b| b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
fn spearman_matches_brute_force_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.random_range(3..40);
        let levels = rng.random_range(2..12);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if x.iter().all(|&v| v == x[0]) {
            continue;
        }
        let r = spearman_rho(&x, &y).unwrap();
        assert!((r - brute_spearman(&x, &y)).abs() < 1e-12);
        checked += 1;
    }
}

#[test]
fn t_approximation_tracks_exact_permutation_at_n8() {
    let n = 8;
    let scale = (n * (n * n - 1)) as f64 / 6.0;
    let mut worst: f64 = 0.0;
    for s in (0..=168).step_by(2) {
        let rho = 1.0 - s as f64 / scale;
        let exact = spearman_p_value(rho, n, PValueMethod::Permutation { seed: 0 }).unwrap();
        let approx = spearman_p_value(rho, n, PValueMethod::TApprox).unwrap();
        let gap = (exact - approx).abs();
        worst = worst.max(gap);
        if rho.abs() > 0.05 {
            assert!(gap <= 0.02, "rho {rho}: exact {exact} vs t {approx}");
        }
    }
    assert!(worst <= 0.025, "worst gap {worst}");
}

#[test]
fn exact_permutation_hits_known_tail_counts() {
    // n = 4: 24 permutations; only the identity and its reverse reach |ρ| = 1
    let p = spearman_p_value(1.0, 4, PValueMethod::Permutation { seed: 0 }).unwrap();
    assert!((p - 2.0 / 24.0).abs() < 1e-15);
    let p = spearman_p_value(0.0, 6, PValueMethod::Permutation { seed: 0 }).unwrap();
    assert_eq!(p, 1.0);
}

fn published() -> Vec<softpg_core::stats::CorrelationReport> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/published_correlations.csv");
    read_published(File::open(path).unwrap()).unwrap()
}

fn row(rows: &[softpg_core::stats::CorrelationReport], layer: usize, dim: usize) -> f64 {
    rows.iter()
        .find(|r| r.attribute == AttributeId::new(layer, dim))
        .unwrap()
        .rho
}

#[test]
fn published_p_values_are_reproduced_by_pooled_sample_size() {
    let rows = published();
    let n = 30 * 19;
    let p35 = spearman_p_value(row(&rows, 3, 5), n, PValueMethod::TApprox).unwrap();
    assert!((p35 - 2.875e-3).abs() / 2.875e-3 < 0.05, "{p35}");
    let p54 = spearman_p_value(row(&rows, 5, 4), n, PValueMethod::TApprox).unwrap();
    assert!((p54 - 0.1484).abs() / 0.1484 < 0.05, "{p54}");
    // the published 0.1551 for ρ = 0.027 does not follow from n = 570;
    // either way the attribute is not significant
    let p43 = spearman_p_value(row(&rows, 4, 3), n, PValueMethod::TApprox).unwrap();
    assert!(p43 > 0.01);
}

#[test]
fn replay_keeps_the_headline_attributes() {
    let out = replay(published(), &Thresholds::default());
    let selected: Vec<String> = out
        .iter()
        .filter(|r| r.selected)
        .map(|r| format!("z{}_{}", r.attribute.layer, r.attribute.dim))
        .collect();
    for want in ["z2_5", "z3_4", "z4_4", "z5_5", "z5_6"] {
        assert!(selected.iter().any(|s| s == want), "{want} missing from {selected:?}");
    }
    // duplicates by label keep the stronger attribute
    assert!(selected.iter().any(|s| s == "z5_3"));
    assert!(!selected.iter().any(|s| s == "z5_2" || s == "z4_3" || s == "z5_1"));
    assert!(!selected.iter().any(|s| s == "z3_5"));
}

#[test]
fn sweep_equals_a_direct_loop() {
    let env = Environment::<f64>::from_spec(&EnvSpec::default()).unwrap();
    let attr = AttributeId::new(2, 3);
    let sweep = sweep_attribute(&env, attr, 4, 77).unwrap();
    assert_eq!(sweep.grid, sweep_grid());
    assert_eq!(sweep.grid.len(), 19);
    assert_eq!(sweep.grid[0], -4.5);
    assert_eq!(sweep.grid[18], 4.5);
    for i in 0..4 {
        let (eps, mut y) = sweep_image(&env, 77, i);
        for (j, &v) in sweep.grid.iter().enumerate() {
            y[attr.flat_index(6)] = v;
            let s = env.score(&env.generate(&eps, &y).unwrap()).unwrap();
            assert_eq!(sweep.scores[i][j], s);
        }
    }
    let all = sweep_all(&env, 2, 77).unwrap();
    assert_eq!(all.len(), 36);
    assert_eq!(all[0].attribute, AttributeId::new(1, 1));
    assert_eq!(all[35].attribute, AttributeId::new(6, 6));
    assert_eq!(all[8].scores, sweep_attribute(&env, all[8].attribute, 2, 77).unwrap().scores);
}

#[test]
fn trend_only_scorer_gives_perfect_per_image_correlation() {
    let spec = EnvSpec {
        bandwidth: 1e6,
        monotone_scale: Some(0.3),
        ..EnvSpec::default()
    };
    let env = Environment::<f64>::from_spec(&spec).unwrap();
    let sweep = sweep_attribute(&env, AttributeId::new(4, 2), 5, 1).unwrap();
    let t = Thresholds {
        aggregation: Aggregation::PerImageMean,
        ..Thresholds::default()
    };
    let rows = analyze(&[sweep], &BTreeMap::new(), &t).unwrap();
    assert!((rows[0].rho.abs() - 1.0).abs() < 1e-12, "{}", rows[0].rho);
    assert!(rows[0].selected);
}

#[test]
fn constructed_monotone_sweep_is_selected_and_flat_one_is_not() {
    let grid = sweep_grid();
    let rising: Vec<Vec<f64>> = (0..3)
        .map(|i| grid.iter().map(|g| 0.5 + 0.05 * g + 0.01 * i as f64).collect())
        .collect();
    let flat = vec![vec![0.4; 19]; 3];
    let sweeps = vec![
        TraversalSweep::new(AttributeId::new(1, 1), grid.clone(), rising).unwrap(),
        TraversalSweep::new(AttributeId::new(1, 2), grid.clone(), flat).unwrap(),
    ];
    let rows = analyze(&sweeps, &BTreeMap::new(), &Thresholds::default()).unwrap();
    assert!(rows[0].rho > 0.9 && rows[0].selected);
    assert_eq!((rows[1].rho, rows[1].p_value, rows[1].selected), (0.0, 1.0, false));
}

proptest! {
    #[test]
    fn spearman_is_invariant_under_monotone_maps(
        pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3..30)
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0]));
        let r = spearman_rho(&x, &y).unwrap();
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let expd: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        prop_assert!((spearman_rho(&cubed, &expd).unwrap() - r).abs() < 1e-12);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((spearman_rho(&x, &neg).unwrap() + r).abs() < 1e-12);
    }
}
