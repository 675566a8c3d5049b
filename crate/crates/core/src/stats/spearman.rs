use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::seeding::rng_for;

/// Number of shuffles used by the permutation test above the exact limit.
pub const PERMUTATION_RESAMPLES: usize = 100_000;

/// Largest sample size enumerated exactly by the permutation test.
pub const EXACT_PERMUTATION_MAX_N: usize = 10;

/// 1-based ranks with ties sharing the mean of the positions they occupy.
pub fn rank_average(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("x"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("y"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            op: "spearman_rho",
            left: vec![x.len()],
            right: vec![y.len()],
        });
    }
    if x.len() < 3 {
        return Err(Error::Input(format!(
            "spearman_rho needs at least 3 pairs, got {}",
            x.len()
        )));
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(Error::Domain {
            op: "spearman_rho",
            index: i,
            value: f64::NAN,
        });
    }
    pearson(&rank_average(x), &rank_average(y))
}

/// How the two-sided p-value of H0: ρ = 0 is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PValueMethod {
    /// Student-t with n − 2 degrees of freedom.
    #[default]
    TApprox,
    /// Null distribution of ρ over permutations of untied ranks: exact for
    /// n ≤ 10, seeded resampling otherwise.
    Permutation { seed: u64 },
}

/// Two-sided p-value for an observed ρ on `n` pairs.
pub fn spearman_p_value(rho: f64, n: usize, method: PValueMethod) -> Result<f64> {
    if n < 4 {
        return Err(Error::Input(format!("p-value needs n >= 4, got {n}")));
    }
    if !rho.is_finite() || rho.abs() > 1.0 + 1e-12 {
        return Err(Error::Input(format!("rho {rho} outside [-1, 1]")));
    }
    let r = rho.abs().min(1.0);
    match method {
        PValueMethod::TApprox => {
            if r >= 1.0 {
                return Ok(0.0);
            }
            let df = (n - 2) as f64;
            let t = r * (df / (1.0 - r * r)).sqrt();
            let dist = StudentsT::new(0.0, 1.0, df)
                .map_err(|e| Error::Input(format!("student-t: {e}")))?;
            Ok((2.0 * dist.sf(t)).min(1.0))
        }
        PValueMethod::Permutation { seed } => Ok(permutation_p_value(r, n, seed)),
    }
}

/// Σd² threshold: permutations with Σd² ≤ lo or ≥ hi are at least as extreme.
fn extreme_bounds(r: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let scale = nf * (nf * nf - 1.0) / 6.0;
    let tol = 1e-9 * scale;
    ((1.0 - r) * scale + tol, (1.0 + r) * scale - tol)
}

fn sum_sq_diff(perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(i, &p)| {
            let d = i as f64 - p as f64;
            d * d
        })
        .sum()
}

fn permutation_p_value(r: f64, n: usize, seed: u64) -> f64 {
    let (lo, hi) = extreme_bounds(r, n);
    let extreme = |perm: &[usize]| {
        let s = sum_sq_diff(perm);
        s <= lo || s >= hi
    };
    let mut perm: Vec<usize> = (0..n).collect();
    if n <= EXACT_PERMUTATION_MAX_N {
        // Heap's algorithm visits every permutation once.
        let mut hits = u64::from(extreme(&perm));
        let mut total = 1u64;
        let mut c = vec![0usize; n];
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                hits += u64::from(extreme(&perm));
                total += 1;
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        hits as f64 / total as f64
    } else {
        let mut rng = rng_for(seed, &[n as u64]);
        let hits = (0..PERMUTATION_RESAMPLES)
            .filter(|_| {
                perm.shuffle(&mut rng);
                extreme(&perm)
            })
            .count();
        hits as f64 / PERMUTATION_RESAMPLES as f64
    }
}
