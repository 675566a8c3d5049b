use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamLayout;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }
}

/// Bias-corrected Adam update without weight decay. Non-finite gradients
/// abort before anything is modified; the error names the offending block
/// when `layout` covers it.
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
    layout: Option<&ParamLayout>,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::Dimension {
            op: "adam_step",
            left: vec![params.len(), state.m.len()],
            right: vec![grads.len()],
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        let name = layout
            .and_then(|l| l.block_of(i))
            .map(|b| b.name.clone())
            .unwrap_or_else(|| format!("param[{i}]"));
        return Err(Error::NonFiniteGradient(name));
    }
    state.t += 1;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let one = T::one();
    let t = state.t as i32;
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, &AdamConfig::default(), None).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig {
            lr: 0.01,
            eps: 0.0,
            ..AdamConfig::default()
        };
        let mut p = vec![0.0f64, 0.0, 0.0];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[3.0, -0.2, 1e-4], &mut s, &cfg, None).unwrap();
        for (x, expected) in p.iter().zip([-0.01, 0.01, -0.01]) {
            assert!((x - expected).abs() < 1e-15, "{x}");
        }
    }

    #[test]
    fn minimizes_square() {
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut x = vec![1.0f64];
        let mut s = AdamState::new(1);
        for _ in 0..100 {
            let g = 2.0 * x[0];
            adam_step(&mut x, &[g], &mut s, &cfg, None).unwrap();
        }
        assert!(x[0].abs() < 0.1, "{}", x[0]);
    }

    #[test]
    fn nan_gradient_names_block_and_changes_nothing() {
        let layout = ParamLayout {
            blocks: vec![
                crate::nn::ParamBlock {
                    name: "a".into(),
                    shape: vec![1],
                    offset: 0,
                    len: 1,
                },
                crate::nn::ParamBlock {
                    name: "gru.w_hn".into(),
                    shape: vec![1],
                    offset: 1,
                    len: 1,
                },
            ],
        };
        let mut p = vec![1.0, 1.0];
        let mut s = AdamState::new(2);
        let err = adam_step(&mut p, &[0.5, f64::NAN], &mut s, &AdamConfig::default(), Some(&layout))
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "gru.w_hn"));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(s.t, 0);
    }
}
