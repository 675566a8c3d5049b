use crate::diffcore::{sigmoid, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Synthetic aesthetics score with a known optimum.
///
/// `score = exp(−‖P·obs − t‖² / (2h²)) · σ(w·(P·obs))`, the sigmoid factor
/// present only when `monotone_weights` is set.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScorer<T> {
    pub probe: Tensor<T>,
    pub target: Vec<T>,
    pub bandwidth: T,
    pub monotone_weights: Option<Vec<T>>,
}

impl<T: Scalar> SyntheticScorer<T> {
    pub fn new(
        probe: Tensor<T>,
        target: Vec<T>,
        bandwidth: T,
        monotone_weights: Option<Vec<T>>,
    ) -> Result<Self> {
        if probe.rank() != 2 || probe.rows() != target.len() {
            return Err(Error::Dimension {
                op: "scorer",
                left: probe.shape().to_vec(),
                right: vec![target.len()],
            });
        }
        if let Some(w) = &monotone_weights {
            if w.len() != target.len() {
                return Err(Error::Dimension {
                    op: "scorer",
                    left: vec![target.len()],
                    right: vec![w.len()],
                });
            }
        }
        if bandwidth.is_nan() || bandwidth <= T::zero() {
            return Err(Error::Config("scorer bandwidth must be positive".into()));
        }
        Ok(Self {
            probe,
            target,
            bandwidth,
            monotone_weights,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.probe.cols()
    }

    pub fn score(&self, obs: &[T]) -> Result<T> {
        let proj = self.probe.matvec(obs)?;
        let d2: T = proj
            .iter()
            .zip(&self.target)
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum();
        let two = T::lit(2.0);
        let gauss = (-d2 / (two * self.bandwidth * self.bandwidth)).exp();
        Ok(match &self.monotone_weights {
            Some(w) => {
                let trend: T = w.iter().zip(&proj).map(|(&a, &b)| a * b).sum();
                gauss * sigmoid(trend)
            }
            None => gauss,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scorer(bandwidth: f64) -> SyntheticScorer<f64> {
        let probe = Tensor::matrix(2, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        SyntheticScorer::new(probe, vec![1.0, -1.0], bandwidth, None).unwrap()
    }

    #[test]
    fn peak_is_one() {
        assert_eq!(scorer(0.7).score(&[1.0, -0.5, -0.5]).unwrap(), 1.0);
    }

    #[test]
    fn wide_bandwidth_tends_to_one() {
        let obs = [3.0, 2.0, -7.0];
        let mut prev = 0.0;
        for h in [1.0, 10.0, 100.0, 1e4, 1e8] {
            let s = scorer(h).score(&obs).unwrap();
            assert!(s > prev && s <= 1.0);
            prev = s;
        }
        assert!(1.0 - prev < 1e-12);
    }

    #[test]
    fn monotone_factor_halves_at_zero_projection() {
        let probe = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let s = SyntheticScorer::new(probe, vec![0.0], 1.0, Some(vec![2.0])).unwrap();
        assert_eq!(s.score(&[0.0]).unwrap(), 0.5);
        assert!(s.score(&[0.1]).unwrap() > s.score(&[-0.1]).unwrap());
    }

    #[test]
    fn rejects_bad_configuration() {
        let probe = Tensor::<f64>::zeros(&[2, 3]);
        assert!(SyntheticScorer::new(probe.clone(), vec![0.0], 1.0, None).is_err());
        assert!(SyntheticScorer::new(probe.clone(), vec![0.0; 2], 0.0, None).is_err());
        assert!(SyntheticScorer::new(probe, vec![0.0; 2], 1.0, Some(vec![1.0])).is_err());
    }
}
