use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Subspace model `(U, L, μ)` of one generator layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceLayer<T> {
    /// `D × q`, orthonormal columns.
    pub basis: Tensor<T>,
    /// Non-negative importance of each column.
    pub importance: Vec<T>,
    /// Origin, length `D`.
    pub origin: Vec<T>,
}

impl<T: Scalar> SubspaceLayer<T> {
    pub fn new(basis: Tensor<T>, importance: Vec<T>, origin: Vec<T>) -> Result<Self> {
        if basis.rank() != 2 || basis.cols() != importance.len() || basis.rows() != origin.len() {
            return Err(Error::Dimension {
                op: "subspace_layer",
                left: basis.shape().to_vec(),
                right: vec![importance.len(), origin.len()],
            });
        }
        if let Some(i) = importance.iter().position(|&l| l < T::zero()) {
            return Err(Error::Domain {
                op: "importance",
                index: i,
                value: importance[i].as_f64(),
            });
        }
        Ok(Self {
            basis,
            importance,
            origin,
        })
    }

    /// Largest entry of `|UᵀU − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let (d, q) = (self.basis.rows(), self.basis.cols());
        let mut worst = 0.0f64;
        for i in 0..q {
            for j in 0..q {
                let dot: f64 = (0..d)
                    .map(|r| self.basis.at(r, i).as_f64() * self.basis.at(r, j).as_f64())
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Orthonormalizes the columns of a seeded Gaussian `rows × cols` matrix by
/// modified Gram–Schmidt with one re-orthogonalization pass.
pub fn random_orthonormal(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while columns.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for c in &columns {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            columns.push(v);
        }
    }
    columns
}

/// Linear generator: `obs = B·ε + Σᵢ (Uᵢ·(Lᵢ ∘ zᵢ) + μᵢ)` where `y` is the
/// concatenation of the per-layer latents `zᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceGenerator<T> {
    pub layers: Vec<SubspaceLayer<T>>,
    /// `D × E` map applied to ε.
    pub base_map: Tensor<T>,
}

impl<T: Scalar> SubspaceGenerator<T> {
    pub fn new(layers: Vec<SubspaceLayer<T>>, base_map: Tensor<T>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Contract("generator needs at least one layer".into()))?;
        let (d, q) = (first.basis.rows(), first.basis.cols());
        for l in &layers {
            if l.basis.rows() != d || l.basis.cols() != q {
                return Err(Error::Dimension {
                    op: "generator",
                    left: vec![d, q],
                    right: l.basis.shape().to_vec(),
                });
            }
        }
        if base_map.rank() != 2 || base_map.rows() != d {
            return Err(Error::Dimension {
                op: "generator",
                left: vec![d],
                right: base_map.shape().to_vec(),
            });
        }
        Ok(Self { layers, base_map })
    }

    pub fn obs_dim(&self) -> usize {
        self.base_map.rows()
    }

    pub fn eps_dim(&self) -> usize {
        self.base_map.cols()
    }

    pub fn dims_per_layer(&self) -> usize {
        self.layers[0].basis.cols()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers.len() * self.dims_per_layer()
    }

    pub fn generate(&self, epsilon: &[T], y: &[T]) -> Result<Vec<T>> {
        if epsilon.len() != self.eps_dim() || y.len() != self.latent_dim() {
            return Err(Error::Dimension {
                op: "generate",
                left: vec![self.eps_dim(), self.latent_dim()],
                right: vec![epsilon.len(), y.len()],
            });
        }
        let mut obs = self.base_map.matvec(epsilon)?;
        let q = self.dims_per_layer();
        for (layer, z) in self.layers.iter().zip(y.chunks_exact(q)) {
            let cols = layer.basis.cols();
            let coeff: Vec<T> = z.iter().zip(&layer.importance).map(|(&a, &b)| a * b).collect();
            for (r, o) in obs.iter_mut().enumerate() {
                let row = &layer.basis.data()[r * cols..(r + 1) * cols];
                let s: T = row.iter().zip(&coeff).map(|(&u, &c)| u * c).sum();
                *o += s + layer.origin[r];
            }
        }
        Ok(obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gram_schmidt_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cols = random_orthonormal(&mut rng, 64, 6);
        let mut flat = vec![0.0; 64 * 6];
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                flat[i * 6 + j] = *v;
            }
        }
        let layer =
            SubspaceLayer::new(Tensor::matrix(64, 6, flat).unwrap(), vec![1.0; 6], vec![0.0; 64])
                .unwrap();
        assert!(layer.orthonormality_error() <= 1e-10);
    }

    #[test]
    fn negative_importance_rejected() {
        let r = SubspaceLayer::new(Tensor::<f64>::zeros(&[3, 1]), vec![-1.0], vec![0.0; 3]);
        assert!(matches!(r, Err(Error::Domain { .. })));
    }
}
