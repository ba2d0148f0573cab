//! Principal component analysis fitted on a training split.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// All `d` covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

/// Top-`k` eigenvectors of the `1/N` covariance. Each component's
/// largest-magnitude entry is made positive.
pub fn pca_fit(train: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = train.len();
    if n == 0 {
        return Err(Error::Data("PCA on an empty training set".into()));
    }
    let d = train[0].len();
    if let Some(bad) = train.iter().find(|v| v.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: bad.len(),
        });
    }
    if k == 0 || k > d {
        return Err(Error::config("k", format!("must lie in 1..={d}, got {k}")));
    }
    let mut mean = vec![0.0; d];
    for v in train {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| train[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let components = order[..k]
        .iter()
        .map(|&i| {
            let mut c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let s = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.iter_mut().for_each(|x| *x /= s);
            let pivot = c.iter().copied().fold(
                0.0f64,
                |best, x| if x.abs() > best.abs() { x } else { best },
            );
            if pivot < 0.0 {
                c.iter_mut().for_each(|x| *x = -*x);
            }
            c
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `components · (x − mean)`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x)
                    .zip(&self.mean)
                    .map(|((w, xi), m)| w * (xi - m))
                    .sum()
            })
            .collect())
    }

    /// `mean + componentsᵀ · z`.
    pub fn inverse_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.k() {
            return Err(Error::Dimension {
                expected: self.k(),
                got: z.len(),
            });
        }
        let mut out = self.mean.clone();
        for (c, &zi) in self.components.iter().zip(z) {
            out.iter_mut().zip(c).for_each(|(o, w)| *o += zi * w);
        }
        Ok(out)
    }
}

/// Per-feature affine map of the training range onto `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(train: &[Vec<f64>]) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::Data("scaler on an empty training set".into()))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for v in train {
            if v.len() != min.len() {
                return Err(Error::Dimension {
                    expected: min.len(),
                    got: v.len(),
                });
            }
            for (j, &x) in v.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(MinMaxScaler { min, max })
    }

    pub fn transform(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (0..d)
                    .map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64 + j as f64)
                    .collect()
            })
            .collect()
    }

    fn reconstruction_error(m: &PcaModel, data: &[Vec<f64>]) -> f64 {
        data.iter()
            .map(|x| {
                let r = m.inverse_transform(&m.transform(x).unwrap()).unwrap();
                r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / data.len() as f64
    }

    #[test]
    fn mean_maps_to_zero() {
        let data = cloud(50, 6, 1);
        let m = pca_fit(&data, 3).unwrap();
        let z = m.transform(&m.mean).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn components_are_orthonormal_with_sign_convention() {
        let data = cloud(80, 7, 2);
        let m = pca_fit(&data, 7).unwrap();
        for (a, ca) in m.components.iter().enumerate() {
            for (b, cb) in m.components.iter().enumerate() {
                let dot: f64 = ca.iter().zip(cb).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8);
            }
            let pivot = ca
                .iter()
                .copied()
                .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(pivot > 0.0);
        }
        assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn reconstruction_error_is_discarded_variance() {
        let data = cloud(120, 8, 3);
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let m = pca_fit(&data, k).unwrap();
            let err = reconstruction_error(&m, &data);
            let discarded: f64 = m.eigenvalues[k..].iter().sum();
            assert!(
                (err - discarded).abs() < 1e-6,
                "k={k}: {err} vs {discarded}"
            );
            assert!(err <= prev + 1e-12);
            prev = err;
        }
    }

    #[test]
    fn bad_arguments_are_errors() {
        let data = cloud(10, 4, 0);
        assert!(pca_fit(&data, 5).is_err());
        assert!(pca_fit(&data, 0).is_err());
        assert!(pca_fit(&[], 1).is_err());
        let m = pca_fit(&data, 2).unwrap();
        assert!(m.transform(&[0.0; 3]).is_err());
    }

    #[test]
    fn scaler_maps_training_range_to_unit_interval() {
        let data = vec![vec![-2.0, 5.0], vec![2.0, 5.0], vec![0.0, 5.0]];
        let s = MinMaxScaler::fit(&data).unwrap();
        assert_eq!(s.transform(&data[0]), vec![0.0, 0.0]);
        assert_eq!(s.transform(&data[1]), vec![1.0, 0.0]);
        assert_eq!(s.transform(&data[2]), vec![0.5, 0.0]);
    }
}
