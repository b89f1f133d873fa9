//! Principal component analysis by eigendecomposition of the sample covariance.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal basis vectors, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Covariance eigenvalue of each retained component.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

/// Keeps the fewest leading components whose cumulative variance share
/// reaches `variance_target`.
pub fn fit_pca(data: &[Vec<f64>], variance_target: f64) -> Result<PcaModel> {
    if data.len() < 2 {
        return Err(Error::config("PCA needs at least two samples"));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::config(format!("variance target must lie in (0,1], got {variance_target}")));
    }
    let dim = data[0].len();
    if let Some(bad) = data.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in data {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    // constant columns form a zero block of the covariance; decomposing only
    // the varying ones is exact and keeps the eigensolver off degenerate input
    let live: Vec<usize> = (0..dim).filter(|&j| data.iter().any(|x| x[j] != data[0][j])).collect();
    let centered = DMatrix::from_fn(data.len(), live.len(), |i, j| data[i][live[j]] - mean[live[j]]);
    let cov = (centered.transpose() * &centered) / (n - 1.0);
    let (mut basis, mut values) = (Vec::new(), Vec::new());
    if !live.is_empty() {
        let eig = SymmetricEigen::new(cov);
        if eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("PCA eigendecomposition did not produce finite values"));
        }
        let mut order: Vec<usize> = (0..live.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for i in order {
            let mut v = vec![0.0; dim];
            for (r, &j) in live.iter().enumerate() {
                v[j] = eig.eigenvectors[(r, i)];
            }
            basis.push(v);
            values.push(eig.eigenvalues[i].max(0.0));
        }
    }
    for j in (0..dim).filter(|j| !live.contains(j)) {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        basis.push(e);
        values.push(0.0);
    }
    let total: f64 = values.iter().sum();

    let mut keep = dim;
    if total > 0.0 {
        let mut acc = 0.0;
        for (c, v) in values.iter().enumerate() {
            acc += v;
            // guard against rounding just below a target of 1
            if acc / total >= variance_target - 1e-12 {
                keep = c + 1;
                break;
            }
        }
    } else {
        keep = 1;
    }
    basis.truncate(keep);
    let components = basis;
    Ok(PcaModel { mean, components, explained_variance: values[..keep].to_vec(), total_variance: total })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Share of total variance per retained component; all ones if the data has no variance.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance > 0.0 {
            self.explained_variance.iter().map(|v| v / self.total_variance).collect()
        } else {
            vec![1.0; self.n_components()]
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: x.len() });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((w, v), m)| w * (v - m)).sum())
            .collect())
    }

    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, &s) in self.components.iter().zip(z) {
            for (xi, w) in x.iter_mut().zip(c) {
                *xi += s * w;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn line_needs_one_component() {
        let data: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i), 2.0 * f64::from(i) + 1.0]).collect();
        let p = fit_pca(&data, 0.95).unwrap();
        assert_eq!(p.n_components(), 1);
        assert!((p.explained_variance_ratio()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_square_needs_two() {
        let data = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        assert_eq!(fit_pca(&data, 1.0).unwrap().n_components(), 2);
        assert!(fit_pca(&data[..1], 1.0).is_err());
    }

    #[test]
    fn orthonormal_and_sorted() {
        let p = fit_pca(&random(30, 5, 1), 1.0).unwrap();
        for (a, ca) in p.components.iter().enumerate() {
            for (b, cb) in p.components.iter().enumerate() {
                let dot: f64 = ca.iter().zip(cb).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        assert!(p.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn full_reconstruction_is_exact() {
        let data = random(12, 4, 2);
        let p = fit_pca(&data, 1.0).unwrap();
        assert_eq!(p.n_components(), 4);
        for x in &data {
            let back = p.reconstruct(&p.project(x).unwrap());
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mostly_constant_columns_stay_finite() {
        // a wide histogram where only a few bins ever move
        let live = random(200, 4, 3);
        let data: Vec<Vec<f64>> = live
            .iter()
            .map(|r| {
                let mut x = vec![0.0; 343];
                for (j, v) in r.iter().enumerate() {
                    x[j * 50] = *v;
                }
                x[342] = 1.0;
                x
            })
            .collect();
        let p = fit_pca(&data, 0.95).unwrap();
        assert!(p.n_components() <= 4);
        assert!(p.explained_variance.iter().all(|v| v.is_finite()));
        assert_eq!(fit_pca(&vec![vec![2.0; 5]; 10], 0.95).unwrap().n_components(), 1);
        let z = p.project(&data[0]).unwrap();
        assert!(z.iter().all(|v| v.is_finite()));
    }

    /// Eigenvalues by power iteration with deflation on the covariance matrix.
    fn power_iteration_eigenvalues(data: &[Vec<f64>]) -> Vec<f64> {
        let (n, d) = (data.len(), data[0].len());
        let mean: Vec<f64> = (0..d).map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let mut cov = vec![vec![0.0; d]; d];
        for x in data {
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += (x[a] - mean[a]) * (x[b] - mean[b]) / (n - 1) as f64;
                }
            }
        }
        let mut out = Vec::new();
        for _ in 0..d {
            let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 * 0.1).collect();
            let mut lambda = 0.0;
            for _ in 0..20_000 {
                let w: Vec<f64> = (0..d).map(|a| (0..d).map(|b| cov[a][b] * v[b]).sum()).collect();
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    break;
                }
                v = w.iter().map(|x| x / norm).collect();
                lambda = norm;
            }
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] -= lambda * v[a] * v[b];
                }
            }
            out.push(lambda);
        }
        out
    }

    #[test]
    fn eigenvalues_match_power_iteration() {
        let data = random(10, 6, 3);
        let p = fit_pca(&data, 1.0).unwrap();
        let oracle = power_iteration_eigenvalues(&data);
        let mut ours = p.explained_variance.clone();
        ours.resize(6, 0.0);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{ours:?} vs {oracle:?}");
        }
    }
}
