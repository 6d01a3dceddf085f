//! Multivariate Gaussian covariate laws and their conditionals.

use crate::data::SubsetMask;
use crate::error::{Result, ShapError};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// A d-dimensional Gaussian law with symmetric positive-definite covariance.
#[derive(Clone, Debug)]
pub struct GaussianLaw {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl GaussianLaw {
    pub fn new(mean: Vec<f64>, cov_rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(ShapError::Law("empty mean vector".into()));
        }
        if cov_rows.len() != d || cov_rows.iter().any(|r| r.len() != d) {
            return Err(ShapError::Law(format!("covariance must be {d}x{d}")));
        }
        let cov = DMatrix::from_fn(d, d, |r, c| cov_rows[r][c]);
        for r in 0..d {
            for c in 0..d {
                if (cov[(r, c)] - cov[(c, r)]).abs() > 1e-12 {
                    return Err(ShapError::Law(format!(
                        "covariance not symmetric at ({r},{c})"
                    )));
                }
            }
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| ShapError::Law("covariance is not positive definite".into()))?;
        Ok(GaussianLaw {
            mean: DVector::from_vec(mean),
            cov,
            chol: chol.l(),
        })
    }

    /// Zero-mean law with common variance and common pairwise correlation.
    pub fn equicorrelated(d: usize, variance: f64, rho: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(ShapError::Law(format!("variance {variance} must be positive")));
        }
        let cov = (0..d)
            .map(|r| {
                (0..d)
                    .map(|c| if r == c { variance } else { rho * variance })
                    .collect()
            })
            .collect();
        GaussianLaw::new(vec![0.0; d], cov)
    }

    pub fn standard(d: usize) -> Self {
        GaussianLaw::equicorrelated(d, 1.0, 0.0).expect("identity covariance")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean.iter().copied().collect()
    }

    pub fn covariance(&self, r: usize, c: usize) -> f64 {
        self.cov[(r, c)]
    }

    /// One draw, written into `out` (length `d`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(out.len(), d);
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for r in 0..d {
            let mut v = self.mean[r];
            for c in 0..=r {
                v += self.chol[(r, c)] * z[c];
            }
            out[r] = v;
        }
    }

    /// The law of the variables outside `s` given `X_s = x_s`. Standard
    /// Gaussian conditioning on the partitioned covariance.
    pub fn conditional(&self, s: SubsetMask, x_s: &[f64]) -> Result<ConditionalGaussian> {
        let d = self.dim();
        if s.dim() != d {
            return Err(ShapError::Law(format!(
                "subset over {} variables for a {d}-dimensional law",
                s.dim()
            )));
        }
        if s.is_full() {
            return Err(ShapError::Law("conditioning on every variable".into()));
        }
        let cond = s.members();
        let free: Vec<usize> = s.complement().members();
        if x_s.len() != cond.len() {
            return Err(ShapError::Law(format!(
                "{} conditioning values for |s| = {}",
                x_s.len(),
                cond.len()
            )));
        }
        let q = free.len();

        if cond.is_empty() {
            let mean = DVector::from_fn(q, |r, _| self.mean[free[r]]);
            let cov = DMatrix::from_fn(q, q, |r, c| self.cov[(free[r], free[c])]);
            return ConditionalGaussian::build(free, mean, cov);
        }

        let k = cond.len();
        let sigma_cc = DMatrix::from_fn(k, k, |r, c| self.cov[(cond[r], cond[c])]);
        let sigma_fc = DMatrix::from_fn(q, k, |r, c| self.cov[(free[r], cond[c])]);
        let sigma_ff = DMatrix::from_fn(q, q, |r, c| self.cov[(free[r], free[c])]);
        let chol_cc = Cholesky::new(sigma_cc)
            .ok_or_else(|| ShapError::Law("singular conditioning block".into()))?;
        let dev = DVector::from_fn(k, |r, _| x_s[r] - self.mean[cond[r]]);
        // gain = Sigma_fc Sigma_cc^{-1}
        let gain = chol_cc.solve(&sigma_fc.transpose()).transpose();
        let mean = DVector::from_fn(q, |r, _| self.mean[free[r]]) + &gain * dev;
        let cov = sigma_ff - &gain * sigma_fc.transpose();
        ConditionalGaussian::build(free, mean, cov)
    }
}

/// The conditional law of the free variables given fixed values on a subset.
#[derive(Clone, Debug)]
pub struct ConditionalGaussian {
    free: Vec<usize>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl ConditionalGaussian {
    fn build(free: Vec<usize>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        // Symmetrize before factorizing; the Schur complement picks up
        // harmless asymmetry at machine precision.
        let sym = (&cov + cov.transpose()) * 0.5;
        let chol: Cholesky<f64, Dyn> = Cholesky::new(sym.clone()).ok_or_else(|| {
            ShapError::Law("conditional covariance is not positive definite".into())
        })?;
        Ok(ConditionalGaussian {
            free,
            mean,
            cov: sym,
            chol: chol.l(),
        })
    }

    /// Number of free variables.
    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Indices of the free variables in the parent law, ascending.
    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean.iter().copied().collect()
    }

    pub fn covariance(&self, r: usize, c: usize) -> f64 {
        self.cov[(r, c)]
    }

    pub fn variance(&self, r: usize) -> f64 {
        self.cov[(r, r)]
    }

    /// Maps a standard-normal vector `u` to a point of the conditional law,
    /// `mean + L u`, writing into `out`.
    pub fn transform(&self, u: &[f64], out: &mut [f64]) {
        let q = self.dim();
        debug_assert_eq!(u.len(), q);
        debug_assert_eq!(out.len(), q);
        for r in 0..q {
            let mut v = self.mean[r];
            for c in 0..=r {
                v += self.chol[(r, c)] * u[c];
            }
            out[r] = v;
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let u: Vec<f64> = (0..self.dim()).map(|_| StandardNormal.sample(rng)).collect();
        self.transform(&u, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        assert!(GaussianLaw::new(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.2, 1.0]]).is_err());
        assert!(GaussianLaw::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }

    #[test]
    fn diagonal_conditional_is_the_marginal() {
        let law = GaussianLaw::equicorrelated(3, 4.0, 0.0).unwrap();
        let s = SubsetMask::singleton(0, 3).unwrap();
        let c1 = law.conditional(s, &[2.0]).unwrap();
        let c2 = law.conditional(s, &[-5.0]).unwrap();
        assert_eq!(c1.free_indices(), &[1, 2]);
        assert_relative_eq!(c1.mean()[0], 0.0);
        assert_relative_eq!(c1.mean()[1], c2.mean()[1]);
        assert_relative_eq!(c1.variance(0), 4.0);
        assert_relative_eq!(c1.covariance(0, 1), 0.0);
    }

    #[test]
    fn bivariate_textbook_conditioning() {
        // mu = 0, var 4, rho = 0.8, condition on x1 = 2:
        // E(X2|X1=2) = rho * 2 = 1.6, Var = 4 (1 - 0.64) = 1.44.
        let law = GaussianLaw::equicorrelated(2, 4.0, 0.8).unwrap();
        let s = SubsetMask::singleton(0, 2).unwrap();
        let c = law.conditional(s, &[2.0]).unwrap();
        assert_relative_eq!(c.mean()[0], 1.6, max_relative = 1e-12);
        assert_relative_eq!(c.variance(0), 1.44, max_relative = 1e-12);
    }

    #[test]
    fn conditioning_at_the_mean_recovers_the_marginal_mean() {
        let law = GaussianLaw::new(
            vec![1.0, -2.0, 3.0],
            vec![
                vec![2.0, 0.5, 0.3],
                vec![0.5, 1.5, 0.2],
                vec![0.3, 0.2, 1.0],
            ],
        )
        .unwrap();
        let s = SubsetMask::from_members(&[0, 2], 3).unwrap();
        let c = law.conditional(s, &[1.0, 3.0]).unwrap();
        assert_relative_eq!(c.mean()[0], -2.0, max_relative = 1e-12);
    }

    #[test]
    fn conditional_matches_slab_monte_carlo() {
        // Sample the joint law, restrict to a thin slab around x_s, compare
        // the conditional mean within Monte Carlo error.
        let law = GaussianLaw::equicorrelated(2, 4.0, 0.8).unwrap();
        let s = SubsetMask::singleton(0, 2).unwrap();
        let cond = law.conditional(s, &[2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut kept = Vec::new();
        let mut draw = [0.0; 2];
        for _ in 0..100_000 {
            law.sample_into(&mut rng, &mut draw);
            if (draw[0] - 2.0).abs() < 0.05 {
                kept.push(draw[1]);
            }
        }
        assert!(kept.len() > 500, "slab too thin: {}", kept.len());
        let mean: f64 = kept.iter().sum::<f64>() / kept.len() as f64;
        let sd = (kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / kept.len() as f64).sqrt();
        let se = sd / (kept.len() as f64).sqrt();
        assert!(
            (mean - cond.mean()[0]).abs() < 3.0 * se + 0.05,
            "slab mean {mean} vs conditional {}",
            cond.mean()[0]
        );
    }

    #[test]
    fn sampling_matches_the_law() {
        let law = GaussianLaw::equicorrelated(2, 4.0, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum = [0.0; 2];
        let mut sum_sq = [0.0; 2];
        let mut cross = 0.0;
        let mut draw = [0.0; 2];
        for _ in 0..n {
            law.sample_into(&mut rng, &mut draw);
            for j in 0..2 {
                sum[j] += draw[j];
                sum_sq[j] += draw[j] * draw[j];
            }
            cross += draw[0] * draw[1];
        }
        let nf = n as f64;
        let mean0 = sum[0] / nf;
        let var0 = sum_sq[0] / nf - mean0 * mean0;
        let corr = (cross / nf - (sum[0] / nf) * (sum[1] / nf))
            / (var0 * (sum_sq[1] / nf - (sum[1] / nf).powi(2))).sqrt();
        assert!(mean0.abs() < 0.03);
        assert!((var0 - 4.0).abs() < 0.1);
        assert!((corr - 0.8).abs() < 0.01);
    }
}
