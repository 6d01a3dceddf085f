//! Product-Gaussian kernel density estimation and the local-constant
//! conditional variance plug-in.

use super::{LocalFit, SQ_CUTOFF};
use crate::data::Dataset;
use crate::error::{Result, ShapError};

/// Product-Gaussian kernel density estimate over the covariates of a sample.
#[derive(Clone, Debug)]
pub struct KdeEstimator {
    xs: Vec<f64>,
    h: Vec<f64>,
    n: usize,
    dim: usize,
    norm: f64,
}

pub fn kde(data: &Dataset, h: &[f64]) -> Result<KdeEstimator> {
    let dim = data.d();
    if dim == 0 {
        return Err(ShapError::Config("density needs at least one column".into()));
    }
    if h.len() != dim || h.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(ShapError::Config(
            "need one positive bandwidth per direction".into(),
        ));
    }
    let mut xs = Vec::with_capacity(data.n() * dim);
    for i in 0..data.n() {
        xs.extend_from_slice(data.row(i));
    }
    let h_prod: f64 = h.iter().product();
    let norm = 1.0
        / (data.n() as f64 * h_prod * (2.0 * std::f64::consts::PI).powf(dim as f64 / 2.0));
    Ok(KdeEstimator {
        xs,
        h: h.to_vec(),
        n: data.n(),
        dim,
        norm,
    })
}

impl KdeEstimator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.h
    }

    /// Density estimate at `x`; analytically positive everywhere, although
    /// it underflows to zero far outside the sample.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let inv_h: Vec<f64> = self.h.iter().map(|v| 1.0 / v).collect();
        let mut total = 0.0;
        for i in 0..self.n {
            let row = &self.xs[i * self.dim..(i + 1) * self.dim];
            let mut sq = 0.0;
            for j in 0..self.dim {
                let u = (row[j] - x[j]) * inv_h[j];
                sq += u * u;
            }
            if sq > 2.0 * SQ_CUTOFF {
                continue;
            }
            total += (-0.5 * sq).exp();
        }
        self.norm * total
    }
}

/// Local-constant regression of squared full-model residuals: the plug-in
/// for the conditional variance of the errors.
#[derive(Clone, Debug)]
pub struct VarianceEstimator {
    xs: Vec<f64>,
    sq_resid: Vec<f64>,
    h: Vec<f64>,
    n: usize,
    dim: usize,
}

/// Builds the conditional-variance estimator from a fitted full model.
/// Residuals are taken against `fit` at the sample points.
pub fn local_variance(data: &Dataset, fit: &LocalFit, h: &[f64]) -> Result<VarianceEstimator> {
    let dim = data.d();
    if fit.dim() != dim {
        return Err(ShapError::Config(format!(
            "variance plug-in needs a full-model fit ({} directions, data has {dim})",
            fit.dim()
        )));
    }
    if h.len() != dim || h.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(ShapError::Config(
            "need one positive bandwidth per direction".into(),
        ));
    }
    let mut xs = Vec::with_capacity(data.n() * dim);
    let mut sq_resid = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let row = data.row(i);
        xs.extend_from_slice(row);
        let fitted = fit.eval(row)?;
        let r = data.y()[i] - fitted;
        sq_resid.push(r * r);
    }
    Ok(VarianceEstimator {
        xs,
        sq_resid,
        h: h.to_vec(),
        n: data.n(),
        dim,
    })
}

impl VarianceEstimator {
    /// Kernel-weighted average of squared residuals at `x`; nonnegative by
    /// construction.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let inv_h: Vec<f64> = self.h.iter().map(|v| 1.0 / v).collect();
        let mut mass = 0.0;
        let mut acc = 0.0;
        for i in 0..self.n {
            let row = &self.xs[i * self.dim..(i + 1) * self.dim];
            let mut sq = 0.0;
            for j in 0..self.dim {
                let u = (row[j] - x[j]) * inv_h[j];
                sq += u * u;
            }
            if sq > SQ_CUTOFF {
                continue;
            }
            let w = (-0.5 * sq).exp();
            mass += w;
            acc += w * self.sq_resid[i];
        }
        if mass <= 0.0 {
            return Err(ShapError::estimation(x, "zero kernel mass for variance plug-in"));
        }
        Ok(acc / mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::local_linear_fit;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn single_point_kde_closed_form() {
        let data = Dataset::from_rows(
            &[vec![0.0], vec![0.0]],
            vec![0.0, 0.0],
            vec!["x1".into()],
        )
        .unwrap();
        let f = kde(&data, &[1.0]).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((f.eval(&[0.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn kde_is_symmetric_for_symmetric_points() {
        let data = Dataset::from_rows(
            &[vec![-1.5], vec![1.5]],
            vec![0.0, 0.0],
            vec!["x1".into()],
        )
        .unwrap();
        let f = kde(&data, &[0.7]).unwrap();
        assert!((f.eval(&[0.4]) - f.eval(&[-0.4])).abs() < 1e-14);
    }

    #[test]
    fn kde_matches_standard_normal_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![StandardNormal.sample(&mut rng)])
            .collect();
        let y = vec![0.0; rows.len()];
        let data = Dataset::from_rows(&rows, y, vec!["x1".into()]).unwrap();
        let h = crate::smoothing::rule_of_thumb_bandwidths(&data);
        let f = kde(&data, &h).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((f.eval(&[0.0]) - expected).abs() < 0.02);
    }

    #[test]
    fn kde_integrates_to_one() {
        // Grid quadrature over a padded box, 1-D and 2-D.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for dim in [1usize, 2] {
            let rows: Vec<Vec<f64>> = (0..200)
                .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            let data =
                Dataset::from_rows(&rows, vec![0.0; 200], (0..dim).map(|j| format!("x{j}")).collect())
                    .unwrap();
            let h = vec![0.4; dim];
            let f = kde(&data, &h).unwrap();
            let lo: Vec<f64> = (0..dim)
                .map(|j| rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min) - 8.0 * h[j])
                .collect();
            let hi: Vec<f64> = (0..dim)
                .map(|j| rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max) + 8.0 * h[j])
                .collect();
            let steps: usize = if dim == 1 { 4000 } else { 220 };
            let mut total = 0.0;
            let cell: f64 = (0..dim).map(|j| (hi[j] - lo[j]) / steps as f64).product();
            let mut idx = vec![0usize; dim];
            let total_cells = steps.pow(dim as u32);
            for _ in 0..total_cells {
                let x: Vec<f64> = (0..dim)
                    .map(|j| lo[j] + (idx[j] as f64 + 0.5) * (hi[j] - lo[j]) / steps as f64)
                    .collect();
                total += f.eval(&x) * cell;
                for j in (0..dim).rev() {
                    idx[j] += 1;
                    if idx[j] < steps {
                        break;
                    }
                    idx[j] = 0;
                }
            }
            assert!((total - 1.0).abs() < 1e-3, "dim {dim}: integral {total}");
        }
    }

    #[test]
    fn variance_plugin_recovers_homoskedastic_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let n = 5000;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>() * 4.0 - 2.0])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                let e: f64 = StandardNormal.sample(&mut rng);
                r[0].sin() + e
            })
            .collect();
        let data = Dataset::from_rows(&rows, y, vec!["x1".into()]).unwrap();
        let h = crate::smoothing::rule_of_thumb_bandwidths(&data);
        let fit = local_linear_fit(&data, &h).unwrap();
        let sigma2 = local_variance(&data, &fit, &h).unwrap();
        let v = sigma2.eval(&[0.0]).unwrap();
        assert!((0.8..=1.2).contains(&v), "sigma^2(0) = {v}");

        // Quadrupled noise scales the plug-in by about four.
        let y4: Vec<f64> = rows
            .iter()
            .map(|r| {
                let e: f64 = StandardNormal.sample(&mut rng);
                r[0].sin() + 2.0 * e
            })
            .collect();
        let data4 = Dataset::from_rows(&rows, y4, vec!["x1".into()]).unwrap();
        let fit4 = local_linear_fit(&data4, &h).unwrap();
        let sigma4 = local_variance(&data4, &fit4, &h).unwrap();
        let v4 = sigma4.eval(&[0.0]).unwrap();
        assert!((2.8..=5.4).contains(&v4), "sigma^2(0) = {v4} under 4x noise");
    }

    #[test]
    fn variance_plugin_near_zero_without_noise() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![-2.0 + i as f64 / 50.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + 2.0 * r[0]).collect();
        let data = Dataset::from_rows(&rows, y, vec!["x1".into()]).unwrap();
        let fit = local_linear_fit(&data, &[0.3]).unwrap();
        let sigma2 = local_variance(&data, &fit, &[0.3]).unwrap();
        assert!(sigma2.eval(&[0.0]).unwrap() < 1e-16);
    }
}
