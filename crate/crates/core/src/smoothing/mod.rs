//! Kernel smoothing machinery: product Gaussian kernel, multivariate local
//! linear regression, bandwidth selection, kernel density estimation and the
//! local plug-ins (conditional variance, second derivatives) used by the
//! analytic confidence intervals.

mod cv;
mod density;
mod plan;

pub use cv::{default_candidate_grids, loo_cv_bandwidth, rule_of_thumb_bandwidths};
pub use density::{kde, local_variance, KdeEstimator, VarianceEstimator};
pub use plan::BandwidthPlan;

use crate::data::Dataset;
use crate::error::{Result, ShapError};

/// Squared scaled distance beyond which a kernel weight is dropped
/// (weight below ~1e-18; far outside the effective support).
const SQ_CUTOFF: f64 = 83.0;

/// Minimum total kernel mass, relative to `n`, for a query to be considered
/// inside the data cloud. Queries below it are reported as estimation
/// failures instead of extrapolated.
const MASS_FLOOR: f64 = 1e-12;

/// One-dimensional smoothing kernel. Only the second-order Gaussian is
/// implemented; the tag keeps the moment constants next to the density.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Gaussian,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    /// Second moment `mu2 = int s^2 k(s) ds`.
    pub fn second_moment(self) -> f64 {
        match self {
            Kernel::Gaussian => 1.0,
        }
    }

    /// Squared L2 norm `int k(s)^2 ds`.
    pub fn l2_norm_sq(self) -> f64 {
        match self {
            Kernel::Gaussian => 0.5 / std::f64::consts::PI.sqrt(),
        }
    }
}

/// In-place Cholesky factorization of a symmetric matrix stored row-major;
/// the factor overwrites the lower triangle. Returns the (min, max) squared
/// pivots on success, `None` on a non-positive pivot.
fn cholesky_in_place(a: &mut [f64], p: usize) -> Option<(f64, f64)> {
    let mut min_piv = f64::INFINITY;
    let mut max_piv = 0.0f64;
    for k in 0..p {
        let mut diag = a[k * p + k];
        for t in 0..k {
            diag -= a[k * p + t] * a[k * p + t];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        min_piv = min_piv.min(diag);
        max_piv = max_piv.max(diag);
        let lkk = diag.sqrt();
        a[k * p + k] = lkk;
        for i in (k + 1)..p {
            let mut v = a[i * p + k];
            for t in 0..k {
                v -= a[i * p + t] * a[k * p + t];
            }
            a[i * p + k] = v / lkk;
        }
    }
    Some((min_piv, max_piv))
}

/// Solves `A x = b` given the Cholesky factor of `A`; `b` is overwritten.
fn cholesky_solve(l: &[f64], p: usize, b: &mut [f64]) {
    for i in 0..p {
        let mut v = b[i];
        for t in 0..i {
            v -= l[i * p + t] * b[t];
        }
        b[i] = v / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut v = b[i];
        for t in (i + 1)..p {
            v -= l[t * p + i] * b[t];
        }
        b[i] = v / l[i * p + i];
    }
}

/// Factorizes the normal matrix, escalating a ridge on the diagonal only if
/// the plain factorization fails or is numerically degenerate.
fn factorize_normal_matrix(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let trace: f64 = (0..p).map(|k| a[k * p + k]).sum();
    for ridge in [0.0, 1e-10 * trace, 1e-6 * trace] {
        let mut l = a.to_vec();
        if ridge > 0.0 {
            for k in 0..p {
                l[k * p + k] += ridge;
            }
        }
        if let Some((min_piv, max_piv)) = cholesky_in_place(&mut l, p) {
            if min_piv > 1e-13 * max_piv {
                return Some(l);
            }
        }
    }
    None
}

/// A frozen local linear fit: the design slice, the response and per-direction
/// bandwidths. Evaluation solves the kernel-weighted least squares at the
/// query and returns the intercept. Immutable and cheap to share.
#[derive(Clone, Debug)]
pub struct LocalFit {
    xs: Vec<f64>,
    y: Vec<f64>,
    h: Vec<f64>,
    dim: usize,
    n: usize,
    kernel: Kernel,
    y_mean: f64,
}

/// Fits a local linear smoother of `y` on all covariate columns of `data`
/// with per-direction bandwidths `h`. A zero-column dataset yields the
/// sample-mean smoother.
pub fn local_linear_fit(data: &Dataset, h: &[f64]) -> Result<LocalFit> {
    let dim = data.d();
    if h.len() != dim {
        return Err(ShapError::Config(format!(
            "{} bandwidths for {dim} directions",
            h.len()
        )));
    }
    if h.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(ShapError::Config("bandwidths must be positive finite".into()));
    }
    if data.n() < dim + 2 {
        return Err(ShapError::Data(format!(
            "need at least {} rows for a {dim}-dimensional local linear fit, got {}",
            dim + 2,
            data.n()
        )));
    }
    let mut xs = Vec::with_capacity(data.n() * dim);
    for i in 0..data.n() {
        xs.extend_from_slice(data.row(i));
    }
    Ok(LocalFit {
        xs,
        y: data.y().to_vec(),
        h: h.to_vec(),
        dim,
        n: data.n(),
        kernel: Kernel::Gaussian,
        y_mean: data.y_mean(),
    })
}

impl LocalFit {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.h
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    /// Fitted value at `x` (length `dim`).
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if self.dim == 0 {
            return Ok(self.y_mean);
        }
        debug_assert_eq!(x.len(), self.dim);
        let p = self.dim + 1;
        let mut a = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        let mut z = vec![0.0; p];
        z[0] = 1.0;
        let inv_h: Vec<f64> = self.h.iter().map(|v| 1.0 / v).collect();
        let mut mass = 0.0;
        for i in 0..self.n {
            let row = &self.xs[i * self.dim..(i + 1) * self.dim];
            let mut sq = 0.0;
            for j in 0..self.dim {
                let u = (row[j] - x[j]) * inv_h[j];
                z[j + 1] = u;
                sq += u * u;
            }
            if sq > SQ_CUTOFF {
                continue;
            }
            let w = (-0.5 * sq).exp();
            mass += w;
            for r in 0..p {
                let wzr = w * z[r];
                b[r] += wzr * self.y[i];
                for c in 0..=r {
                    a[r * p + c] += wzr * z[c];
                }
            }
        }
        if mass < MASS_FLOOR * self.n as f64 {
            return Err(ShapError::estimation(x, "no kernel mass at query"));
        }
        for r in 0..p {
            for c in (r + 1)..p {
                a[r * p + c] = a[c * p + r];
            }
        }
        let l = factorize_normal_matrix(&a, p)
            .ok_or_else(|| ShapError::estimation(x, "singular weighted design"))?;
        cholesky_solve(&l, p, &mut b);
        Ok(b[0])
    }

    /// Fitted value together with the effective observation weights
    /// `W_i(x)` satisfying `m_hat(x) = sum_i W_i(x) y_i`.
    pub fn weights_at(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let solver = self.solver_at(x)?;
        let w = solver.effective_weights();
        let value = solver.intercept_for(&self.y);
        Ok((value, w))
    }

    /// Precomputes the factorized weighted design at a fixed query so the
    /// fit can be re-solved for many response vectors (the bootstrap refits
    /// every replicate at the same points with the same bandwidths).
    pub fn solver_at(&self, x: &[f64]) -> Result<PointSolver> {
        if self.dim == 0 {
            return Ok(PointSolver {
                chol: vec![(self.n as f64).sqrt()],
                wz: vec![1.0; self.n],
                p: 1,
                n: self.n,
            });
        }
        debug_assert_eq!(x.len(), self.dim);
        let p = self.dim + 1;
        let mut a = vec![0.0; p * p];
        let mut wz = vec![0.0; self.n * p];
        let inv_h: Vec<f64> = self.h.iter().map(|v| 1.0 / v).collect();
        let mut z = vec![0.0; p];
        z[0] = 1.0;
        let mut mass = 0.0;
        for i in 0..self.n {
            let row = &self.xs[i * self.dim..(i + 1) * self.dim];
            let mut sq = 0.0;
            for j in 0..self.dim {
                let u = (row[j] - x[j]) * inv_h[j];
                z[j + 1] = u;
                sq += u * u;
            }
            if sq > SQ_CUTOFF {
                continue;
            }
            let w = (-0.5 * sq).exp();
            mass += w;
            for r in 0..p {
                let wzr = w * z[r];
                wz[i * p + r] = wzr;
                for c in 0..=r {
                    a[r * p + c] += wzr * z[c];
                }
            }
        }
        if mass < MASS_FLOOR * self.n as f64 {
            return Err(ShapError::estimation(x, "no kernel mass at query"));
        }
        for r in 0..p {
            for c in (r + 1)..p {
                a[r * p + c] = a[c * p + r];
            }
        }
        let chol = factorize_normal_matrix(&a, p)
            .ok_or_else(|| ShapError::estimation(x, "singular weighted design"))?;
        Ok(PointSolver {
            chol,
            wz,
            p,
            n: self.n,
        })
    }

    /// Central finite differences of the fitted surface in each direction.
    pub fn second_derivatives(&self, x: &[f64], steps: &[f64]) -> Result<Vec<f64>> {
        second_derivatives(self, x, steps)
    }
}

/// A factorized local linear solve at one query point; `intercept_for`
/// returns the fitted value for an arbitrary response vector.
#[derive(Clone, Debug)]
pub struct PointSolver {
    chol: Vec<f64>,
    wz: Vec<f64>,
    p: usize,
    n: usize,
}

impl PointSolver {
    pub fn intercept_for(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.n);
        let p = self.p;
        let mut b = vec![0.0; p];
        for i in 0..self.n {
            let yi = y[i];
            let row = &self.wz[i * p..(i + 1) * p];
            for t in 0..p {
                b[t] += row[t] * yi;
            }
        }
        if p == 1 {
            let l = self.chol[0];
            return b[0] / (l * l);
        }
        cholesky_solve(&self.chol, p, &mut b);
        b[0]
    }

    /// Effective observation weights `W_i`; they reproduce constants, so
    /// they sum to one wherever the design is full rank.
    pub fn effective_weights(&self) -> Vec<f64> {
        let p = self.p;
        let mut u = vec![0.0; p];
        u[0] = 1.0;
        if p == 1 {
            let l = self.chol[0];
            u[0] /= l * l;
        } else {
            cholesky_solve(&self.chol, p, &mut u);
        }
        (0..self.n)
            .map(|i| {
                let row = &self.wz[i * p..(i + 1) * p];
                (0..p).map(|t| u[t] * row[t]).sum()
            })
            .collect()
    }
}

/// An evaluable d-dimensional regression surface. Implemented by fitted
/// smoothers and by analytic stand-ins used in tests and oracles.
pub trait Surface: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64>;
}

impl Surface for LocalFit {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        LocalFit::eval(self, x)
    }
}

/// Wraps a closed-form function as a surface (never fails to evaluate).
pub struct AnalyticSurface<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> AnalyticSurface<F> {
    pub fn new(dim: usize, f: F) -> Self {
        AnalyticSurface { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Surface for AnalyticSurface<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// Central second differences `{f(x+se_j) - 2f(x) + f(x-se_j)}/s^2` of a
/// surface, one per direction.
pub fn second_derivatives(surface: &dyn Surface, x: &[f64], steps: &[f64]) -> Result<Vec<f64>> {
    if steps.len() != surface.dim() || steps.iter().any(|&s| !(s > 0.0)) {
        return Err(ShapError::Config("need one positive step per direction".into()));
    }
    let center = surface.eval(x)?;
    let mut out = Vec::with_capacity(surface.dim());
    let mut probe = x.to_vec();
    for j in 0..surface.dim() {
        let s = steps[j];
        probe[j] = x[j] + s;
        let up = surface.eval(&probe)?;
        probe[j] = x[j] - s;
        let down = surface.eval(&probe)?;
        probe[j] = x[j];
        out.push((up - 2.0 * center + down) / (s * s));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn affine_data(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
            .collect();
        let y = rows
            .iter()
            .map(|r| 3.0 + r.iter().enumerate().map(|(j, v)| (j as f64 + 2.0) * v).sum::<f64>())
            .collect();
        let names = (0..d).map(|j| format!("x{}", j + 1)).collect();
        Dataset::from_rows(&rows, y, names).unwrap()
    }

    #[test]
    fn reproduces_affine_functions() {
        for d in 1..=3 {
            let data = affine_data(80, d, 7);
            let fit = local_linear_fit(&data, &vec![0.5; d]).unwrap();
            for i in (0..data.n()).step_by(7) {
                let x = data.row(i).to_vec();
                let expected =
                    3.0 + x.iter().enumerate().map(|(j, v)| (j as f64 + 2.0) * v).sum::<f64>();
                let got = fit.eval(&x).unwrap();
                assert_relative_eq!(got, expected, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn constant_response_is_reproduced() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 4.0]).collect();
        let data = Dataset::from_rows(&rows, vec![5.5; 20], vec!["x1".into()]).unwrap();
        let fit = local_linear_fit(&data, &[0.7]).unwrap();
        for q in [-0.3, 0.0, 2.0, 4.9] {
            assert_relative_eq!(fit.eval(&[q]).unwrap(), 5.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn quadratic_fixture_matches_direct_normal_equations() {
        // 1-D sample y = x^2 on {-1, 0, 1}, h = 1, query 0. Direct 2x2
        // weighted normal equations: weights (w, 1, w) with w = exp(-1/2),
        // A = [[1+2w, 0], [0, 2w]], b = (2w, 0) => intercept 2w/(1+2w).
        let data = Dataset::from_rows(
            &[vec![-1.0], vec![0.0], vec![1.0]],
            vec![1.0, 0.0, 1.0],
            vec!["x1".into()],
        )
        .unwrap();
        let fit = local_linear_fit(&data, &[1.0]).unwrap();
        let w = (-0.5f64).exp();
        let expected = 2.0 * w / (1.0 + 2.0 * w);
        assert_relative_eq!(fit.eval(&[0.0]).unwrap(), expected, max_relative = 1e-12);
        // Frozen value of the oracle above.
        assert_relative_eq!(fit.eval(&[0.0]).unwrap(), 0.548_137_2, max_relative = 1e-6);
    }

    #[test]
    fn zero_dimensional_fit_returns_sample_mean() {
        let data = affine_data(30, 2, 3);
        let empty = data
            .slice_columns(crate::data::SubsetMask::empty(2).unwrap())
            .unwrap();
        let fit = local_linear_fit(&empty, &[]).unwrap();
        assert_relative_eq!(fit.eval(&[]).unwrap(), data.y_mean(), max_relative = 1e-14);
    }

    #[test]
    fn far_query_reports_estimation_failure() {
        let data = affine_data(40, 1, 9);
        let fit = local_linear_fit(&data, &[0.05]).unwrap();
        let err = fit.eval(&[1.0e6]).unwrap_err();
        assert!(matches!(err, ShapError::Estimation { .. }));
    }

    #[test]
    fn effective_weights_sum_to_one() {
        let data = affine_data(60, 2, 11);
        let fit = local_linear_fit(&data, &[0.6, 0.8]).unwrap();
        for q in [[0.0, 0.0], [1.0, -0.5], [-1.5, 1.5]] {
            let (value, w) = fit.weights_at(&q).unwrap();
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "sum {total}");
            let direct: f64 = w.iter().zip(fit.response()).map(|(wi, yi)| wi * yi).sum();
            assert_relative_eq!(direct, value, max_relative = 1e-10);
        }
    }

    #[test]
    fn solver_matches_eval() {
        let data = affine_data(50, 2, 13);
        let fit = local_linear_fit(&data, &[0.5, 0.5]).unwrap();
        let q = [0.25, -0.75];
        let solver = fit.solver_at(&q).unwrap();
        assert_relative_eq!(
            solver.intercept_for(fit.response()),
            fit.eval(&q).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn permutation_of_rows_changes_nothing() {
        let data = affine_data(40, 2, 17);
        let mut order: Vec<usize> = (0..data.n()).collect();
        order.reverse();
        order.swap(3, 17);
        let rows: Vec<Vec<f64>> = order.iter().map(|&i| data.row(i).to_vec()).collect();
        let y: Vec<f64> = order.iter().map(|&i| data.y()[i]).collect();
        let permuted =
            Dataset::from_rows(&rows, y, data.names().to_vec()).unwrap();
        let f1 = local_linear_fit(&data, &[0.5, 0.5]).unwrap();
        let f2 = local_linear_fit(&permuted, &[0.5, 0.5]).unwrap();
        for q in [[0.0, 0.0], [0.7, -0.2]] {
            assert_relative_eq!(
                f1.eval(&q).unwrap(),
                f2.eval(&q).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn second_derivatives_vanish_on_affine_fit() {
        let data = affine_data(100, 2, 23);
        let fit = local_linear_fit(&data, &[0.6, 0.6]).unwrap();
        let der = fit.second_derivatives(&[0.2, -0.1], &[0.3, 0.3]).unwrap();
        for v in der {
            assert!(v.abs() < 1e-6, "curvature {v} on affine data");
        }
    }

    #[test]
    fn second_derivatives_recover_quadratic_curvature() {
        let rows: Vec<Vec<f64>> = (0..400).map(|i| vec![-2.0 + i as f64 / 100.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * r[0]).collect();
        let data = Dataset::from_rows(&rows, y, vec!["x1".into()]).unwrap();
        let fit = local_linear_fit(&data, &[0.15]).unwrap();
        let der = fit.second_derivatives(&[0.0], &[0.15]).unwrap();
        assert!((der[0] - 2.0).abs() < 0.2, "curvature {}", der[0]);
    }

    #[test]
    fn kernel_constants_by_quadrature() {
        // Composite Simpson over [-12, 12] is far below the 1e-10 target.
        let k = Kernel::Gaussian;
        let m = 1 << 14;
        let (lo, hi) = (-12.0, 12.0);
        let step = (hi - lo) / m as f64;
        let mut mu2 = 0.0;
        let mut l2 = 0.0;
        for i in 0..=m {
            let s = lo + i as f64 * step;
            let coef = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            mu2 += coef * s * s * k.eval(s);
            l2 += coef * k.eval(s) * k.eval(s);
        }
        mu2 *= step / 3.0;
        l2 *= step / 3.0;
        assert!((mu2 - k.second_moment()).abs() < 1e-10);
        assert!((l2 - k.l2_norm_sq()).abs() < 1e-10);
    }
}
