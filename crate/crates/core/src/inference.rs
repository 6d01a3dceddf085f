//! Uncertainty quantification for component-based Shapley curves: the wild
//! bootstrap over subset-specific resamples, and analytic intervals from the
//! asymptotic bias/variance plug-ins.

use crate::component::{combine_component_values, ComponentModel};
use crate::data::{CurveEstimate, SubsetMask};
use crate::error::{Result, ShapError};
use crate::smoothing::{kde, local_variance, second_derivatives, BandwidthPlan, PointSolver};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// One draw from the two-point wild bootstrap law: `-(sqrt5 - 1)/2` with
/// probability `(sqrt5 + 1)/(2 sqrt5)`, else `(sqrt5 + 1)/2`. The law has
/// mean zero and second and third moments equal to one, so multiplying
/// residuals by it preserves heteroskedasticity and skewness.
pub fn mammen_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let s5 = 5f64.sqrt();
    let p_neg = (s5 + 1.0) / (2.0 * s5);
    if rng.random::<f64>() < p_neg {
        -(s5 - 1.0) / 2.0
    } else {
        (s5 + 1.0) / 2.0
    }
}

/// How the oversmoothed reference bandwidths `g_s` are chosen.
#[derive(Clone, Debug)]
pub enum OversmoothRule {
    /// `g_s = h_s * log(log n) * 4` in every direction.
    Default,
    /// Caller-supplied complete plan; must dominate the fitting plan
    /// element-wise.
    Explicit(BandwidthPlan),
}

#[derive(Clone, Debug)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub oversmooth: OversmoothRule,
    pub seed: u64,
    /// Draw a fresh multiplier vector per subset instead of sharing one per
    /// observation. Off by default: the variance algebra of the procedure
    /// couples subsets through a common multiplier, and sharing is what
    /// makes cross-subset products carry `E(V^2) = 1`.
    pub independent_v_per_subset: bool,
    /// Retain the per-subset replicate terms for variance decomposition.
    pub retain_components: bool,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, alpha: f64, seed: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ShapError::Config(format!("alpha {alpha} not in (0,1)")));
        }
        if (replicates as f64) < 2.0 / alpha {
            return Err(ShapError::Config(format!(
                "{replicates} replicates cannot resolve alpha = {alpha} quantiles"
            )));
        }
        Ok(BootstrapConfig {
            replicates,
            alpha,
            oversmooth: OversmoothRule::Default,
            seed,
            independent_v_per_subset: false,
            retain_components: false,
        })
    }

    pub fn with_oversmooth(mut self, rule: OversmoothRule) -> Self {
        self.oversmooth = rule;
        self
    }

    pub fn with_retained_components(mut self) -> Self {
        self.retain_components = true;
        self
    }
}

/// Replicate matrix and derived confidence intervals of one bootstrap run.
/// Replicate `b` always uses generator stream `b` of the config seed, so the
/// whole matrix is reproducible bit for bit for any worker count.
pub struct BootstrapResult {
    estimate: CurveEstimate,
    deviations: Vec<f64>,
    components: Option<Vec<f64>>,
    point_ok: Vec<bool>,
    replicates: usize,
    num_points: usize,
    d: usize,
    seed: u64,
}

impl BootstrapResult {
    /// The component-based estimate with intervals at the configured level.
    pub fn estimate(&self) -> &CurveEstimate {
        &self.estimate
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator stream used by replicate `b`.
    pub fn replicate_stream(&self, b: usize) -> u64 {
        b as u64
    }

    /// Raw replicate deviations for one `(point, variable)` cell.
    pub fn deviations(&self, point: usize, j: usize) -> Vec<f64> {
        (0..self.replicates)
            .map(|b| self.deviations[(b * self.num_points + point) * self.d + j])
            .collect()
    }

    /// Per-subset replicate deviations (needs `retain_components`).
    pub fn component_deviations(&self, point: usize, s: SubsetMask) -> Result<Vec<f64>> {
        let comps = self.components.as_ref().ok_or_else(|| {
            ShapError::Config("bootstrap was run without retain_components".into())
        })?;
        let num_masks = 1usize << self.d;
        Ok((0..self.replicates)
            .map(|b| comps[(b * self.num_points + point) * num_masks + s.bits() as usize])
            .collect())
    }

    /// Intervals at another significance level from the same replicates.
    pub fn ci_at(&self, alpha: f64) -> Result<CurveEstimate> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ShapError::Config(format!("alpha {alpha} not in (0,1)")));
        }
        let mut est = self.estimate.clone();
        let (lower, upper) = self.bounds(alpha)?;
        est.attach_ci(lower, upper, alpha)?;
        Ok(est)
    }

    fn bounds(&self, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let cells = self.num_points * self.d;
        let mut lower = vec![f64::NAN; cells];
        let mut upper = vec![f64::NAN; cells];
        for p in 0..self.num_points {
            if !self.point_ok[p] {
                continue;
            }
            for j in 0..self.d {
                let mut devs = self.deviations(p, j);
                devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let q_lo = quantile_type7(&devs, alpha / 2.0);
                let q_hi = quantile_type7(&devs, 1.0 - alpha / 2.0);
                let center = self.estimate.value(p, j);
                lower[p * self.d + j] = center + q_lo.min(0.0);
                upper[p * self.d + j] = center + q_hi.max(0.0);
            }
        }
        Ok((lower, upper))
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Multiplier vectors for one replicate, one row per subset. With shared
/// multipliers (the default) every row is the same per-observation vector;
/// the sensitivity switch redraws per subset.
pub(crate) fn replicate_v_matrix(
    seed: u64,
    stream: u64,
    n: usize,
    num_masks: usize,
    independent_per_subset: bool,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    if independent_per_subset {
        (0..num_masks)
            .map(|_| (0..n).map(|_| mammen_draw(&mut rng)).collect())
            .collect()
    } else {
        let shared: Vec<f64> = (0..n).map(|_| mammen_draw(&mut rng)).collect();
        vec![shared; num_masks]
    }
}

/// The wild bootstrap for component-based Shapley curves.
///
/// The base model supplies the fitting bandwidths `h_s`; an oversmoothed
/// companion is fitted once with `g_s`. Each replicate multiplies the base
/// residuals of every subset regression by one shared two-point multiplier
/// per observation, rebuilds subset-specific responses around the
/// oversmoothed fits, refits each subset with `h_s` at the evaluation
/// points, and records the deviation of the resampled curve from the
/// oversmoothed one. Intervals are empirical quantiles of those deviations
/// around the base estimate.
pub fn wild_bootstrap_ci(
    model: &ComponentModel,
    points: &[Vec<f64>],
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    if points.is_empty() {
        return Err(ShapError::Config("no evaluation points".into()));
    }
    let d = model.d();
    let n = model.n();
    let num_masks = 1usize << d;
    let masks = crate::data::all_subsets(d)?;

    let g_plan = match &config.oversmooth {
        OversmoothRule::Default => model
            .plan()
            .scaled(BandwidthPlan::default_oversmooth_factor(n))?,
        OversmoothRule::Explicit(plan) => {
            if !plan.is_complete() {
                return Err(ShapError::Config("oversmoothed plan is incomplete".into()));
            }
            if !plan.dominates(model.plan()) {
                return Err(ShapError::Config(
                    "oversmoothed bandwidths must dominate the fitting bandwidths".into(),
                ));
            }
            plan.clone()
        }
    };
    let g_model = model.refit_with(&g_plan)?;

    // Residuals and oversmoothed fitted values at the sample points, one row
    // per subset.
    let data = model.data().clone();
    let mut residuals = vec![0.0; num_masks * n];
    let mut g_fitted = vec![0.0; num_masks * n];
    for (mi, &s) in masks.iter().enumerate() {
        let cols = s.members();
        let mut coords = Vec::with_capacity(cols.len());
        for i in 0..n {
            coords.clear();
            for &j in &cols {
                coords.push(data.value(i, j));
            }
            let base = model.fit(s).eval(&coords)?;
            residuals[mi * n + i] = data.y()[i] - base;
            g_fitted[mi * n + i] = g_model.fit(s).eval(&coords)?;
        }
    }

    // Base and oversmoothed component values plus factorized refit solvers
    // at every evaluation point. A point whose solver cannot be built fails
    // as a whole.
    let per_point: Vec<Option<(Vec<f64>, Vec<f64>, Vec<PointSolver>)>> = points
        .par_iter()
        .map(|x| {
            let base_vals = model.eval_components(x).ok()?;
            let g_vals = g_model.eval_components(x).ok()?;
            let mut solvers = Vec::with_capacity(num_masks);
            for &s in &masks {
                let x_s: Vec<f64> = s.members().iter().map(|&j| x[j]).collect();
                solvers.push(model.fit(s).solver_at(&x_s).ok()?);
            }
            Some((base_vals, g_vals, solvers))
        })
        .collect();

    let num_points = points.len();
    let mut values = vec![f64::NAN; num_points * d];
    let mut point_ok = vec![false; num_points];
    let mut g_component_vals = vec![f64::NAN; num_points * num_masks];
    for (p, entry) in per_point.iter().enumerate() {
        if let Some((base_vals, g_vals, _)) = entry {
            let phi = combine_component_values(base_vals, d);
            values[p * d..(p + 1) * d].copy_from_slice(&phi);
            g_component_vals[p * num_masks..(p + 1) * num_masks].copy_from_slice(g_vals);
            point_ok[p] = true;
        }
    }

    // Replicates: stream b of the seed, collected in replicate order.
    let replicate_rows: Vec<(Vec<f64>, Option<Vec<f64>>)> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let v = replicate_v_matrix(
                config.seed,
                b as u64,
                n,
                num_masks,
                config.independent_v_per_subset,
            );
            let mut y_star = vec![0.0; num_masks * n];
            for mi in 0..num_masks {
                for i in 0..n {
                    y_star[mi * n + i] = g_fitted[mi * n + i] + residuals[mi * n + i] * v[mi][i];
                }
            }
            let mut devs = vec![f64::NAN; num_points * d];
            let mut comps = config
                .retain_components
                .then(|| vec![f64::NAN; num_points * num_masks]);
            let mut delta = vec![0.0; num_masks];
            for (p, entry) in per_point.iter().enumerate() {
                let Some((_, _, solvers)) = entry else {
                    continue;
                };
                for mi in 0..num_masks {
                    let refit = solvers[mi].intercept_for(&y_star[mi * n..(mi + 1) * n]);
                    delta[mi] = refit - g_component_vals[p * num_masks + mi];
                }
                let dev = combine_component_values(&delta, d);
                devs[p * d..(p + 1) * d].copy_from_slice(&dev);
                if let Some(c) = comps.as_mut() {
                    c[p * num_masks..(p + 1) * num_masks].copy_from_slice(&delta);
                }
            }
            (devs, comps)
        })
        .collect();

    let mut deviations = Vec::with_capacity(config.replicates * num_points * d);
    let mut components = config
        .retain_components
        .then(|| Vec::with_capacity(config.replicates * num_points * num_masks));
    for (devs, comps) in replicate_rows {
        deviations.extend_from_slice(&devs);
        if let (Some(all), Some(row)) = (components.as_mut(), comps) {
            all.extend_from_slice(&row);
        }
    }

    let estimate = CurveEstimate::new(
        points.to_vec(),
        d,
        values,
        point_ok.clone(),
        crate::data::EstimatorKind::Component,
    );
    let mut result = BootstrapResult {
        estimate,
        deviations,
        components,
        point_ok,
        replicates: config.replicates,
        num_points,
        d,
        seed: config.seed,
    };
    let (lower, upper) = result.bounds(config.alpha)?;
    result.estimate.attach_ci(lower, upper, config.alpha)?;
    Ok(result)
}

/// Pointwise intervals from the asymptotic normal approximation: plug-in
/// curvature for the bias, plug-in conditional variance over the density for
/// the variance, with the full-model bandwidths setting both the scale and
/// the effective sample size.
///
/// With `bias_corrected` the returned values are the corrected estimates
/// (curvature term subtracted); the default keeps the raw plug-in values so
/// the intervals are directly comparable with the bootstrap's.
pub fn analytic_ci(
    model: &ComponentModel,
    points: &[Vec<f64>],
    alpha: f64,
    bias_corrected: bool,
) -> Result<CurveEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ShapError::Config(format!("alpha {alpha} not in (0,1)")));
    }
    let d = model.d();
    let n = model.n();
    let data = model.data();
    let full = model.full_fit();
    let h_m = model
        .plan()
        .full_model()
        .ok_or_else(|| ShapError::Config("model has no full-model bandwidths".into()))?
        .to_vec();
    let sigma2 = local_variance(data, full, &h_m)?;
    let density = kde(data, &h_m)?;
    let kernel = full.kernel();
    let mu2 = kernel.second_moment();
    let l2 = kernel.l2_norm_sq();
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - alpha / 2.0);
    let h_prod: f64 = h_m.iter().product();
    let df = d as f64;

    struct PointCi {
        phi: Vec<f64>,
        bias: f64,
        sd: f64,
    }
    let rows: Vec<Option<PointCi>> = points
        .par_iter()
        .map(|x| {
            let phi = model.estimate_at(x).ok()?;
            let f_hat = density.eval(x);
            if f_hat < 1e-12 {
                return None;
            }
            let var = sigma2.eval(x).ok()?;
            let curvature = second_derivatives(full, x, &h_m).ok()?;
            let bias = (mu2 / (2.0 * df))
                * curvature
                    .iter()
                    .zip(&h_m)
                    .map(|(c, h)| c * h * h)
                    .sum::<f64>();
            let v_hat = l2 * var / (df * df * f_hat);
            let sd = (v_hat / (n as f64 * h_prod)).sqrt();
            Some(PointCi { phi, bias, sd })
        })
        .collect();

    let mut values = vec![f64::NAN; points.len() * d];
    let mut ok = vec![false; points.len()];
    let mut lower = vec![f64::NAN; points.len() * d];
    let mut upper = vec![f64::NAN; points.len() * d];
    for (p, row) in rows.iter().enumerate() {
        if let Some(cell) = row {
            ok[p] = true;
            for j in 0..d {
                let center = if bias_corrected {
                    cell.phi[j] - cell.bias
                } else {
                    cell.phi[j]
                };
                values[p * d + j] = center;
                lower[p * d + j] = center - z * cell.sd;
                upper[p * d + j] = center + z * cell.sd;
            }
        }
    }
    let mut est = CurveEstimate::new(
        points.to_vec(),
        d,
        values,
        ok,
        crate::data::EstimatorKind::Component,
    );
    est.attach_ci(lower, upper, alpha)?;
    Ok(est)
}

/// Share of the bootstrap variance carried by each subset at one
/// `(point, variable)` cell.
#[derive(Clone, Debug)]
pub struct VarianceDecomposition {
    pub total_variance: f64,
    /// `(subset, variance of its weighted term, covariance share of total)`.
    pub rows: Vec<(SubsetMask, f64, f64)>,
    pub full_model_share: f64,
}

/// Decomposes the replicate variance of `phi*_j - phi_g,j` into per-subset
/// contributions. Shares are covariances with the total and sum to one.
pub fn bootstrap_variance_decomposition(
    result: &BootstrapResult,
    point: usize,
    j: usize,
) -> Result<VarianceDecomposition> {
    let d = result.d;
    let masks = crate::data::all_subsets(d)?;
    let b = result.replicates;
    if b < 2 {
        return Err(ShapError::Config("need at least two replicates".into()));
    }
    let mut terms: Vec<Vec<f64>> = Vec::with_capacity(masks.len());
    for &s in &masks {
        let w = crate::weights::shapley_weight(j, s).as_f64();
        let deltas = result.component_deviations(point, s)?;
        terms.push(deltas.iter().map(|v| w * v).collect());
    }
    let totals: Vec<f64> = (0..b).map(|r| terms.iter().map(|t| t[r]).sum()).collect();
    let mean_total = totals.iter().sum::<f64>() / b as f64;
    let total_variance =
        totals.iter().map(|v| (v - mean_total).powi(2)).sum::<f64>() / (b - 1) as f64;

    let mut rows = Vec::with_capacity(masks.len());
    let mut full_share = 0.0;
    for (mi, &s) in masks.iter().enumerate() {
        let mean_t = terms[mi].iter().sum::<f64>() / b as f64;
        let var_t =
            terms[mi].iter().map(|v| (v - mean_t).powi(2)).sum::<f64>() / (b - 1) as f64;
        let cov: f64 = terms[mi]
            .iter()
            .zip(&totals)
            .map(|(t, tot)| (t - mean_t) * (tot - mean_total))
            .sum::<f64>()
            / (b - 1) as f64;
        let share = if total_variance > 0.0 {
            cov / total_variance
        } else {
            0.0
        };
        if s.is_full() {
            full_share = share;
        }
        rows.push((s, var_t, share));
    }
    Ok(VarianceDecomposition {
        total_variance,
        rows,
        full_model_share: full_share,
    })
}
