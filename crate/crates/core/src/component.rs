//! The component-based Shapley curve estimator: one local linear regression
//! per variable subset, combined with exact combinatorial weights.

use crate::data::{CurveEstimate, Dataset, EstimatorKind, SubsetMask, MAX_DIMENSION};
use crate::error::{Result, ShapError};
use crate::smoothing::{
    default_candidate_grids, local_linear_fit, loo_cv_bandwidth, BandwidthPlan, LocalFit,
};
use crate::weights::{binomial, shapley_weight};
use rayon::prelude::*;
use std::sync::Arc;

/// Number of candidates per direction in the default cross-validation grid.
pub const DEFAULT_CV_CANDIDATES: usize = 15;

/// All `2^d` fitted subset regressions for one sample, keyed by mask bits in
/// ascending order. The empty subset is the sample-mean smoother. Immutable
/// after fitting and cheap to share across threads.
#[derive(Clone, Debug)]
pub struct ComponentModel {
    data: Arc<Dataset>,
    fits: Vec<LocalFit>,
    plan: BandwidthPlan,
}

/// Fits every subset regression. Bandwidths come from `plan` where present
/// and are leave-one-out cross-validated otherwise. Deterministic given the
/// data and plan.
pub fn fit_components(data: &Arc<Dataset>, plan: Option<&BandwidthPlan>) -> Result<ComponentModel> {
    let d = data.d();
    if d == 0 || d > MAX_DIMENSION {
        return Err(ShapError::Config(format!(
            "component model needs 1..={MAX_DIMENSION} variables, got {d}"
        )));
    }
    if let Some(p) = plan {
        if p.d() != d {
            return Err(ShapError::Config(format!(
                "bandwidth plan of dimension {} for {d}-column data",
                p.d()
            )));
        }
    }
    let masks: Vec<SubsetMask> = crate::data::all_subsets(d)?;
    let fitted: Vec<Result<(LocalFit, Vec<f64>)>> = masks
        .par_iter()
        .map(|&s| {
            let sliced = data.slice_columns(s)?;
            let h: Vec<f64> = match plan.and_then(|p| p.get(s)) {
                Some(h) => h.to_vec(),
                None if s.is_empty() => Vec::new(),
                None => {
                    let grids = default_candidate_grids(&sliced, DEFAULT_CV_CANDIDATES);
                    loo_cv_bandwidth(&sliced, &grids).map_err(|e| match e {
                        ShapError::BandwidthSelection { reason, .. } => {
                            ShapError::BandwidthSelection { subset: s, reason }
                        }
                        other => other,
                    })?
                }
            };
            let fit = local_linear_fit(&sliced, &h)?;
            Ok((fit, h))
        })
        .collect();

    let mut fits = Vec::with_capacity(fitted.len());
    let mut resolved = BandwidthPlan::new(d)?;
    for (s, item) in masks.iter().zip(fitted) {
        let (fit, h) = item?;
        resolved.set(*s, h)?;
        fits.push(fit);
    }
    Ok(ComponentModel {
        data: data.clone(),
        fits,
        plan: resolved,
    })
}

impl ComponentModel {
    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn data(&self) -> &Arc<Dataset> {
        &self.data
    }

    /// The plan actually used, with cross-validated entries filled in.
    pub fn plan(&self) -> &BandwidthPlan {
        &self.plan
    }

    pub fn fit(&self, s: SubsetMask) -> &LocalFit {
        &self.fits[s.bits() as usize]
    }

    pub fn full_fit(&self) -> &LocalFit {
        &self.fits[self.fits.len() - 1]
    }

    pub fn y_mean(&self) -> f64 {
        self.data.y_mean()
    }

    /// Refit every subset with the bandwidths of `plan` (all entries
    /// required). Used for the oversmoothed companion model.
    pub fn refit_with(&self, plan: &BandwidthPlan) -> Result<ComponentModel> {
        if !plan.is_complete() {
            return Err(ShapError::Config(
                "refit requires a complete bandwidth plan".into(),
            ));
        }
        fit_components(&self.data, Some(plan))
    }

    /// Gathers the coordinates of `x` for subset `s`.
    pub fn project(&self, x: &[f64], s: SubsetMask) -> Vec<f64> {
        s.members().iter().map(|&j| x[j]).collect()
    }

    /// Evaluates every subset smoother at the full point `x`; index = mask
    /// bits. Any failure aborts the point.
    pub fn eval_components(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(ShapError::Config(format!(
                "point of length {} for a {}-variable model",
                x.len(),
                self.d()
            )));
        }
        let mut vals = Vec::with_capacity(self.fits.len());
        let mut coords = Vec::with_capacity(self.d());
        for (bits, fit) in self.fits.iter().enumerate() {
            coords.clear();
            for j in 0..self.d() {
                if bits & (1 << j) != 0 {
                    coords.push(x[j]);
                }
            }
            vals.push(fit.eval(&coords)?);
        }
        Ok(vals)
    }

    /// Estimated Shapley values for all variables at one point.
    pub fn estimate_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let vals = self.eval_components(x)?;
        Ok(combine_component_values(&vals, self.d()))
    }

    /// Estimated Shapley curves at many points. Component evaluations are
    /// shared across variables; a failed component marks the whole point
    /// failed for every variable, and partial results are returned with the
    /// per-point flag.
    pub fn estimate_curve(&self, points: &[Vec<f64>]) -> CurveEstimate {
        let d = self.d();
        let rows: Vec<Option<Vec<f64>>> = points
            .par_iter()
            .map(|x| self.estimate_at(x).ok())
            .collect();
        let mut values = Vec::with_capacity(points.len() * d);
        let mut ok = Vec::with_capacity(points.len());
        for row in rows {
            match row {
                Some(phi) => {
                    values.extend_from_slice(&phi);
                    ok.push(true);
                }
                None => {
                    values.extend(std::iter::repeat(f64::NAN).take(d));
                    ok.push(false);
                }
            }
        }
        CurveEstimate::new(points.to_vec(), d, values, ok, EstimatorKind::Component)
    }

    /// Per-subset contributions `w_{j,s} {m_hat_s(x_s) - m_s(x_s)}` against a
    /// supplied truth for the components; their sum reconstructs the
    /// estimation error of the Shapley value itself.
    pub fn weighted_sum_residual<F>(
        &self,
        truth: F,
        x: &[f64],
        j: usize,
    ) -> Result<Vec<(SubsetMask, f64)>>
    where
        F: Fn(SubsetMask, &[f64]) -> Result<f64>,
    {
        let d = self.d();
        if j >= d {
            return Err(ShapError::Config(format!("variable {j} out of range")));
        }
        let vals = self.eval_components(x)?;
        let mut out = Vec::with_capacity(vals.len());
        for s in crate::data::all_subsets(d)? {
            let x_s = self.project(x, s);
            let true_val = truth(s, &x_s)?;
            let w = shapley_weight(j, s).as_f64();
            out.push((s, w * (vals[s.bits() as usize] - true_val)));
        }
        Ok(out)
    }
}

/// Combines per-subset component values (indexed by mask bits) into Shapley
/// values for every variable.
pub fn combine_component_values(vals: &[f64], d: usize) -> Vec<f64> {
    debug_assert_eq!(vals.len(), 1usize << d);
    let inv_binom: Vec<f64> = (0..d)
        .map(|k| 1.0 / (d as f64 * binomial(d - 1, k) as f64))
        .collect();
    let mut phi = vec![0.0; d];
    for (j, slot) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        let mut acc = 0.0;
        for bits in 0..vals.len() {
            if bits & bit != 0 {
                continue;
            }
            let w = inv_binom[(bits as u32).count_ones() as usize];
            acc += w * (vals[bits | bit] - vals[bits]);
        }
        *slot = acc;
    }
    phi
}
