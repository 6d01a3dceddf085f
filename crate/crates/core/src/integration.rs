//! The integration-based Shapley curve estimator: one full-model pilot fit,
//! with lower components obtained by integrating the pilot against the
//! conditional covariate law (known Gaussian) or by averaging over the
//! sample (explicit independence mode).

use crate::data::{CurveEstimate, Dataset, EstimatorKind, SubsetMask};
use crate::derive_seed;
use crate::error::{Result, ShapError};
use crate::gaussian::GaussianLaw;
use crate::quadrature::{integrate_conditional, QuadratureRule};
use crate::smoothing::{
    default_candidate_grids, local_linear_fit, loo_cv_bandwidth, second_derivatives, LocalFit,
    Surface,
};
use crate::weights::shapley_weight;
use crate::component::combine_component_values;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Mutex;

/// Quadrature mass that may be lost to pilot evaluation failures before the
/// component value is rejected as unreliable.
pub const MAX_DROPPED_MASS: f64 = 0.2;

/// Value of one integrated component together with diagnostics about how
/// much quadrature mass was dropped at failed pilot evaluations.
#[derive(Clone, Copy, Debug)]
pub struct ComponentIntegral {
    pub value: f64,
    pub dropped_mass: f64,
    pub std_error: Option<f64>,
}

/// Integrates the pilot over the variables outside `s` against the
/// conditional law given `X_s = x_s`. Failed pilot evaluations are dropped
/// with weight renormalization; more than [`MAX_DROPPED_MASS`] dropped is an
/// error because the remaining average no longer represents the component.
pub fn integrate_component(
    pilot: &dyn Surface,
    law: &GaussianLaw,
    s: SubsetMask,
    x_s: &[f64],
    rule: &QuadratureRule,
) -> Result<ComponentIntegral> {
    let d = law.dim();
    if pilot.dim() != d || s.dim() != d {
        return Err(ShapError::Config(format!(
            "pilot of dimension {}, law of dimension {d}, subset over {}",
            pilot.dim(),
            s.dim()
        )));
    }
    if x_s.len() != s.cardinality() {
        return Err(ShapError::Config(format!(
            "{} coordinates for subset {s}",
            x_s.len()
        )));
    }
    if s.is_full() {
        return Ok(ComponentIntegral {
            value: pilot.eval(x_s)?,
            dropped_mass: 0.0,
            std_error: None,
        });
    }
    let cond = law.conditional(s, x_s)?;
    let members = s.members();
    let free = cond.free_indices().to_vec();
    let mut point = vec![0.0; d];
    for (k, &j) in members.iter().enumerate() {
        point[j] = x_s[k];
    }
    let outcome = integrate_conditional(&cond, rule, |t| {
        for (a, &j) in free.iter().enumerate() {
            point[j] = t[a];
        }
        pilot.eval(&point).ok()
    })?;
    if outcome.dropped_mass > MAX_DROPPED_MASS {
        return Err(ShapError::Integration {
            subset: s,
            reason: format!(
                "{:.1}% of quadrature mass dropped; pilot support too small",
                100.0 * outcome.dropped_mass
            ),
        });
    }
    Ok(ComponentIntegral {
        value: outcome.value,
        dropped_mass: outcome.dropped_mass,
        std_error: outcome.std_error,
    })
}

/// Marginal-integration shortcut for mean-independent regressors: a plain
/// average of pilot evaluations at hybrid points `(x_s, X_{-s,i})`. Failed
/// evaluations are dropped and counted.
pub fn integrate_component_empirical(
    pilot: &dyn Surface,
    data: &Dataset,
    s: SubsetMask,
    x_s: &[f64],
) -> Result<ComponentIntegral> {
    let d = data.d();
    if pilot.dim() != d || s.dim() != d {
        return Err(ShapError::Config(format!(
            "pilot of dimension {}, data of dimension {d}, subset over {}",
            pilot.dim(),
            s.dim()
        )));
    }
    if x_s.len() != s.cardinality() {
        return Err(ShapError::Config(format!(
            "{} coordinates for subset {s}",
            x_s.len()
        )));
    }
    if s.is_full() {
        return Ok(ComponentIntegral {
            value: pilot.eval(x_s)?,
            dropped_mass: 0.0,
            std_error: None,
        });
    }
    let members = s.members();
    let free = s.complement().members();
    let mut point = vec![0.0; d];
    for (k, &j) in members.iter().enumerate() {
        point[j] = x_s[k];
    }
    let mut kept = 0usize;
    let mut acc = 0.0;
    for i in 0..data.n() {
        let row = data.row(i);
        for &j in &free {
            point[j] = row[j];
        }
        if let Ok(v) = pilot.eval(&point) {
            acc += v;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(ShapError::Integration {
            subset: s,
            reason: "every hybrid-point evaluation failed".into(),
        });
    }
    let dropped = data.n() - kept;
    Ok(ComponentIntegral {
        value: acc / kept as f64,
        dropped_mass: dropped as f64 / data.n() as f64,
        std_error: None,
    })
}

/// Which covariate law the integration estimator integrates against.
#[derive(Clone, Debug)]
pub enum IntegrationDensity {
    /// Known multivariate Gaussian law; components via conditional-law
    /// quadrature.
    Known(GaussianLaw),
    /// Mean-independence assumed; components via sample averaging. Must be
    /// chosen explicitly by the caller.
    EmpiricalIndependent,
}

/// The fitted integration estimator: a full-model pilot plus the density it
/// is integrated against.
#[derive(Clone, Debug)]
pub struct IntegrationModel {
    data: std::sync::Arc<Dataset>,
    pilot: LocalFit,
    density: IntegrationDensity,
    nodes_per_axis: usize,
    mc_draws: usize,
    seed: u64,
}

/// Fits the pilot (cross-validated full-model bandwidths unless given) and
/// freezes the integration policy.
pub fn fit_integration(
    data: &std::sync::Arc<Dataset>,
    density: IntegrationDensity,
    pilot_bandwidths: Option<&[f64]>,
    seed: u64,
) -> Result<IntegrationModel> {
    if let IntegrationDensity::Known(law) = &density {
        if law.dim() != data.d() {
            return Err(ShapError::Config(format!(
                "law of dimension {} for {}-column data",
                law.dim(),
                data.d()
            )));
        }
    }
    let h = match pilot_bandwidths {
        Some(h) => h.to_vec(),
        None => {
            let grids = default_candidate_grids(data, crate::component::DEFAULT_CV_CANDIDATES);
            loo_cv_bandwidth(data, &grids)?
        }
    };
    let pilot = local_linear_fit(data, &h)?;
    Ok(IntegrationModel {
        data: data.clone(),
        pilot,
        density,
        nodes_per_axis: 20,
        mc_draws: 4096,
        seed,
    })
}

impl IntegrationModel {
    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn pilot(&self) -> &LocalFit {
        &self.pilot
    }

    pub fn density(&self) -> &IntegrationDensity {
        &self.density
    }

    /// Tensor quadrature size per free axis (Gauss-Hermite path).
    pub fn with_nodes_per_axis(mut self, nodes: usize) -> Self {
        self.nodes_per_axis = nodes;
        self
    }

    fn rule_for(&self, s: SubsetMask) -> QuadratureRule {
        let free = self.d() - s.cardinality();
        if free <= 3 {
            QuadratureRule::GaussHermiteProduct {
                nodes_per_axis: self.nodes_per_axis,
            }
        } else {
            QuadratureRule::MonteCarlo {
                draws: self.mc_draws,
                seed: derive_seed(self.seed, s.bits() as u64),
            }
        }
    }

    /// One integrated component value.
    pub fn component_value(&self, s: SubsetMask, x_s: &[f64]) -> Result<f64> {
        match &self.density {
            IntegrationDensity::Known(law) => {
                Ok(integrate_component(&self.pilot, law, s, x_s, &self.rule_for(s))?.value)
            }
            IntegrationDensity::EmpiricalIndependent => {
                Ok(integrate_component_empirical(&self.pilot, &self.data, s, x_s)?.value)
            }
        }
    }

    /// The component of the empty subset: the pilot integrated against the
    /// unconditional law (or averaged over the sample). Keeping this as an
    /// integral rather than substituting the sample mean of `y` keeps the
    /// estimator self-consistent under the efficiency identity.
    pub fn grand_mean(&self) -> Result<f64> {
        self.component_value(SubsetMask::empty(self.d())?, &[])
    }

    /// Shapley values for all variables at one point.
    pub fn estimate_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.d();
        let mut vals = Vec::with_capacity(1usize << d);
        for s in crate::data::all_subsets(d)? {
            let x_s: Vec<f64> = s.members().iter().map(|&j| x[j]).collect();
            vals.push(self.component_value(s, &x_s)?);
        }
        Ok(combine_component_values(&vals, d))
    }

    /// Shapley curves on a point set. Component values are cached per
    /// `(subset, projected coordinates)` within the call, so dense grids
    /// whose projections collide pay each integral once.
    pub fn estimate_curve(&self, points: &[Vec<f64>]) -> CurveEstimate {
        let d = self.d();
        let cache: Mutex<HashMap<(u32, Vec<u64>), Option<f64>>> = Mutex::new(HashMap::new());
        let masks = crate::data::all_subsets(d).expect("dimension already validated");

        let rows: Vec<Option<Vec<f64>>> = points
            .par_iter()
            .map(|x| {
                let mut vals = Vec::with_capacity(masks.len());
                for &s in &masks {
                    let x_s: Vec<f64> = s.members().iter().map(|&j| x[j]).collect();
                    let key = (s.bits(), x_s.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
                    let cached = cache.lock().unwrap().get(&key).copied();
                    let value = match cached {
                        Some(v) => v,
                        None => {
                            let v = self.component_value(s, &x_s).ok();
                            cache.lock().unwrap().insert(key, v);
                            v
                        }
                    };
                    match value {
                        Some(v) => vals.push(v),
                        None => return None,
                    }
                }
                Some(combine_component_values(&vals, d))
            })
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
        CurveEstimate::new(points.to_vec(), d, values, ok, EstimatorKind::Integration)
    }
}

/// Plug-in for the asymptotic bias of the integration estimator at `x` for
/// variable `j`, in curve units: every subset contributes the integrated
/// (finite-difference) curvature of the pilot against its conditional law,
/// with each direction's curvature scaled by the squared pilot bandwidth.
/// The bandwidths double as the finite-difference steps, matching the
/// smoothing scale of the pilot.
pub fn integration_bias_diagnostic(
    pilot: &dyn Surface,
    law: &GaussianLaw,
    x: &[f64],
    j: usize,
    pilot_bandwidths: &[f64],
    rule_seed: u64,
) -> Result<f64> {
    let d = law.dim();
    if pilot.dim() != d || x.len() != d || j >= d || pilot_bandwidths.len() != d {
        return Err(ShapError::Config("bias diagnostic shape mismatch".into()));
    }
    let steps = pilot_bandwidths.to_vec();
    let h_sq: Vec<f64> = steps.iter().map(|h| h * h).collect();
    let scaled_laplacian = |point: &[f64]| -> Result<f64> {
        let der = second_derivatives(pilot, point, &steps)?;
        Ok(der.iter().zip(&h_sq).map(|(v, hs)| v * hs).sum())
    };

    let mu2 = crate::smoothing::Kernel::Gaussian.second_moment();
    let mut total = 0.0;
    for s in crate::data::all_subsets(d)? {
        let w = shapley_weight(j, s).as_f64();
        let x_s: Vec<f64> = s.members().iter().map(|&k| x[k]).collect();
        let inner = if s.is_full() {
            scaled_laplacian(x)?
        } else {
            let cond = law.conditional(s, &x_s)?;
            let members = s.members();
            let free = cond.free_indices().to_vec();
            let rule = if free.len() <= 3 {
                QuadratureRule::GaussHermiteProduct { nodes_per_axis: 10 }
            } else {
                QuadratureRule::MonteCarlo {
                    draws: 1024,
                    seed: derive_seed(rule_seed, s.bits() as u64),
                }
            };
            let mut point = vec![0.0; d];
            for (k, &m) in members.iter().enumerate() {
                point[m] = x_s[k];
            }
            let outcome = integrate_conditional(&cond, &rule, |t| {
                for (a, &m) in free.iter().enumerate() {
                    point[m] = t[a];
                }
                scaled_laplacian(&point).ok()
            })?;
            if outcome.dropped_mass > MAX_DROPPED_MASS {
                return Err(ShapError::Integration {
                    subset: s,
                    reason: "too many failed curvature stencils".into(),
                });
            }
            outcome.value
        };
        total += w * inner;
    }
    Ok(0.5 * mu2 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::smoothing::AnalyticSurface;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn gh_rule(nodes: usize) -> QuadratureRule {
        QuadratureRule::GaussHermiteProduct { nodes_per_axis: nodes }
    }

    #[test]
    fn full_subset_is_a_direct_pilot_evaluation() {
        let pilot = AnalyticSurface::new(2, |x: &[f64]| x[0] * x[0] - x[1]);
        let law = GaussianLaw::equicorrelated(2, 4.0, 0.8).unwrap();
        let s = SubsetMask::full(2).unwrap();
        let out = integrate_component(&pilot, &law, s, &[1.5, -2.0], &gh_rule(20)).unwrap();
        assert_eq!(out.value, 1.5 * 1.5 - (-2.0));
    }

    #[test]
    fn constant_pilot_integrates_to_the_constant() {
        let pilot = AnalyticSurface::new(3, |_: &[f64]| 4.25);
        let law = GaussianLaw::equicorrelated(3, 4.0, 0.8).unwrap();
        for s in crate::data::all_subsets(3).unwrap() {
            let x_s = vec![0.3; s.cardinality()];
            let out = integrate_component(&pilot, &law, s, &x_s, &gh_rule(20)).unwrap();
            assert_relative_eq!(out.value, 4.25, max_relative = 1e-12);
        }
    }

    #[test]
    fn linear_pilot_recovers_the_conditional_mean() {
        // Pilot m(x) = x2 with var 4, rho 0.8: conditioning on x1 = 2 gives
        // E(X2 | X1 = 2) = 1.6, and Gauss-Hermite integrates degree one
        // exactly.
        let pilot = AnalyticSurface::new(2, |x: &[f64]| x[1]);
        let law = GaussianLaw::equicorrelated(2, 4.0, 0.8).unwrap();
        let s = SubsetMask::singleton(0, 2).unwrap();
        let out = integrate_component(&pilot, &law, s, &[2.0], &gh_rule(20)).unwrap();
        assert!((out.value - 1.6).abs() < 1e-10, "{}", out.value);
    }

    #[test]
    fn excessive_dropped_mass_is_an_error() {
        // A pilot that fails beyond a narrow band drops most of the law's
        // mass.
        struct Narrow;
        impl Surface for Narrow {
            fn dim(&self) -> usize {
                2
            }
            fn eval(&self, x: &[f64]) -> Result<f64> {
                if x[1].abs() < 0.1 {
                    Ok(1.0)
                } else {
                    Err(ShapError::estimation(x, "outside support"))
                }
            }
        }
        let law = GaussianLaw::equicorrelated(2, 4.0, 0.0).unwrap();
        let s = SubsetMask::singleton(0, 2).unwrap();
        let err = integrate_component(&Narrow, &law, s, &[0.0], &gh_rule(20)).unwrap_err();
        assert!(matches!(err, ShapError::Integration { .. }));
    }

    fn sample_data(n: usize, seed: u64) -> Arc<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| (2.0 * r[0]).sin() + r[1] + 0.2 * (rng.random::<f64>() - 0.5))
            .collect();
        Arc::new(Dataset::from_rows(&rows, y, vec!["x1".into(), "x2".into()]).unwrap())
    }

    #[test]
    fn empirical_average_matches_closed_form_expectation() {
        let data = sample_data(400, 3);
        let pilot = AnalyticSurface::new(2, |x: &[f64]| x[0] * x[1]);
        let s = SubsetMask::singleton(0, 2).unwrap();
        let out = integrate_component_empirical(&pilot, &data, s, &[2.0]).unwrap();
        let mean_x2 = data.column_mean(1);
        assert_relative_eq!(out.value, 2.0 * mean_x2, max_relative = 1e-12);
        assert_eq!(out.dropped_mass, 0.0);

        // Full subset short-circuits to the pilot.
        let full = SubsetMask::full(2).unwrap();
        let direct = integrate_component_empirical(&pilot, &data, full, &[1.0, 3.0]).unwrap();
        assert_eq!(direct.value, 3.0);
    }

    #[test]
    fn one_dimensional_curve_collapses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![rng.random::<f64>() * 4.0 - 2.0])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0].cos()).collect();
        let data = Arc::new(Dataset::from_rows(&rows, y, vec!["x1".into()]).unwrap());
        let law = GaussianLaw::equicorrelated(1, 1.0, 0.0).unwrap();
        let model =
            fit_integration(&data, IntegrationDensity::Known(law), Some(&[0.5]), 1).unwrap();
        let grand = model.grand_mean().unwrap();
        for q in [-0.5, 0.0, 1.0] {
            let phi = model.estimate_at(&[q]).unwrap();
            let direct = model.pilot().eval(&[q]).unwrap() - grand;
            assert_relative_eq!(phi[0], direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn efficiency_identity_for_integration_curves() {
        let data = sample_data(250, 11);
        let law = GaussianLaw::equicorrelated(2, 4.0 / 3.0, 0.3).unwrap();
        let model =
            fit_integration(&data, IntegrationDensity::Known(law), Some(&[0.45, 0.45]), 7)
                .unwrap();
        let grand = model.grand_mean().unwrap();
        let points: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.6, -0.4], vec![-1.0, 0.8]];
        let est = model.estimate_curve(&points);
        for (p, x) in points.iter().enumerate() {
            assert!(est.is_ok(p));
            let total: f64 = (0..2).map(|j| est.value(p, j)).sum();
            let expected = model.pilot().eval(x).unwrap() - grand;
            assert!(
                (total - expected).abs() < 1e-10,
                "point {p}: {total} vs {expected}"
            );
        }
    }

    #[test]
    fn curve_and_pointwise_paths_agree() {
        let data = sample_data(150, 13);
        let law = GaussianLaw::equicorrelated(2, 2.0, 0.0).unwrap();
        let model =
            fit_integration(&data, IntegrationDensity::Known(law), Some(&[0.5, 0.5]), 3).unwrap();
        let x = vec![0.3, -0.2];
        let est = model.estimate_curve(&[x.clone()]);
        let direct = model.estimate_at(&x).unwrap();
        for j in 0..2 {
            assert_eq!(est.value(0, j).to_bits(), direct[j].to_bits());
        }
    }

    #[test]
    fn bias_diagnostic_vanishes_for_linear_pilots() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + 2.0 * r[0] - r[1]).collect();
        let data = Arc::new(Dataset::from_rows(&rows, y, vec!["x1".into(), "x2".into()]).unwrap());
        let pilot = local_linear_fit(&data, &[0.8, 0.8]).unwrap();
        let law = GaussianLaw::equicorrelated(2, 1.0, 0.0).unwrap();
        let b = integration_bias_diagnostic(&pilot, &law, &[0.2, 0.1], 0, &[0.8, 0.8], 0).unwrap();
        assert!(b.abs() < 1e-6, "bias diagnostic {b} on a linear fit");
    }

    #[test]
    fn constant_curvature_cancels_by_the_weight_identity() {
        // Injected pilot x1^2 under an independent standard law: the
        // integrated curvature is the same constant for every subset, and
        // the signed weights sum to zero.
        let pilot = AnalyticSurface::new(2, |x: &[f64]| x[0] * x[0]);
        let law = GaussianLaw::standard(2);
        let b = integration_bias_diagnostic(&pilot, &law, &[0.0, 0.0], 0, &[0.6, 0.6], 0).unwrap();
        assert!(b.abs() < 1e-10, "constant-curvature diagnostic {b}");
    }
}
