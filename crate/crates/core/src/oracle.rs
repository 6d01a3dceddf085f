//! Ground truth: synthetic data generators and population-level Shapley
//! curves, via closed forms where available, conditional-law quadrature, or
//! a brute-force Monte Carlo evaluator.

use crate::component::combine_component_values;
use crate::data::{Dataset, SubsetMask};
use crate::derive_seed;
use crate::error::{Result, ShapError};
use crate::gaussian::GaussianLaw;
use crate::integration::integrate_component;
use crate::quadrature::QuadratureRule;
use crate::smoothing::AnalyticSurface;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::HashMap;
use std::sync::Mutex;

/// Regression functions of the synthetic generating processes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DgpId {
    /// `-sin(2x1) + cos(2x2) + x3`, d = 3.
    Dgp1Additive,
    /// `-sin(2x1) + cos(3x2) + 0.5x3 + 2cos(x1)sin(2x2)`, d = 3.
    Dgp2Interactive,
    /// `-sin(2x1) + 0.1x2 + 2cos(x1)sin(x2)`, d = 2.
    Dgp3Bivariate,
    /// `sum_j (-1)^j sin(2 pi x_j)` over d variables.
    Dgp4AdditiveD,
    /// Pairwise sine interactions of the first three variables plus the
    /// additive terms of Dgp4, d >= 3.
    Dgp5InteractiveD,
    /// Threshold regression `{psi + theta I(x2 <= c)} x1`, d = 2.
    ThresholdExample,
}

impl DgpId {
    pub fn name(self) -> &'static str {
        match self {
            DgpId::Dgp1Additive => "dgp1",
            DgpId::Dgp2Interactive => "dgp2",
            DgpId::Dgp3Bivariate => "dgp3",
            DgpId::Dgp4AdditiveD => "dgp4",
            DgpId::Dgp5InteractiveD => "dgp5",
            DgpId::ThresholdExample => "threshold",
        }
    }
}

/// Error distribution attached to a generating process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ErrorLaw {
    Normal { sd: f64 },
    /// Student t with 5 degrees of freedom, used as drawn (variance 5/3).
    StudentT5,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdParams {
    pub psi: f64,
    pub theta: f64,
    pub c: f64,
}

/// A fully specified generating process: regression function, covariate law,
/// error law and any shape parameters.
#[derive(Clone, Debug)]
pub struct DgpSpec {
    pub id: DgpId,
    pub d: usize,
    pub law: GaussianLaw,
    pub error: ErrorLaw,
    pub threshold: Option<ThresholdParams>,
}

impl DgpSpec {
    pub fn dgp1(rho: f64) -> Result<Self> {
        Ok(DgpSpec {
            id: DgpId::Dgp1Additive,
            d: 3,
            law: GaussianLaw::equicorrelated(3, 4.0, rho)?,
            error: ErrorLaw::Normal { sd: 1.0 },
            threshold: None,
        })
    }

    pub fn dgp2(rho: f64) -> Result<Self> {
        Ok(DgpSpec {
            id: DgpId::Dgp2Interactive,
            d: 3,
            law: GaussianLaw::equicorrelated(3, 4.0, rho)?,
            error: ErrorLaw::Normal { sd: 1.0 },
            threshold: None,
        })
    }

    pub fn dgp3(rho: f64) -> Result<Self> {
        Ok(DgpSpec {
            id: DgpId::Dgp3Bivariate,
            d: 2,
            law: GaussianLaw::equicorrelated(2, 4.0, rho)?,
            error: ErrorLaw::Normal { sd: 1.0 },
            threshold: None,
        })
    }

    pub fn dgp4(d: usize, rho: f64) -> Result<Self> {
        if d < 1 {
            return Err(ShapError::Config("dgp4 needs d >= 1".into()));
        }
        Ok(DgpSpec {
            id: DgpId::Dgp4AdditiveD,
            d,
            law: GaussianLaw::equicorrelated(d, 4.0, rho)?,
            error: ErrorLaw::Normal { sd: 1.0 },
            threshold: None,
        })
    }

    pub fn dgp5(d: usize, rho: f64) -> Result<Self> {
        if d < 3 {
            return Err(ShapError::Config("dgp5 needs d >= 3".into()));
        }
        Ok(DgpSpec {
            id: DgpId::Dgp5InteractiveD,
            d,
            law: GaussianLaw::equicorrelated(d, 4.0, rho)?,
            error: ErrorLaw::Normal { sd: 1.0 },
            threshold: None,
        })
    }

    /// Fixture constants: psi = 1, theta = 2, c = 0 with independent
    /// standard normal covariates.
    pub fn threshold_example() -> Self {
        DgpSpec {
            id: DgpId::ThresholdExample,
            d: 2,
            law: GaussianLaw::standard(2),
            error: ErrorLaw::Normal { sd: 1.0 },
            threshold: Some(ThresholdParams {
                psi: 1.0,
                theta: 2.0,
                c: 0.0,
            }),
        }
    }

    pub fn with_error(mut self, error: ErrorLaw) -> Self {
        self.error = error;
        self
    }

    /// Pairwise correlation of the (equicorrelated) covariate law.
    pub fn rho(&self) -> f64 {
        if self.d < 2 {
            0.0
        } else {
            self.law.covariance(0, 1) / self.law.covariance(0, 0)
        }
    }

    fn is_independent(&self) -> bool {
        for r in 0..self.d {
            for c in 0..self.d {
                if r != c && self.law.covariance(r, c) != 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// The regression function `m(x)`.
    pub fn regression(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        match self.id {
            DgpId::Dgp1Additive => -(2.0 * x[0]).sin() + (2.0 * x[1]).cos() + x[2],
            DgpId::Dgp2Interactive => {
                -(2.0 * x[0]).sin()
                    + (3.0 * x[1]).cos()
                    + 0.5 * x[2]
                    + 2.0 * x[0].cos() * (2.0 * x[1]).sin()
            }
            DgpId::Dgp3Bivariate => {
                -(2.0 * x[0]).sin() + 0.1 * x[1] + 2.0 * x[0].cos() * x[1].sin()
            }
            DgpId::Dgp4AdditiveD => additive_sines(x),
            DgpId::Dgp5InteractiveD => {
                let pi = std::f64::consts::PI;
                -2.0 * (pi * x[0] * x[1]).sin() - 2.0 * (pi * x[0] * x[2]).sin()
                    + 2.0 * (pi * x[1] * x[2]).sin()
                    + additive_sines(x)
            }
            DgpId::ThresholdExample => {
                let p = self.threshold.expect("threshold parameters");
                (p.psi + p.theta * f64::from(u8::from(x[1] <= p.c))) * x[0]
            }
        }
    }
}

fn additive_sines(x: &[f64]) -> f64 {
    let pi = std::f64::consts::PI;
    x.iter()
        .enumerate()
        .map(|(jj, v)| {
            // one-based index parity: odd variables enter negatively
            let sign = if jj % 2 == 0 { -1.0 } else { 1.0 };
            sign * (2.0 * pi * v).sin()
        })
        .sum()
}

/// Draws a reproducible sample from the process: covariates through the
/// law's Cholesky factor, then one error per observation.
pub fn sample(spec: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(ShapError::Config(format!("sample size {n} too small")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.d;
    let mut x = vec![0.0; n * d];
    let mut y = Vec::with_capacity(n);
    let mut row = vec![0.0; d];
    for i in 0..n {
        spec.law.sample_into(&mut rng, &mut row);
        x[i * d..(i + 1) * d].copy_from_slice(&row);
        let eps = match spec.error {
            ErrorLaw::Normal { sd } => {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            }
            ErrorLaw::StudentT5 => StudentT::new(5.0).expect("valid dof").sample(&mut rng),
            ErrorLaw::None => 0.0,
        };
        y.push(spec.regression(&row) + eps);
    }
    let names = (0..d).map(|j| format!("x{}", j + 1)).collect();
    Dataset::new(x, d, y, names)
}

/// The population component `m_s(x_s) = E(Y | X_s = x_s)`, realized by
/// integrating the regression function against the exact conditional law.
pub fn true_component(
    spec: &DgpSpec,
    s: SubsetMask,
    x_s: &[f64],
    rule: &QuadratureRule,
) -> Result<f64> {
    let m = AnalyticSurface::new(spec.d, |x: &[f64]| spec.regression(x));
    Ok(integrate_component(&m, &spec.law, s, x_s, rule)?.value)
}

/// How a population curve is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleMethod {
    /// Exact formulas; available for the threshold example and for the
    /// additive/bivariate processes under independent covariates.
    ClosedForm,
    /// Tensor Gauss-Hermite quadrature of the components.
    Quadrature { nodes_per_axis: usize },
    /// Seeded Monte Carlo over the conditional laws.
    MonteCarlo { draws: usize, seed: u64 },
}

impl OracleMethod {
    /// A sensible default per process: closed form where supported, tensor
    /// quadrature for the low-frequency three-variable processes, Monte
    /// Carlo for the high-frequency or high-dimensional ones.
    pub fn auto(spec: &DgpSpec) -> OracleMethod {
        if closed_form_supported(spec) {
            return OracleMethod::ClosedForm;
        }
        match spec.id {
            DgpId::Dgp1Additive | DgpId::Dgp2Interactive | DgpId::Dgp3Bivariate => {
                OracleMethod::Quadrature { nodes_per_axis: 40 }
            }
            _ => OracleMethod::MonteCarlo {
                draws: 200_000,
                seed: 0x5eed,
            },
        }
    }
}

fn closed_form_supported(spec: &DgpSpec) -> bool {
    match spec.id {
        DgpId::ThresholdExample => spec.is_independent(),
        DgpId::Dgp1Additive | DgpId::Dgp3Bivariate => spec.is_independent(),
        _ => false,
    }
}

/// A population Shapley curve evaluator. Component values are memoized per
/// `(subset, projected coordinates)` and shared across threads: experiment
/// grids revisit the same axis projections constantly, and the empty-subset
/// integral does not depend on the point at all.
pub struct PopulationCurve {
    spec: DgpSpec,
    method: OracleMethod,
    memo: Mutex<HashMap<(u32, Vec<u64>), f64>>,
    grand_mean: Mutex<Option<f64>>,
}

/// Builds the population curve for a process, or a capability error when the
/// requested method does not apply.
pub fn population_curve(spec: &DgpSpec, method: OracleMethod) -> Result<PopulationCurve> {
    match &method {
        OracleMethod::ClosedForm => {
            if !closed_form_supported(spec) {
                return Err(ShapError::Capability(format!(
                    "no closed-form population curve for {} with this covariate law",
                    spec.id.name()
                )));
            }
        }
        OracleMethod::Quadrature { nodes_per_axis } => {
            if *nodes_per_axis == 0 {
                return Err(ShapError::Config("quadrature needs at least one node".into()));
            }
            if spec.d > 4 {
                return Err(ShapError::Capability(format!(
                    "tensor quadrature over {} free axes is not tractable; use the Monte Carlo oracle",
                    spec.d
                )));
            }
        }
        OracleMethod::MonteCarlo { draws, .. } => {
            if *draws < 10_000 {
                return Err(ShapError::Config(
                    "Monte Carlo oracle needs at least 10^4 draws".into(),
                ));
            }
        }
    }
    Ok(PopulationCurve {
        spec: spec.clone(),
        method,
        memo: Mutex::new(HashMap::new()),
        grand_mean: Mutex::new(None),
    })
}

impl PopulationCurve {
    pub fn spec(&self) -> &DgpSpec {
        &self.spec
    }

    pub fn method(&self) -> &OracleMethod {
        &self.method
    }

    /// `phi_j(x)`.
    pub fn eval(&self, j: usize, x: &[f64]) -> Result<f64> {
        Ok(self.eval_all(x)?[j])
    }

    /// All d Shapley values at one point.
    pub fn eval_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.d {
            return Err(ShapError::Config(format!(
                "point of length {} for a {}-variable process",
                x.len(),
                self.spec.d
            )));
        }
        match &self.method {
            OracleMethod::ClosedForm => closed_form_curve(&self.spec, x),
            OracleMethod::Quadrature { nodes_per_axis } => {
                let rule = QuadratureRule::GaussHermiteProduct {
                    nodes_per_axis: *nodes_per_axis,
                };
                let vals = self.component_values(x, |_s| rule.clone())?;
                Ok(combine_component_values(&vals, self.spec.d))
            }
            OracleMethod::MonteCarlo { draws, seed } => {
                let vals = self.monte_carlo_component_values(x, *draws, *seed)?;
                Ok(combine_component_values(&vals, self.spec.d))
            }
        }
    }

    /// `E(Y)`, computed with the same method as the curve (memoized).
    pub fn mean_response(&self) -> Result<f64> {
        if let Some(v) = *self.grand_mean.lock().unwrap() {
            return Ok(v);
        }
        let empty = SubsetMask::empty(self.spec.d)?;
        let v = match &self.method {
            OracleMethod::ClosedForm => closed_form_mean_response(&self.spec),
            OracleMethod::Quadrature { nodes_per_axis } => true_component(
                &self.spec,
                empty,
                &[],
                &QuadratureRule::GaussHermiteProduct {
                    nodes_per_axis: *nodes_per_axis,
                },
            )?,
            OracleMethod::MonteCarlo { draws, seed } => {
                monte_carlo_component(&self.spec, empty, &[], *draws, *seed)?.0
            }
        };
        *self.grand_mean.lock().unwrap() = Some(v);
        Ok(v)
    }

    fn component_values(
        &self,
        x: &[f64],
        rule_for: impl Fn(SubsetMask) -> QuadratureRule,
    ) -> Result<Vec<f64>> {
        let d = self.spec.d;
        let mut vals = Vec::with_capacity(1usize << d);
        for s in crate::data::all_subsets(d)? {
            let x_s: Vec<f64> = s.members().iter().map(|&j| x[j]).collect();
            let key = (s.bits(), x_s.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            let cached = self.memo.lock().unwrap().get(&key).copied();
            let v = match cached {
                Some(v) => v,
                None => {
                    let v = true_component(&self.spec, s, &x_s, &rule_for(s))?;
                    self.memo.lock().unwrap().insert(key, v);
                    v
                }
            };
            vals.push(v);
        }
        Ok(vals)
    }

    fn monte_carlo_component_values(&self, x: &[f64], draws: usize, seed: u64) -> Result<Vec<f64>> {
        let d = self.spec.d;
        let mut vals = Vec::with_capacity(1usize << d);
        for s in crate::data::all_subsets(d)? {
            let x_s: Vec<f64> = s.members().iter().map(|&j| x[j]).collect();
            let key = (s.bits(), x_s.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            let cached = self.memo.lock().unwrap().get(&key).copied();
            let v = match cached {
                Some(v) => v,
                None => {
                    let v = monte_carlo_component(&self.spec, s, &x_s, draws, seed)?.0;
                    self.memo.lock().unwrap().insert(key, v);
                    v
                }
            };
            vals.push(v);
        }
        Ok(vals)
    }
}

/// Monte Carlo estimate of one component with its standard error, chunked
/// into fixed batches with per-batch substreams so the result is identical
/// for any worker count.
fn monte_carlo_component(
    spec: &DgpSpec,
    s: SubsetMask,
    x_s: &[f64],
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if s.is_full() {
        return Ok((spec.regression(x_s), 0.0));
    }
    const BATCH: usize = 4096;
    let cond = spec.law.conditional(s, x_s)?;
    let members = s.members();
    let free = cond.free_indices().to_vec();
    let d = spec.d;
    let batches = draws.div_ceil(BATCH);
    let mask_seed = derive_seed(seed, s.bits() as u64);
    let partials: Vec<(f64, f64, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
            rng.set_stream(b as u64);
            let take = BATCH.min(draws - b * BATCH);
            let mut point = vec![0.0; d];
            for (k, &j) in members.iter().enumerate() {
                point[j] = x_s[k];
            }
            let mut draw = vec![0.0; free.len()];
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..take {
                cond.sample_into(&mut rng, &mut draw);
                for (a, &j) in free.iter().enumerate() {
                    point[j] = draw[a];
                }
                let v = spec.regression(&point);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq, take)
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (a, b, _) in &partials {
        sum += a;
        sum_sq += b;
    }
    let nf = draws as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

fn monte_carlo_curve_all(
    spec: &DgpSpec,
    x: &[f64],
    draws: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = spec.d;
    let mut vals = Vec::with_capacity(1usize << d);
    let mut ses = Vec::with_capacity(1usize << d);
    for s in crate::data::all_subsets(d)? {
        let x_s: Vec<f64> = s.members().iter().map(|&j| x[j]).collect();
        let (v, se) = monte_carlo_component(spec, s, &x_s, draws, seed)?;
        vals.push(v);
        ses.push(se);
    }
    let phi = combine_component_values(&vals, d);
    let mut phi_se = vec![0.0; d];
    for (j, slot) in phi_se.iter_mut().enumerate() {
        let mut acc = 0.0;
        for s in crate::data::all_subsets(d)? {
            let w = crate::weights::shapley_weight(j, s).as_f64();
            acc += w * w * ses[s.bits() as usize] * ses[s.bits() as usize];
        }
        *slot = acc.sqrt();
    }
    Ok((phi, phi_se))
}

/// Brute-force Monte Carlo Shapley value at a point: every component is
/// averaged over draws from its exact conditional law; the combined standard
/// error treats the per-component streams as independent (which they are).
pub fn brute_force_curve(
    spec: &DgpSpec,
    j: usize,
    x: &[f64],
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if j >= spec.d || x.len() != spec.d {
        return Err(ShapError::Config("brute-force oracle shape mismatch".into()));
    }
    if draws < 10_000 {
        return Err(ShapError::Config(
            "brute-force oracle needs at least 10^4 draws".into(),
        ));
    }
    let (phi, se) = monte_carlo_curve_all(spec, x, draws, seed)?;
    Ok((phi[j], se[j]))
}

// Closed forms. Conditional expectations of sines and cosines of Gaussians
// come from E cos(tZ) = cos(t mu) exp(-t^2 var / 2) and its sine analogue;
// the threshold example follows the worked population formulas of the
// threshold regression model under mean independence.

fn gauss_cos(t: f64, mean: f64, var: f64) -> f64 {
    (t * mean).cos() * (-0.5 * t * t * var).exp()
}

fn gauss_sin(t: f64, mean: f64, var: f64) -> f64 {
    (t * mean).sin() * (-0.5 * t * t * var).exp()
}

fn closed_form_curve(spec: &DgpSpec, x: &[f64]) -> Result<Vec<f64>> {
    let mu = spec.law.mean();
    let var: Vec<f64> = (0..spec.d).map(|j| spec.law.covariance(j, j)).collect();
    match spec.id {
        DgpId::Dgp1Additive => {
            // Independent additive model: each curve is its own centered
            // main effect.
            Ok(vec![
                -(2.0 * x[0]).sin() + gauss_sin(2.0, mu[0], var[0]),
                (2.0 * x[1]).cos() - gauss_cos(2.0, mu[1], var[1]),
                x[2] - mu[2],
            ])
        }
        DgpId::Dgp3Bivariate => {
            // Additive interaction model with independent covariates:
            // phi_1 = g1 - E g1
            //   + (g12 + E2 g12(x1, X2) - E1 g12(X1, x2) - E12 g12) / 2,
            // and symmetrically for phi_2.
            let g1 = -(2.0 * x[0]).sin();
            let e_g1 = -gauss_sin(2.0, mu[0], var[0]);
            let g2 = 0.1 * x[1];
            let e_g2 = 0.1 * mu[1];
            let g12 = 2.0 * x[0].cos() * x[1].sin();
            let e2_g12 = 2.0 * x[0].cos() * gauss_sin(1.0, mu[1], var[1]);
            let e1_g12 = 2.0 * gauss_cos(1.0, mu[0], var[0]) * x[1].sin();
            let e12_g12 = 2.0 * gauss_cos(1.0, mu[0], var[0]) * gauss_sin(1.0, mu[1], var[1]);
            let phi1 = g1 - e_g1 + 0.5 * (g12 + e2_g12 - e1_g12 - e12_g12);
            let phi2 = g2 - e_g2 + 0.5 * (g12 + e1_g12 - e2_g12 - e12_g12);
            Ok(vec![phi1, phi2])
        }
        DgpId::ThresholdExample => {
            let p = spec.threshold.expect("threshold parameters");
            let dist = Normal::new(mu[1], var[1].sqrt())
                .map_err(|e| ShapError::Law(format!("threshold law: {e}")))?;
            let cdf_c = dist.cdf(p.c);
            let ind = f64::from(u8::from(x[1] <= p.c));
            let phi1 = (p.psi + 0.5 * p.theta * ind + 0.5 * p.theta * cdf_c) * (x[0] - mu[0]);
            let phi2 = 0.5 * p.theta * (ind - cdf_c) * (x[0] + mu[0]);
            Ok(vec![phi1, phi2])
        }
        _ => Err(ShapError::Capability(format!(
            "no closed-form population curve for {}",
            spec.id.name()
        ))),
    }
}

fn closed_form_mean_response(spec: &DgpSpec) -> f64 {
    let mu = spec.law.mean();
    let var: Vec<f64> = (0..spec.d).map(|j| spec.law.covariance(j, j)).collect();
    match spec.id {
        DgpId::Dgp1Additive => {
            -gauss_sin(2.0, mu[0], var[0]) + gauss_cos(2.0, mu[1], var[1]) + mu[2]
        }
        DgpId::Dgp3Bivariate => {
            -gauss_sin(2.0, mu[0], var[0])
                + 0.1 * mu[1]
                + 2.0 * gauss_cos(1.0, mu[0], var[0]) * gauss_sin(1.0, mu[1], var[1])
        }
        DgpId::ThresholdExample => {
            let p = spec.threshold.expect("threshold parameters");
            let dist = Normal::new(mu[1], var[1].sqrt()).expect("valid threshold law");
            (p.psi + p.theta * dist.cdf(p.c)) * mu[0]
        }
        _ => unreachable!("closed form availability checked at construction"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sampling_is_reproducible() {
        let spec = DgpSpec::dgp1(0.0).unwrap();
        let a = sample(&spec, 5, 7).unwrap();
        let b = sample(&spec, 5, 7).unwrap();
        assert_eq!(a, b);
        let c = sample(&spec, 5, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_correlation_matches_the_law() {
        let spec = DgpSpec::dgp2(0.8).unwrap();
        let data = sample(&spec, 100_000, 3).unwrap();
        let m0 = data.column_mean(0);
        let m1 = data.column_mean(1);
        let mut cov = 0.0;
        let mut v0 = 0.0;
        let mut v1 = 0.0;
        for i in 0..data.n() {
            let a = data.value(i, 0) - m0;
            let b = data.value(i, 1) - m1;
            cov += a * b;
            v0 += a * a;
            v1 += b * b;
        }
        let corr = cov / (v0 * v1).sqrt();
        assert!((corr - 0.8).abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn noiseless_sample_equals_the_regression() {
        let spec = DgpSpec::dgp3(0.0).unwrap().with_error(ErrorLaw::None);
        let data = sample(&spec, 50, 11).unwrap();
        for i in 0..data.n() {
            assert_eq!(data.y()[i], spec.regression(data.row(i)));
        }
    }

    #[test]
    fn full_subset_component_is_the_regression() {
        let spec = DgpSpec::dgp2(0.8).unwrap();
        let s = SubsetMask::full(3).unwrap();
        let x = [0.5, -0.5, 1.0];
        let v = true_component(
            &spec,
            s,
            &x,
            &QuadratureRule::GaussHermiteProduct { nodes_per_axis: 10 },
        )
        .unwrap();
        assert_eq!(v, spec.regression(&x));
    }

    #[test]
    fn dgp1_third_component_has_a_characteristic_function_form() {
        // Independent case, s = {x3}: m_s(x3) = x3 + E cos(2 X2), and the
        // Gaussian cosine moment is exp(-2 sigma^2) = exp(-8).
        let spec = DgpSpec::dgp1(0.0).unwrap();
        let s = SubsetMask::singleton(2, 3).unwrap();
        let rule = QuadratureRule::GaussHermiteProduct { nodes_per_axis: 40 };
        for x3 in [-1.0, 0.0, 2.0] {
            let v = true_component(&spec, s, &[x3], &rule).unwrap();
            let expected = x3 + (-8.0f64).exp();
            assert_relative_eq!(v, expected, epsilon = 1e-9);
        }
        // Cross-check by Monte Carlo.
        let (mc, se) = monte_carlo_component(&spec, s, &[0.5], 200_000, 9).unwrap();
        assert!((mc - (0.5 + (-8.0f64).exp())).abs() < 3.0 * se + 1e-3);
    }

    #[test]
    fn threshold_single_variable_component() {
        // Independent case, s = {x1}: m_s(x1) = {psi + theta F(c)} x1.
        let spec = DgpSpec::threshold_example();
        let s = SubsetMask::singleton(0, 2).unwrap();
        let rule = QuadratureRule::GaussHermiteProduct { nodes_per_axis: 40 };
        for x1 in [-1.5, 0.7] {
            let v = true_component(&spec, s, &[x1], &rule).unwrap();
            assert_relative_eq!(v, 2.0 * x1, epsilon = 1e-9);
        }
    }

    #[test]
    fn threshold_closed_form_fixture_values() {
        let spec = DgpSpec::threshold_example();
        let curve = population_curve(&spec, OracleMethod::ClosedForm).unwrap();
        let phi = curve.eval_all(&[1.0, -1.0]).unwrap();
        assert_relative_eq!(phi[0], 2.5, max_relative = 1e-12);
        assert_relative_eq!(phi[1], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_capability_errors() {
        let dependent = DgpSpec::dgp1(0.8).unwrap();
        assert!(matches!(
            population_curve(&dependent, OracleMethod::ClosedForm),
            Err(ShapError::Capability(_))
        ));
        assert!(population_curve(&DgpSpec::dgp2(0.0).unwrap(), OracleMethod::ClosedForm).is_err());
    }

    #[test]
    fn additivity_of_population_curves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        use rand::Rng;
        for (spec, method) in [
            (DgpSpec::dgp1(0.0).unwrap(), OracleMethod::ClosedForm),
            (
                DgpSpec::dgp1(0.8).unwrap(),
                OracleMethod::Quadrature { nodes_per_axis: 40 },
            ),
            (
                DgpSpec::dgp3(0.8).unwrap(),
                OracleMethod::Quadrature { nodes_per_axis: 40 },
            ),
            (DgpSpec::threshold_example(), OracleMethod::ClosedForm),
        ] {
            let curve = population_curve(&spec, method).unwrap();
            let ey = curve.mean_response().unwrap();
            for _ in 0..8 {
                let x: Vec<f64> = (0..spec.d).map(|_| rng.random::<f64>() * 3.0 - 1.5).collect();
                let phi = curve.eval_all(&x).unwrap();
                let total: f64 = phi.iter().sum();
                let expected = spec.regression(&x) - ey;
                assert!(
                    (total - expected).abs() < 1e-8,
                    "{}: additivity off by {}",
                    spec.id.name(),
                    total - expected
                );
            }
        }
    }

    #[test]
    fn quadrature_matches_closed_form_for_dgp1() {
        let spec = DgpSpec::dgp1(0.0).unwrap();
        let closed = population_curve(&spec, OracleMethod::ClosedForm).unwrap();
        let quad =
            population_curve(&spec, OracleMethod::Quadrature { nodes_per_axis: 40 }).unwrap();
        for x in [[0.5, -0.5, 1.0], [-1.2, 0.3, 0.0]] {
            let a = closed.eval_all(&x).unwrap();
            let b = quad.eval_all(&x).unwrap();
            for j in 0..3 {
                assert!((a[j] - b[j]).abs() < 1e-6, "j={j}: {} vs {}", a[j], b[j]);
            }
        }
    }

    #[test]
    fn example_one_structure_for_dgp1() {
        // The first curve's x-dependence is -sin(2 x1) up to a constant.
        let spec = DgpSpec::dgp1(0.0).unwrap();
        let quad =
            population_curve(&spec, OracleMethod::Quadrature { nodes_per_axis: 40 }).unwrap();
        let reference = quad.eval(0, &[0.0, 0.0, 0.0]).unwrap();
        for x1 in [-1.5, -0.4, 0.9, 1.7] {
            let v = quad.eval(0, &[x1, 0.0, 0.0]).unwrap();
            let expected = -(2.0 * x1).sin() - 0.0;
            assert!(
                ((v - reference) - expected).abs() < 1e-6,
                "x1={x1}: {} vs {}",
                v - reference,
                expected
            );
        }
    }

    #[test]
    fn brute_force_agrees_with_threshold_closed_form() {
        let spec = DgpSpec::threshold_example();
        let closed = population_curve(&spec, OracleMethod::ClosedForm).unwrap();
        for (k, x) in [[0.8, -0.6], [-1.1, 0.4], [0.3, 0.1]].iter().enumerate() {
            for j in 0..2 {
                let (mc, se) = brute_force_curve(&spec, j, x, 50_000, 11 + k as u64).unwrap();
                let truth = closed.eval(j, x).unwrap();
                assert!(
                    (mc - truth).abs() < 3.0 * se + 1e-6,
                    "j={j} x={x:?}: {mc} vs {truth} (se {se})"
                );
            }
        }
    }

    #[test]
    fn brute_force_standard_error_scales_with_draws() {
        let spec = DgpSpec::dgp3(0.0).unwrap();
        let x = [0.4, -0.8];
        let (_, se1) = brute_force_curve(&spec, 0, &x, 20_000, 3).unwrap();
        let (_, se4) = brute_force_curve(&spec, 0, &x, 80_000, 3).unwrap();
        let ratio = se1 / se4;
        assert!((1.6..=2.4).contains(&ratio), "SE ratio {ratio}");
    }

    #[test]
    fn dgp4_alternating_symmetry_at_the_origin() {
        // Exchangeable covariates and alternating signed terms: adjacent
        // variables mirror each other at x = 0.
        let spec = DgpSpec::dgp4(4, 0.8).unwrap();
        let x = [0.0; 4];
        let mut phis = Vec::new();
        let mut ses = Vec::new();
        for j in 0..4 {
            let (v, se) = brute_force_curve(&spec, j, &x, 60_000, 21).unwrap();
            phis.push(v);
            ses.push(se);
        }
        for j in (0..4).step_by(2) {
            let tol = 4.0 * (ses[j] + ses[j + 1]) + 1e-3;
            assert!(
                (phis[j] + phis[j + 1]).abs() < tol,
                "pair ({j},{}): {} vs {}",
                j + 1,
                phis[j],
                phis[j + 1]
            );
        }
    }

    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;
}
