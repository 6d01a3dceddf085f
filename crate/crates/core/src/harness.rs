//! Monte Carlo experiment engine: MISE and coverage studies against the
//! population oracles, cumulative curve stacks, and empirical rate checks.

use crate::component::{fit_components, ComponentModel};
use crate::data::Dataset;
use crate::derive_seed;
use crate::error::{Result, ShapError};
use crate::inference::{wild_bootstrap_ci, BootstrapConfig};
use crate::integration::{fit_integration, IntegrationDensity, IntegrationModel};
use crate::oracle::{population_curve, sample, DgpSpec, OracleMethod, PopulationCurve};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

/// Which estimator(s) a MISE experiment runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorChoice {
    Component,
    Integration,
    Both,
}

impl EstimatorChoice {
    fn labels(self) -> Vec<&'static str> {
        match self {
            EstimatorChoice::Component => vec!["component"],
            EstimatorChoice::Integration => vec!["integration"],
            EstimatorChoice::Both => vec!["component", "integration"],
        }
    }
}

/// Integration region for the squared-error integral.
#[derive(Clone, Debug)]
pub enum Region {
    Hypercube { lo: f64, hi: f64 },
    PerAxis(Vec<(f64, f64)>),
    /// Per-axis empirical quantile range of the replication's own sample.
    EmpiricalQuantile { p_lo: f64, p_hi: f64 },
}

impl Region {
    fn resolve(&self, data: &Dataset) -> Result<Vec<(f64, f64)>> {
        let d = data.d();
        let bounds = match self {
            Region::Hypercube { lo, hi } => {
                if !(hi > lo) {
                    return Err(ShapError::Config(format!("degenerate region [{lo}, {hi}]")));
                }
                vec![(*lo, *hi); d]
            }
            Region::PerAxis(v) => {
                if v.len() != d || v.iter().any(|(a, b)| !(b > a)) {
                    return Err(ShapError::Config("bad per-axis region".into()));
                }
                v.clone()
            }
            Region::EmpiricalQuantile { p_lo, p_hi } => {
                if !(0.0..1.0).contains(p_lo) || !(*p_lo < *p_hi) || !(0.0..=1.0).contains(p_hi) {
                    return Err(ShapError::Config("bad quantile region".into()));
                }
                (0..d)
                    .map(|j| {
                        let mut col = data.column(j);
                        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        (
                            crate::inference::quantile_type7(&col, *p_lo),
                            crate::inference::quantile_type7(&col, *p_hi),
                        )
                    })
                    .collect()
            }
        };
        Ok(bounds)
    }
}

/// How the squared-error integral over the region is computed.
#[derive(Clone, Debug)]
pub enum MiseIntegration {
    /// Dyadic midpoint refinement of hypercubes until the pass-to-pass
    /// change of the integral is below `rel_tol` or the depth cap is hit.
    AdaptiveGrid { rel_tol: f64, max_depth: usize },
    /// Average squared error over the replication's own sample points.
    SampleAverage,
}

impl Default for MiseIntegration {
    fn default() -> Self {
        MiseIntegration::AdaptiveGrid {
            rel_tol: 1e-3,
            max_depth: 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MiseConfig {
    pub spec: DgpSpec,
    pub n: usize,
    pub replications: usize,
    pub estimator: EstimatorChoice,
    /// Variables to score; all when empty.
    pub variables: Vec<usize>,
    pub region: Region,
    pub integration: MiseIntegration,
    /// Population oracle; [`OracleMethod::auto`] when absent.
    pub oracle: Option<OracleMethod>,
    pub seed: u64,
}

impl MiseConfig {
    pub fn new(spec: DgpSpec, n: usize, replications: usize, seed: u64) -> Self {
        MiseConfig {
            spec,
            n,
            replications,
            estimator: EstimatorChoice::Component,
            variables: Vec::new(),
            region: Region::Hypercube { lo: -2.0, hi: 2.0 },
            integration: MiseIntegration::default(),
            oracle: None,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoverageConfig {
    pub spec: DgpSpec,
    pub point: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    pub bootstrap_replicates: usize,
    pub alphas: Vec<f64>,
    pub oracle: Option<OracleMethod>,
    pub seed: u64,
}

impl CoverageConfig {
    /// The bivariate non-linear process at the interior point `(-0.5, -0.5)`
    /// with the standard significance ladder.
    pub fn standard(n: usize, replications: usize, bootstrap_replicates: usize, seed: u64) -> Result<Self> {
        Ok(CoverageConfig {
            spec: DgpSpec::dgp3(0.0)?,
            point: vec![-0.5, -0.5],
            n,
            replications,
            bootstrap_replicates,
            alphas: vec![0.15, 0.1, 0.05],
            oracle: None,
            seed,
        })
    }
}

/// One aggregated cell of an experiment.
#[derive(Clone, Debug)]
pub struct ReportRow {
    pub dgp: String,
    pub rho: f64,
    pub n: usize,
    pub estimator: String,
    /// One-based variable index, matching the synthetic column names.
    pub variable: usize,
    pub statistic: String,
    pub value: f64,
    pub se: f64,
    pub failures: usize,
    pub seconds: f64,
}

/// Aggregated experiment output: one row per cell, each with its Monte Carlo
/// standard error, the replication count, the seed and a config echo.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub replications: usize,
    pub seed: u64,
    pub config_echo: String,
}

impl ExperimentReport {
    /// Fixed-order CSV rendering (`seconds` is wall-clock and therefore the
    /// only column that varies between reruns of the same seed).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dgp,rho,n,estimator,variable,statistic,value,se,failures,seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{:.3}\n",
                r.dgp, r.rho, r.n, r.estimator, r.variable, r.statistic, r.value, r.se,
                r.failures, r.seconds
            ));
        }
        out
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>5} {:>6} {:<12} {:>8} {:<22} {:>12} {:>10} {:>8} {:>8}\n",
            "dgp", "rho", "n", "estimator", "variable", "statistic", "value", "se", "fail", "sec"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<10} {:>5} {:>6} {:<12} {:>8} {:<22} {:>12.5} {:>10.5} {:>8} {:>8.2}\n",
                r.dgp,
                r.rho,
                r.n,
                r.estimator,
                r.variable + 1,
                r.statistic,
                r.value,
                r.se,
                r.failures,
                r.seconds
            ));
        }
        out
    }
}

/// Cubature over an axis-aligned box by dyadic refinement of the cells that
/// dominate the running total, with a two-node tensor Gauss-Legendre rule
/// per cell (the per-cell error is fourth order, so the contribution-driven
/// refinement is not left chasing accumulated low-order bias). Returns one
/// integral per integrand coordinate.
pub fn adaptive_cubature<F>(
    bounds: &[(f64, f64)],
    out_len: usize,
    rel_tol: f64,
    max_depth: usize,
    f: &mut F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let d = bounds.len();
    if d == 0 || out_len == 0 {
        return Err(ShapError::Config("empty cubature problem".into()));
    }
    struct Cell {
        center: Vec<f64>,
        half: Vec<f64>,
        depth: usize,
        contribution: Vec<f64>,
    }
    let gl_offset = 1.0 / 3f64.sqrt();
    let eval_cell = |center: Vec<f64>, half: Vec<f64>, depth: usize, f: &mut F| -> Result<Cell> {
        let volume: f64 = half.iter().map(|h| 2.0 * h).product();
        let nodes = 1usize << d;
        let mut acc = vec![0.0; out_len];
        let mut point = vec![0.0; d];
        for c in 0..nodes {
            for k in 0..d {
                let sign = if c & (1 << k) == 0 { -1.0 } else { 1.0 };
                point[k] = center[k] + sign * gl_offset * half[k];
            }
            let raw = f(&point)?;
            if raw.len() != out_len {
                return Err(ShapError::Config("integrand arity changed".into()));
            }
            for (slot, v) in acc.iter_mut().zip(&raw) {
                *slot += v;
            }
        }
        let scale = volume / nodes as f64;
        Ok(Cell {
            center,
            half,
            depth,
            contribution: acc.iter().map(|v| v * scale).collect(),
        })
    };

    // Seed with a uniform dyadic split so the refinement criterion has
    // something representative to compare against.
    let initial_depth = if d <= 3 { 2 } else { 1 };
    let per_axis = 1usize << initial_depth;
    let mut cells = Vec::new();
    let mut idx = vec![0usize; d];
    for _ in 0..per_axis.pow(d as u32) {
        let mut center = Vec::with_capacity(d);
        let mut half = Vec::with_capacity(d);
        for k in 0..d {
            let width = (bounds[k].1 - bounds[k].0) / per_axis as f64;
            half.push(width / 2.0);
            center.push(bounds[k].0 + (idx[k] as f64 + 0.5) * width);
        }
        cells.push(eval_cell(center, half, initial_depth, f)?);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
        }
    }

    let totals = |cells: &[Cell]| -> Vec<f64> {
        let mut t = vec![0.0; out_len];
        for c in cells {
            for (slot, v) in t.iter_mut().zip(&c.contribution) {
                *slot += v;
            }
        }
        t
    };
    let mut current = totals(&cells);

    loop {
        let floor: Vec<f64> = current.iter().map(|t| t.abs().max(1e-300)).collect();
        let needs_split = |c: &Cell| {
            c.depth < max_depth
                && c.contribution
                    .iter()
                    .zip(&floor)
                    .any(|(v, t)| v.abs() > rel_tol * t)
        };
        if !cells.iter().any(needs_split) {
            break;
        }
        let mut next = Vec::with_capacity(cells.len());
        for cell in cells {
            if !needs_split(&cell) {
                next.push(cell);
                continue;
            }
            let children = 1usize << d;
            for c in 0..children {
                let mut center = cell.center.clone();
                let mut half = cell.half.clone();
                for k in 0..d {
                    half[k] = cell.half[k] / 2.0;
                    let sign = if c & (1 << k) == 0 { -1.0 } else { 1.0 };
                    center[k] = cell.center[k] + sign * half[k];
                }
                next.push(eval_cell(center, half, cell.depth + 1, f)?);
            }
        }
        cells = next;
        let refined = totals(&cells);
        let change = refined
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
            .fold(0.0f64, f64::max);
        current = refined;
        if change < rel_tol {
            break;
        }
    }
    Ok(current)
}

enum FittedCurve {
    Component(ComponentModel),
    Integration {
        model: IntegrationModel,
        cache: HashMap<(u32, Vec<u64>), f64>,
    },
    #[allow(dead_code)]
    Injected(Arc<PopulationCurve>),
}

impl FittedCurve {
    fn eval_all(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FittedCurve::Component(m) => m.estimate_at(x),
            FittedCurve::Integration { model, cache } => {
                let d = model.d();
                let mut vals = Vec::with_capacity(1usize << d);
                for s in crate::data::all_subsets(d)? {
                    let x_s: Vec<f64> = s.members().iter().map(|&j| x[j]).collect();
                    let key = (s.bits(), x_s.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
                    let v = match cache.get(&key) {
                        Some(v) => *v,
                        None => {
                            let v = model.component_value(s, &x_s)?;
                            cache.insert(key, v);
                            v
                        }
                    };
                    vals.push(v);
                }
                Ok(crate::component::combine_component_values(&vals, d))
            }
            FittedCurve::Injected(curve) => curve.eval_all(x),
        }
    }
}

type Fitter = dyn Fn(&Arc<Dataset>, u64) -> Result<Vec<(&'static str, FittedCurve)>> + Sync;

fn mise_generic(config: &MiseConfig, fitter: &Fitter) -> Result<ExperimentReport> {
    if config.replications < 2 {
        return Err(ShapError::Config("need at least 2 replications".into()));
    }
    let spec = &config.spec;
    let d = spec.d;
    let vars: Vec<usize> = if config.variables.is_empty() {
        (0..d).collect()
    } else {
        if config.variables.iter().any(|&j| j >= d) {
            return Err(ShapError::Config("variable index out of range".into()));
        }
        config.variables.clone()
    };
    let method = config
        .oracle
        .clone()
        .unwrap_or_else(|| OracleMethod::auto(spec));
    let oracle = Arc::new(population_curve(spec, method)?);
    let labels = config.estimator.labels();

    struct RepOutcome {
        // indexed [estimator][var]
        ise: Vec<Vec<f64>>,
        seconds: f64,
    }

    let reps: Vec<std::result::Result<RepOutcome, String>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let started = Instant::now();
            let run = || -> Result<Vec<Vec<f64>>> {
                let rep_seed = derive_seed(config.seed, r as u64);
                let data = sample(spec, config.n, rep_seed)?.into_shared();
                let bounds = config.region.resolve(&data)?;
                let fitted = fitter(&data, rep_seed)?;
                let mut out = Vec::with_capacity(fitted.len());
                for (_, mut curve) in fitted {
                    let ise = match &config.integration {
                        MiseIntegration::AdaptiveGrid { rel_tol, max_depth } => {
                            let mut integrand = |x: &[f64]| -> Result<Vec<f64>> {
                                let est = curve.eval_all(x)?;
                                let truth = oracle.eval_all(x)?;
                                Ok(vars
                                    .iter()
                                    .map(|&j| (est[j] - truth[j]).powi(2))
                                    .collect())
                            };
                            adaptive_cubature(&bounds, vars.len(), *rel_tol, *max_depth, &mut integrand)?
                        }
                        MiseIntegration::SampleAverage => {
                            let mut acc = vec![0.0; vars.len()];
                            for i in 0..data.n() {
                                let x = data.row(i).to_vec();
                                let est = curve.eval_all(&x)?;
                                let truth = oracle.eval_all(&x)?;
                                for (slot, &j) in acc.iter_mut().zip(&vars) {
                                    *slot += (est[j] - truth[j]).powi(2);
                                }
                            }
                            acc.iter().map(|v| v / data.n() as f64).collect()
                        }
                    };
                    out.push(ise);
                }
                Ok(out)
            };
            run()
                .map(|ise| RepOutcome {
                    ise,
                    seconds: started.elapsed().as_secs_f64(),
                })
                .map_err(|e| e.to_string())
        })
        .collect();

    let failures = reps.iter().filter(|r| r.is_err()).count();
    if failures * 10 > config.replications {
        let first = reps.iter().find_map(|r| r.as_ref().err()).cloned().unwrap_or_default();
        return Err(ShapError::Estimation {
            point: Vec::new(),
            reason: format!(
                "{failures}/{} replications failed (first: {first})",
                config.replications
            ),
        });
    }
    let good: Vec<&RepOutcome> = reps.iter().filter_map(|r| r.as_ref().ok()).collect();
    let mean_seconds = good.iter().map(|r| r.seconds).sum::<f64>() / good.len() as f64;

    let mut rows = Vec::new();
    for (e_idx, label) in labels.iter().enumerate() {
        for (v_idx, &j) in vars.iter().enumerate() {
            let values: Vec<f64> = good.iter().map(|r| r.ise[e_idx][v_idx]).collect();
            let m = values.len() as f64;
            let mean = values.iter().sum::<f64>() / m;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            rows.push(ReportRow {
                dgp: spec.id.name().to_string(),
                rho: spec.rho(),
                n: config.n,
                estimator: label.to_string(),
                variable: j,
                statistic: "mise".to_string(),
                value: mean,
                se: (var / m).sqrt(),
                failures,
                seconds: mean_seconds,
            });
        }
    }
    Ok(ExperimentReport {
        rows,
        replications: config.replications,
        seed: config.seed,
        config_echo: format!("{config:?}"),
    })
}

/// Mean integrated squared error of the chosen estimator(s) against the
/// population curve, across seeded replications.
pub fn run_mise(config: &MiseConfig) -> Result<ExperimentReport> {
    let choice = config.estimator;
    let spec_law = config.spec.law.clone();
    let fitter = move |data: &Arc<Dataset>, rep_seed: u64| -> Result<Vec<(&'static str, FittedCurve)>> {
        let mut out = Vec::new();
        let mut full_bandwidths: Option<Vec<f64>> = None;
        if matches!(choice, EstimatorChoice::Component | EstimatorChoice::Both) {
            let model = fit_components(data, None)?;
            full_bandwidths = model.plan().full_model().map(|h| h.to_vec());
            out.push(("component", FittedCurve::Component(model)));
        }
        if matches!(choice, EstimatorChoice::Integration | EstimatorChoice::Both) {
            // The pilot is the same full-model local linear fit; reuse the
            // component run's cross-validated bandwidths when available.
            let model = fit_integration(
                data,
                IntegrationDensity::Known(spec_law.clone()),
                full_bandwidths.as_deref(),
                derive_seed(rep_seed, 0x1a7e),
            )?;
            out.push((
                "integration",
                FittedCurve::Integration {
                    model,
                    cache: HashMap::new(),
                },
            ));
        }
        Ok(out)
    };
    mise_generic(config, &fitter)
}

#[cfg(test)]
pub(crate) fn run_mise_injected(config: &MiseConfig, oracle: Arc<PopulationCurve>) -> Result<ExperimentReport> {
    let fitter = move |_data: &Arc<Dataset>, _seed: u64| -> Result<Vec<(&'static str, FittedCurve)>> {
        Ok(vec![("injected", FittedCurve::Injected(oracle.clone()))])
    };
    mise_generic(config, &fitter)
}

/// Empirical coverage of wild-bootstrap intervals at a fixed point, per
/// variable and significance level. Failed replications are excluded from
/// the denominator and reported.
pub fn run_coverage(config: &CoverageConfig) -> Result<ExperimentReport> {
    if config.replications < 2 {
        return Err(ShapError::Config("need at least 2 replications".into()));
    }
    if config.alphas.is_empty() || config.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(ShapError::Config("alphas must lie in (0,1)".into()));
    }
    let spec = &config.spec;
    let d = spec.d;
    if config.point.len() != d {
        return Err(ShapError::Config("evaluation point has wrong arity".into()));
    }
    let method = config
        .oracle
        .clone()
        .unwrap_or_else(|| OracleMethod::auto(spec));
    let oracle = population_curve(spec, method)?;
    let truth = oracle.eval_all(&config.point)?;
    let min_alpha = config.alphas.iter().cloned().fold(f64::INFINITY, f64::min);

    struct RepHits {
        // indexed [alpha][variable]
        hits: Vec<Vec<bool>>,
        seconds: f64,
    }

    let reps: Vec<std::result::Result<RepHits, String>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let started = Instant::now();
            let run = || -> Result<Vec<Vec<bool>>> {
                let rep_seed = derive_seed(config.seed, r as u64);
                let data = sample(spec, config.n, rep_seed)?.into_shared();
                let model = fit_components(&data, None)?;
                let bs_config = BootstrapConfig::new(
                    config.bootstrap_replicates,
                    min_alpha,
                    derive_seed(rep_seed, 0xb007),
                )?;
                let result = wild_bootstrap_ci(&model, &[config.point.clone()], &bs_config)?;
                if !result.estimate().is_ok(0) {
                    return Err(ShapError::estimation(
                        &config.point,
                        "bootstrap intervals unavailable at the evaluation point",
                    ));
                }
                let mut hits = Vec::with_capacity(config.alphas.len());
                for &alpha in &config.alphas {
                    let est = result.ci_at(alpha)?;
                    hits.push(
                        (0..d)
                            .map(|j| {
                                let (lo, hi) = est.ci(0, j).expect("CI present");
                                lo <= truth[j] && truth[j] <= hi
                            })
                            .collect(),
                    );
                }
                Ok(hits)
            };
            run()
                .map(|hits| RepHits {
                    hits,
                    seconds: started.elapsed().as_secs_f64(),
                })
                .map_err(|e| e.to_string())
        })
        .collect();

    let failures = reps.iter().filter(|r| r.is_err()).count();
    if failures * 10 > config.replications {
        let first = reps.iter().find_map(|r| r.as_ref().err()).cloned().unwrap_or_default();
        return Err(ShapError::Estimation {
            point: config.point.clone(),
            reason: format!(
                "{failures}/{} replications failed (first: {first})",
                config.replications
            ),
        });
    }
    let good: Vec<&RepHits> = reps.iter().filter_map(|r| r.as_ref().ok()).collect();
    let used = good.len() as f64;
    let mean_seconds = good.iter().map(|r| r.seconds).sum::<f64>() / used;

    let mut rows = Vec::new();
    for (a_idx, &alpha) in config.alphas.iter().enumerate() {
        for j in 0..d {
            let hits = good.iter().filter(|r| r.hits[a_idx][j]).count() as f64;
            let p = hits / used;
            rows.push(ReportRow {
                dgp: spec.id.name().to_string(),
                rho: spec.rho(),
                n: config.n,
                estimator: "component".to_string(),
                variable: j,
                statistic: format!("coverage@{alpha}"),
                value: p,
                se: (p * (1.0 - p) / used).sqrt(),
                failures,
                seconds: mean_seconds,
            });
        }
    }
    Ok(ExperimentReport {
        rows,
        replications: config.replications,
        seed: config.seed,
        config_echo: format!("{config:?}"),
    })
}

/// Stacked cumulative curves: level 0 is the sample mean, level k adds the
/// k-th variable of `order`, and the final level reproduces the full-model
/// fit through the additivity identity.
#[derive(Clone, Debug)]
pub struct CumulativeCurves {
    pub order: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    /// `(d+1) x points` levels, outer index = number of accumulated curves.
    pub levels: Vec<Vec<f64>>,
    pub ok: Vec<bool>,
}

pub fn cumulative_curves(
    model: &ComponentModel,
    order: &[usize],
    points: &[Vec<f64>],
) -> Result<CumulativeCurves> {
    let d = model.d();
    let mut seen = vec![false; d];
    if order.len() != d {
        return Err(ShapError::Config("order must list every variable".into()));
    }
    for &j in order {
        if j >= d || seen[j] {
            return Err(ShapError::Config("order must be a permutation".into()));
        }
        seen[j] = true;
    }
    let estimate = model.estimate_curve(points);
    let y_bar = model.y_mean();
    let mut levels = vec![vec![f64::NAN; points.len()]; d + 1];
    let mut ok = vec![false; points.len()];
    for p in 0..points.len() {
        if !estimate.is_ok(p) {
            continue;
        }
        ok[p] = true;
        let mut acc = y_bar;
        levels[0][p] = acc;
        for (k, &j) in order.iter().enumerate() {
            acc += estimate.value(p, j);
            levels[k + 1][p] = acc;
        }
    }
    Ok(CumulativeCurves {
        order: order.to_vec(),
        points: points.to_vec(),
        levels,
        ok,
    })
}

/// Empirical convergence-rate exponent from two MISE cells at different
/// sample sizes, with a delta-method standard error.
pub fn rate_check(
    n1: usize,
    mise1: f64,
    se1: f64,
    n2: usize,
    mise2: f64,
    se2: f64,
) -> Result<(f64, f64)> {
    if n1 >= n2 {
        return Err(ShapError::Config("need n1 < n2".into()));
    }
    if !(mise1 > 0.0 && mise2 > 0.0) {
        return Err(ShapError::Config("MISE values must be positive".into()));
    }
    let log_n = (n2 as f64 / n1 as f64).ln();
    let exponent = (mise1 / mise2).ln() / log_n;
    let se = ((se1 / mise1).powi(2) + (se2 / mise2).powi(2)).sqrt() / log_n;
    Ok((exponent, se))
}
