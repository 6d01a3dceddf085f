//! Quadrature rules for expectations under Gaussian laws: tensor-product
//! Gauss-Hermite and seeded Monte Carlo.

use crate::error::{Result, ShapError};
use crate::gaussian::ConditionalGaussian;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// How an expectation over the free variables of a conditional law is
/// realized.
#[derive(Clone, Debug, PartialEq)]
pub enum QuadratureRule {
    /// Tensor product of one-dimensional Gauss-Hermite rules.
    GaussHermiteProduct { nodes_per_axis: usize },
    /// Seeded Monte Carlo average; reproducible regardless of scheduling
    /// because every call owns its generator.
    MonteCarlo { draws: usize, seed: u64 },
}

impl QuadratureRule {
    /// Tensor rules explode combinatorially, so default to Gauss-Hermite for
    /// up to three free axes and seeded Monte Carlo beyond.
    pub fn auto(free_dims: usize, seed: u64) -> Self {
        if free_dims <= 3 {
            QuadratureRule::GaussHermiteProduct { nodes_per_axis: 20 }
        } else {
            QuadratureRule::MonteCarlo { draws: 4096, seed }
        }
    }
}

/// A one-dimensional Gauss-Hermite rule in probabilist form: the nodes and
/// weights satisfy `E f(Z) ~= sum_k w_k f(t_k)` for standard normal `Z`,
/// with the weights normalized to sum to one.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Arc<GaussHermite>> {
        if n == 0 || n > 512 {
            return Err(ShapError::Config(format!(
                "Gauss-Hermite size {n} out of range (1..=512)"
            )));
        }
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        {
            let guard = cache.lock().unwrap();
            if let Some(rule) = guard.get(&n) {
                return Ok(rule.clone());
            }
        }
        let rule = Arc::new(Self::build(n));
        cache.lock().unwrap().insert(n, rule.clone());
        Ok(rule)
    }

    /// Golub-Welsch: eigen-decompose the Jacobi matrix of the (physicists')
    /// Hermite recurrence, then rescale to the probabilist convention.
    fn build(n: usize) -> GaussHermite {
        use nalgebra::{DMatrix, SymmetricEigen};
        if n == 1 {
            return GaussHermite {
                nodes: vec![0.0],
                weights: vec![1.0],
            };
        }
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let beta = (k as f64 / 2.0).sqrt();
            jacobi[(k, k - 1)] = beta;
            jacobi[(k - 1, k)] = beta;
        }
        let eigen = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let node = eigen.eigenvalues[k];
                let v0 = eigen.eigenvectors[(0, k)];
                (node * std::f64::consts::SQRT_2, v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Result of integrating a function against a conditional law. Failed
/// evaluations are dropped with the remaining weights renormalized; callers
/// decide how much dropped mass they tolerate.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureOutcome {
    pub value: f64,
    pub dropped_mass: f64,
    /// Monte Carlo standard error of the mean; absent for tensor rules.
    pub std_error: Option<f64>,
}

const MAX_TENSOR_NODES: usize = 1 << 24;

/// Expectation of `f` over the free variables of `cond`. The integrand
/// receives the free-variable vector and returns `None` where it cannot be
/// evaluated.
pub fn integrate_conditional<F>(
    cond: &ConditionalGaussian,
    rule: &QuadratureRule,
    mut f: F,
) -> Result<QuadratureOutcome>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let q = cond.dim();
    match rule {
        QuadratureRule::GaussHermiteProduct { nodes_per_axis } => {
            let gh = GaussHermite::new(*nodes_per_axis)?;
            let nn = gh.len();
            let total: usize = nn
                .checked_pow(q as u32)
                .filter(|&t| t <= MAX_TENSOR_NODES)
                .ok_or_else(|| {
                    ShapError::Config(format!(
                        "tensor Gauss-Hermite rule with {nn}^{q} nodes is too large"
                    ))
                })?;
            let mut idx = vec![0usize; q];
            let mut u = vec![0.0; q];
            let mut point = vec![0.0; q];
            let mut acc = 0.0;
            let mut kept_mass = 0.0;
            let mut dropped = 0.0;
            for _ in 0..total {
                let mut w = 1.0;
                for a in 0..q {
                    u[a] = gh.nodes()[idx[a]];
                    w *= gh.weights()[idx[a]];
                }
                cond.transform(&u, &mut point);
                match f(&point) {
                    Some(v) => {
                        acc += w * v;
                        kept_mass += w;
                    }
                    None => dropped += w,
                }
                for a in (0..q).rev() {
                    idx[a] += 1;
                    if idx[a] < nn {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            let mass = kept_mass + dropped;
            let value = if kept_mass > 0.0 { acc / kept_mass } else { 0.0 };
            Ok(QuadratureOutcome {
                value,
                dropped_mass: if mass > 0.0 { dropped / mass } else { 1.0 },
                std_error: None,
            })
        }
        QuadratureRule::MonteCarlo { draws, seed } => {
            if *draws == 0 {
                return Err(ShapError::Config("Monte Carlo rule with zero draws".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut point = vec![0.0; q];
            let mut kept = 0usize;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..*draws {
                cond.sample_into(&mut rng, &mut point);
                if let Some(v) = f(&point) {
                    kept += 1;
                    sum += v;
                    sum_sq += v * v;
                }
            }
            if kept == 0 {
                return Ok(QuadratureOutcome {
                    value: 0.0,
                    dropped_mass: 1.0,
                    std_error: None,
                });
            }
            let mean = sum / kept as f64;
            let var = (sum_sq / kept as f64 - mean * mean).max(0.0);
            let se = (var / kept as f64).sqrt();
            Ok(QuadratureOutcome {
                value: mean,
                dropped_mass: (*draws - kept) as f64 / *draws as f64,
                std_error: Some(se),
            })
        }
    }
}
