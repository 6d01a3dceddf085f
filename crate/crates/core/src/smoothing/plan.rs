//! Per-subset, per-direction bandwidth plans.

use crate::data::SubsetMask;
use crate::error::{Result, ShapError};

/// Bandwidths for every variable subset of a component model: one positive
/// value per member direction. Entries may be missing, in which case the
/// fitting step cross-validates them.
#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthPlan {
    d: usize,
    per_subset: Vec<Option<Vec<f64>>>,
}

impl BandwidthPlan {
    pub fn new(d: usize) -> Result<Self> {
        SubsetMask::full(d)?;
        Ok(BandwidthPlan {
            d,
            per_subset: vec![None; 1usize << d],
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn set(&mut self, s: SubsetMask, h: Vec<f64>) -> Result<()> {
        self.check_subset(s)?;
        if h.len() != s.cardinality() {
            return Err(ShapError::Config(format!(
                "{} bandwidths for subset {s} of cardinality {}",
                h.len(),
                s.cardinality()
            )));
        }
        if h.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(ShapError::Config(format!(
                "bandwidths for subset {s} must be positive finite"
            )));
        }
        self.per_subset[s.bits() as usize] = Some(h);
        Ok(())
    }

    pub fn get(&self, s: SubsetMask) -> Option<&[f64]> {
        self.per_subset
            .get(s.bits() as usize)
            .and_then(|v| v.as_deref())
    }

    /// Bandwidths of the full d-dimensional model, when present.
    pub fn full_model(&self) -> Option<&[f64]> {
        self.get(SubsetMask::full(self.d).expect("valid dimension"))
    }

    pub fn is_complete(&self) -> bool {
        self.per_subset.iter().all(|v| v.is_some())
    }

    /// Element-wise scaled copy (used to build oversmoothed companions).
    pub fn scaled(&self, factor: f64) -> Result<BandwidthPlan> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(ShapError::Config(format!(
                "bandwidth scale factor {factor} must be positive finite"
            )));
        }
        Ok(BandwidthPlan {
            d: self.d,
            per_subset: self
                .per_subset
                .iter()
                .map(|e| e.as_ref().map(|h| h.iter().map(|v| v * factor).collect()))
                .collect(),
        })
    }

    /// Checks `self >= other` element-wise on every shared subset, the
    /// requirement on an oversmoothed companion plan.
    pub fn dominates(&self, other: &BandwidthPlan) -> bool {
        if self.d != other.d {
            return false;
        }
        self.per_subset
            .iter()
            .zip(&other.per_subset)
            .all(|(g, h)| match (g, h) {
                (Some(g), Some(h)) => g.iter().zip(h).all(|(a, b)| a >= b),
                _ => true,
            })
    }

    /// The default oversmoothing factor `log(log n) * 4`, which grows without
    /// bound so the bandwidth ratio `h/g` vanishes asymptotically.
    pub fn default_oversmooth_factor(n: usize) -> f64 {
        (n as f64).ln().ln() * 4.0
    }

    fn check_subset(&self, s: SubsetMask) -> Result<()> {
        if s.dim() != self.d {
            return Err(ShapError::Config(format!(
                "subset over {} variables for a plan of dimension {}",
                s.dim(),
                self.d
            )));
        }
        Ok(())
    }
}
