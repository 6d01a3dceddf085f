//! Shapley combination weights in exact rational arithmetic.
//!
//! The signed weight attached to subset `s` when attributing to variable `j`
//! is `sgn{j in s} * (1/d) * C(d-1, |s| - 1{j in s})^{-1}`. Keeping the exact
//! fraction lets the weight identities hold without floating-point slack;
//! estimators convert to `f64` once.

use crate::data::SubsetMask;
use num_rational::Ratio;

/// Exact binomial coefficient; valid for the capped dimensions used here.
pub fn binomial(n: usize, k: usize) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

/// The signed weight of subset `s` in the weighted-sum representation of the
/// attribution error for variable `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapleyWeight {
    j: usize,
    s: SubsetMask,
    value: Ratio<i64>,
}

impl ShapleyWeight {
    pub fn variable(&self) -> usize {
        self.j
    }

    pub fn subset(&self) -> SubsetMask {
        self.s
    }

    pub fn value(&self) -> Ratio<i64> {
        self.value
    }

    pub fn as_f64(&self) -> f64 {
        *self.value.numer() as f64 / *self.value.denom() as f64
    }
}

pub fn shapley_weight(j: usize, s: SubsetMask) -> ShapleyWeight {
    let d = s.dim();
    debug_assert!(j < d);
    let in_s = s.contains(j);
    let k = s.cardinality() - usize::from(in_s);
    let sign = if in_s { 1 } else { -1 };
    let denom = d as i64 * binomial(d - 1, k);
    ShapleyWeight {
        j,
        s,
        value: Ratio::new(sign, denom),
    }
}

/// The unsigned pair weight `(1/d) * C(d-1, |s|)^{-1}` that multiplies the
/// difference `m_{s+j} - m_s` for a subset `s` not containing `j`.
pub fn pair_weight(d: usize, subset_cardinality: usize) -> f64 {
    1.0 / (d as f64 * binomial(d - 1, subset_cardinality) as f64)
}

/// Signed per-subset weights for variable `j` as floats, indexed by mask bits.
pub fn signed_weights_f64(j: usize, d: usize) -> Vec<f64> {
    (0u32..(1u32 << d))
        .map(|bits| {
            let s = SubsetMask::new(bits, d).expect("valid mask");
            shapley_weight(j, s).as_f64()
        })
        .collect()
}
