//! Core value types shared by all estimators: datasets, variable subsets,
//! evaluation grids and curve containers.
//!
//! Variables are indexed `0..d` throughout the public API.

use crate::error::{Result, ShapError};
use std::fmt;
use std::sync::Arc;

/// Hard cap on the covariate dimension. Component fits enumerate all `2^d`
/// variable subsets, so larger dimensions are rejected outright.
pub const MAX_DIMENSION: usize = 25;

/// A subset of the variable indices `0..d`, stored as a bitmask
/// (bit `j` set iff variable `j` is a member).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetMask {
    bits: u32,
    d: u8,
}

impl SubsetMask {
    pub fn new(bits: u32, d: usize) -> Result<Self> {
        check_dimension(d)?;
        if d < 32 && bits >= (1u32 << d) {
            return Err(ShapError::Config(format!(
                "subset bits {bits:#b} out of range for dimension {d}"
            )));
        }
        Ok(SubsetMask { bits, d: d as u8 })
    }

    pub fn empty(d: usize) -> Result<Self> {
        Self::new(0, d)
    }

    pub fn full(d: usize) -> Result<Self> {
        check_dimension(d)?;
        Ok(SubsetMask {
            bits: ((1u64 << d) - 1) as u32,
            d: d as u8,
        })
    }

    pub fn singleton(j: usize, d: usize) -> Result<Self> {
        check_var_index(j, d)?;
        Self::new(1 << j, d)
    }

    pub fn from_members(members: &[usize], d: usize) -> Result<Self> {
        let mut bits = 0u32;
        for &j in members {
            check_var_index(j, d)?;
            bits |= 1 << j;
        }
        Self::new(bits, d)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Total number of variables the mask is defined over.
    pub fn dim(&self) -> usize {
        self.d as usize
    }

    /// Number of members, `|s|`.
    pub fn cardinality(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_full(&self) -> bool {
        self.cardinality() == self.dim()
    }

    pub fn contains(&self, j: usize) -> bool {
        j < self.dim() && self.bits & (1 << j) != 0
    }

    /// The mask with variable `j` added.
    pub fn with(&self, j: usize) -> Self {
        debug_assert!(j < self.dim());
        SubsetMask {
            bits: self.bits | (1 << j),
            d: self.d,
        }
    }

    /// The mask with variable `j` removed.
    pub fn without(&self, j: usize) -> Self {
        SubsetMask {
            bits: self.bits & !(1 << j),
            d: self.d,
        }
    }

    pub fn complement(&self) -> Self {
        let all = ((1u64 << self.dim()) - 1) as u32;
        SubsetMask {
            bits: all & !self.bits,
            d: self.d,
        }
    }

    /// Member indices in ascending order.
    pub fn members(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.contains(j)).collect()
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubsetMask({self})")
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.members().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIMENSION {
        return Err(ShapError::Config(format!(
            "dimension {d} out of range (1..={MAX_DIMENSION})"
        )));
    }
    Ok(())
}

fn check_var_index(j: usize, d: usize) -> Result<()> {
    check_dimension(d)?;
    if j >= d {
        return Err(ShapError::Config(format!(
            "variable index {j} out of range for dimension {d}"
        )));
    }
    Ok(())
}

/// All `2^d` subsets of `0..d` in ascending bitmask order.
pub fn all_subsets(d: usize) -> Result<Vec<SubsetMask>> {
    check_dimension(d)?;
    Ok((0u32..(1u32 << d))
        .map(|bits| SubsetMask { bits, d: d as u8 })
        .collect())
}

/// All `2^(d-1)` subsets of `0..d` that exclude variable `j`, in ascending
/// bitmask order.
pub fn subsets_excluding(j: usize, d: usize) -> Result<Vec<SubsetMask>> {
    check_var_index(j, d)?;
    let bit = 1u32 << j;
    Ok((0u32..(1u32 << d))
        .filter(|bits| bits & bit == 0)
        .map(|bits| SubsetMask { bits, d: d as u8 })
        .collect())
}

/// An immutable regression sample: an `n x d` covariate matrix (row major),
/// a response vector of length `n` and unique column labels.
#[derive(Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    names: Vec<String>,
    n: usize,
    d: usize,
}

impl Dataset {
    /// Builds a dataset from a flat row-major covariate matrix.
    ///
    /// Rejects non-finite entries, duplicate names, `n < 2` and `d < 1`;
    /// letting NaN through would silently poison every weighted least
    /// squares solve downstream.
    pub fn new(x: Vec<f64>, d: usize, y: Vec<f64>, names: Vec<String>) -> Result<Self> {
        check_dimension(d)?;
        Self::build(x, d, y, names)
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(ShapError::Data("empty dataset".into()));
        }
        let d = rows[0].len();
        check_dimension(d)?;
        let mut x = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(ShapError::Data(format!(
                    "row {i} has {} columns, expected {d}",
                    row.len()
                )));
            }
            x.extend_from_slice(row);
        }
        Self::build(x, d, y, names)
    }

    fn build(x: Vec<f64>, d: usize, y: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(ShapError::Data(format!("need at least 2 rows, got {n}")));
        }
        if d > 0 && x.len() != n * d {
            return Err(ShapError::Data(format!(
                "covariate matrix has {} entries, expected {}",
                x.len(),
                n * d
            )));
        }
        if names.len() != d {
            return Err(ShapError::Data(format!(
                "{} column names for {d} columns",
                names.len()
            )));
        }
        for (k, name) in names.iter().enumerate() {
            if names[..k].contains(name) {
                return Err(ShapError::Data(format!("duplicate column name '{name}'")));
            }
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(ShapError::Data(format!(
                "non-finite covariate at row {}, column {}",
                pos / d.max(1),
                pos % d.max(1)
            )));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(ShapError::Data(format!("non-finite response at row {pos}")));
        }
        Ok(Dataset { x, y, names, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.n as f64
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.d + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, j)).collect()
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.value(i, j)).sum::<f64>() / self.n as f64
    }

    pub fn column_std(&self, j: usize) -> f64 {
        let m = self.column_mean(j);
        let ss: f64 = (0..self.n).map(|i| (self.value(i, j) - m).powi(2)).sum();
        (ss / (self.n - 1) as f64).sqrt()
    }

    /// Restriction to the columns in `s`, preserving row order and the
    /// response. `s = {}` yields an `n x 0` covariate matrix with `y` intact.
    pub fn slice_columns(&self, s: SubsetMask) -> Result<Dataset> {
        if s.dim() != self.d {
            return Err(ShapError::Config(format!(
                "subset over {} variables applied to {}-column data",
                s.dim(),
                self.d
            )));
        }
        let cols = s.members();
        let mut x = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            for &j in &cols {
                x.push(self.value(i, j));
            }
        }
        let names = cols.iter().map(|&j| self.names[j].clone()).collect();
        Ok(Dataset {
            x,
            y: self.y.clone(),
            names,
            n: self.n,
            d: cols.len(),
        })
    }

    pub fn into_shared(self) -> Arc<Dataset> {
        Arc::new(self)
    }
}

impl fmt::Debug for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dataset")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("names", &self.names)
            .finish()
    }
}

/// A cartesian-product evaluation lattice with strictly increasing
/// breakpoints per axis. Points iterate with the last axis fastest.
#[derive(Clone, Debug)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(ShapError::Config("grid needs at least one axis".into()));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(ShapError::Config(format!("grid axis {k} is empty")));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) || axis.iter().any(|v| !v.is_finite()) {
                return Err(ShapError::Config(format!(
                    "grid axis {k} must be finite and strictly increasing"
                )));
            }
        }
        Ok(Grid { axes })
    }

    /// Evenly spaced breakpoints over `[lo, hi]` on every axis.
    pub fn uniform(d: usize, lo: f64, hi: f64, points_per_axis: usize) -> Result<Self> {
        if !(hi > lo) || points_per_axis < 2 {
            return Err(ShapError::Config(format!(
                "degenerate grid spec [{lo}, {hi}] x {points_per_axis}"
            )));
        }
        let axis: Vec<f64> = (0..points_per_axis)
            .map(|k| lo + (hi - lo) * k as f64 / (points_per_axis - 1) as f64)
            .collect();
        Grid::new(vec![axis; d])
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let total = self.len();
        let d = self.axes.len();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            out.push((0..d).map(|k| self.axes[k][idx[k]]).collect());
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < self.axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}

/// Which plug-in estimator produced a curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Component,
    Integration,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::Component => write!(f, "component"),
            EstimatorKind::Integration => write!(f, "integration"),
        }
    }
}

/// Estimated Shapley curves evaluated on a point set: a `#points x d` value
/// matrix with optional pointwise confidence bounds and a per-point success
/// flag. Failed points hold NaN and are excluded from downstream summaries.
#[derive(Clone, Debug)]
pub struct CurveEstimate {
    points: Vec<Vec<f64>>,
    d: usize,
    values: Vec<f64>,
    ok: Vec<bool>,
    ci_lower: Option<Vec<f64>>,
    ci_upper: Option<Vec<f64>>,
    method: EstimatorKind,
    alpha: Option<f64>,
}

impl CurveEstimate {
    pub(crate) fn new(
        points: Vec<Vec<f64>>,
        d: usize,
        values: Vec<f64>,
        ok: Vec<bool>,
        method: EstimatorKind,
    ) -> Self {
        debug_assert_eq!(values.len(), points.len() * d);
        debug_assert_eq!(ok.len(), points.len());
        CurveEstimate {
            points,
            d,
            values,
            ok,
            ci_lower: None,
            ci_upper: None,
            method,
            alpha: None,
        }
    }

    pub(crate) fn attach_ci(
        &mut self,
        lower: Vec<f64>,
        upper: Vec<f64>,
        alpha: f64,
    ) -> Result<()> {
        if lower.len() != self.values.len() || upper.len() != self.values.len() {
            return Err(ShapError::Config("CI shape mismatch".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ShapError::Config(format!("alpha {alpha} not in (0,1)")));
        }
        for k in 0..self.values.len() {
            if self.ok[k / self.d] && !(lower[k] <= self.values[k] && self.values[k] <= upper[k]) {
                return Err(ShapError::Config(format!(
                    "CI does not bracket the estimate at entry {k}"
                )));
            }
        }
        self.ci_lower = Some(lower);
        self.ci_upper = Some(upper);
        self.alpha = Some(alpha);
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, p: usize) -> &[f64] {
        &self.points[p]
    }

    pub fn is_ok(&self, p: usize) -> bool {
        self.ok[p]
    }

    pub fn num_failed(&self) -> usize {
        self.ok.iter().filter(|&&b| !b).count()
    }

    /// Estimated curve value for variable `j` at point `p` (NaN if failed).
    pub fn value(&self, p: usize, j: usize) -> f64 {
        self.values[p * self.d + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ci(&self, p: usize, j: usize) -> Option<(f64, f64)> {
        match (&self.ci_lower, &self.ci_upper) {
            (Some(lo), Some(hi)) => Some((lo[p * self.d + j], hi[p * self.d + j])),
            _ => None,
        }
    }

    pub fn has_ci(&self) -> bool {
        self.ci_lower.is_some()
    }

    pub fn method(&self) -> EstimatorKind {
        self.method
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_excluding_d1() {
        let subs = subsets_excluding(0, 1).unwrap();
        assert_eq!(subs.len(), 1);
        assert!(subs[0].is_empty());
    }

    #[test]
    fn subsets_excluding_d2() {
        let subs = subsets_excluding(0, 2).unwrap();
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0].bits(), 0);
        assert_eq!(subs[1].bits(), 0b10);
    }

    #[test]
    fn subsets_excluding_d3_brute_force() {
        // Oracle: enumerate the power set of {0,2} directly.
        let expected: Vec<u32> = vec![0b000, 0b001, 0b100, 0b101];
        let subs = subsets_excluding(1, 3).unwrap();
        let got: Vec<u32> = subs.iter().map(|s| s.bits()).collect();
        assert_eq!(got, expected);
        assert!(subs.iter().all(|s| !s.contains(1)));
    }

    #[test]
    fn subsets_excluding_counts_and_membership() {
        for d in 1..=10 {
            for j in 0..d {
                let subs = subsets_excluding(j, d).unwrap();
                assert_eq!(subs.len(), 1 << (d - 1));
                assert!(subs.iter().all(|s| !s.contains(j)));
                let mut sorted = subs.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), subs.len());
            }
        }
    }

    #[test]
    fn dimension_cap_enforced() {
        assert!(subsets_excluding(0, 26).is_err());
        assert!(SubsetMask::full(MAX_DIMENSION).is_ok());
    }

    fn small_data() -> Dataset {
        Dataset::from_rows(
            &[
                vec![1.0, 2.0, 3.0],
                vec![4.0, 5.0, 6.0],
                vec![7.0, 8.0, 9.0],
            ],
            vec![10.0, 11.0, 12.0],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap()
    }

    #[test]
    fn slice_columns_keeps_rows_and_response() {
        let data = small_data();
        let s = SubsetMask::from_members(&[0, 2], 3).unwrap();
        let sliced = data.slice_columns(s).unwrap();
        assert_eq!(sliced.d(), 2);
        assert_eq!(sliced.row(1), &[4.0, 6.0]);
        assert_eq!(sliced.y(), data.y());
        assert_eq!(sliced.names(), &["a".to_string(), "c".to_string()]);
    }

    #[test]
    fn slice_columns_full_is_identity() {
        let data = small_data();
        let sliced = data.slice_columns(SubsetMask::full(3).unwrap()).unwrap();
        assert_eq!(sliced, data);
    }

    #[test]
    fn slice_columns_empty_keeps_y() {
        let data = small_data();
        let sliced = data.slice_columns(SubsetMask::empty(3).unwrap()).unwrap();
        assert_eq!(sliced.d(), 0);
        assert_eq!(sliced.n(), 3);
        assert_eq!(sliced.y(), data.y());
    }

    #[test]
    fn nested_slicing_composes() {
        let data = small_data();
        let s = SubsetMask::from_members(&[0, 2], 3).unwrap();
        let once = data.slice_columns(s).unwrap();
        // {0,2} re-indexed inside the slice: member 1 of the slice is column 2.
        let again = once
            .slice_columns(SubsetMask::from_members(&[1], 2).unwrap())
            .unwrap();
        let direct = data
            .slice_columns(SubsetMask::from_members(&[2], 3).unwrap())
            .unwrap();
        assert_eq!(again, direct);
    }

    #[test]
    fn rejects_nan_and_duplicates() {
        let bad = Dataset::from_rows(
            &[vec![1.0], vec![f64::NAN]],
            vec![0.0, 1.0],
            vec!["a".into()],
        );
        assert!(matches!(bad, Err(ShapError::Data(_))));
        let dup = Dataset::from_rows(
            &[vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![0.0, 1.0],
            vec!["a".into(), "a".into()],
        );
        assert!(matches!(dup, Err(ShapError::Data(_))));
    }

    #[test]
    fn grid_points_order_and_count() {
        let g = Grid::new(vec![vec![0.0, 1.0], vec![10.0, 20.0, 30.0]]).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![0.0, 10.0]);
        assert_eq!(pts[1], vec![0.0, 20.0]);
        assert_eq!(pts[5], vec![1.0, 30.0]);
        assert!(Grid::new(vec![vec![1.0, 1.0]]).is_err());
    }
}
