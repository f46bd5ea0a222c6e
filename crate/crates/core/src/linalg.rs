//! Dense vector and matrix primitives, thresholding operators and support-set
//! algebra shared by every solver.
//!
//! Storage is dense and row-major, in double precision throughout. All types
//! are immutable once built; every operation returns a fresh value.

use std::fmt;

use crate::error::{Error, Result};

/// A finite, non-empty real vector.
#[derive(Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("vector length must be positive".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(DenseVector(values))
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector length must be positive");
        DenseVector(vec![0.0; len])
    }

    /// Standard basis vector `e_index` of length `len`.
    pub fn basis(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[index] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        same_len("dot", self, other)?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn sub(&self, other: &DenseVector) -> Result<DenseVector> {
        same_len("sub", self, other)?;
        Ok(DenseVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &DenseVector) -> Result<DenseVector> {
        same_len("add", self, other)?;
        DenseVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: f64) -> Result<DenseVector> {
        DenseVector::new(self.0.iter().map(|v| c * v).collect())
    }

    pub fn norms(&self) -> Norms {
        norms(self)
    }

    pub fn l2(&self) -> f64 {
        l2(&self.0)
    }

    pub fn linf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    /// ‖self − other‖₂.
    pub fn distance(&self, other: &DenseVector) -> Result<f64> {
        same_len("distance", self, other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("DenseVector").field(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        DenseVector::new(values)
    }
}

fn same_len(op: &'static str, a: &DenseVector, b: &DenseVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op,
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Row-major `rows × cols` matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix shape must be positive, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::new",
                expected: rows * cols,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::from_rows",
                expected: d,
                found: bad.len(),
            });
        }
        DenseMatrix::new(n, d, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        DenseMatrix {
            rows: n,
            cols: n,
            values,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        DenseMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn scale(&self, c: f64) -> Result<DenseMatrix> {
        DenseMatrix::new(
            self.rows,
            self.cols,
            self.values.iter().map(|v| c * v).collect(),
        )
    }

    /// Returns a copy with column `j` multiplied by `c`.
    pub fn scale_column(&self, j: usize, c: f64) -> Result<DenseMatrix> {
        let mut values = self.values.clone();
        for i in 0..self.rows {
            values[i * self.cols + j] *= c;
        }
        DenseMatrix::new(self.rows, self.cols, values)
    }

    /// Returns the matrix whose column `k` is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<DenseMatrix> {
        if perm.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "permute_columns",
                expected: self.cols,
                found: perm.len(),
            });
        }
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.rows {
            let row = self.row(i);
            values.extend(perm.iter().map(|&p| row[p]));
        }
        DenseMatrix::new(self.rows, self.cols, values)
    }

    /// `Ux`, accumulated row by row in index order.
    pub fn matvec(&self, x: &DenseVector) -> Result<DenseVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                expected: self.cols,
                found: x.len(),
            });
        }
        let out = (0..self.rows).map(|i| dot(self.row(i), x.as_slice())).collect();
        DenseVector::new(out)
    }

    /// `Uᵀr`, accumulated over rows in index order.
    pub fn matvec_transpose(&self, r: &DenseVector) -> Result<DenseVector> {
        if r.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "matvec_transpose",
                expected: self.rows,
                found: r.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            for (o, u) in out.iter_mut().zip(self.row(i)) {
                *o += ri * u;
            }
        }
        DenseVector::new(out)
    }

    /// Full Gram matrix `UᵀU` (d×d, row-major).
    pub fn gram(&self) -> Vec<f64> {
        let d = self.cols;
        let mut g = vec![0.0; d * d];
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..d {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                let ga = &mut g[a * d..(a + 1) * d];
                for (gb, rb) in ga[a..].iter_mut().zip(&row[a..]) {
                    *gb += ra * rb;
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g[a * d + b] = g[b * d + a];
            }
        }
        g
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish_non_exhaustive()
    }
}

/// Sorted set of coordinate indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    /// Builds a support set over `[0, dim)`; indices must be strictly increasing.
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "support indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::InvalidParameter(format!(
                    "support index {last} out of range for dimension {dim}"
                )));
            }
        }
        Ok(SupportSet(indices))
    }

    /// Sorts and deduplicates arbitrary indices.
    pub fn from_unsorted(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        SupportSet::new(indices, dim)
    }

    pub fn empty() -> Self {
        SupportSet(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// `|self \ other|`.
    pub fn difference_size(&self, other: &SupportSet) -> usize {
        set_difference_size(self, other)
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            if a < b {
                out.push(a);
                i += 1;
            } else if b < a {
                out.push(b);
                j += 1;
            } else {
                out.push(a);
                i += 1;
                j += 1;
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        SupportSet(out)
    }
}

/// ℓ0 count and ℓ1, ℓ2, ℓ∞ norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l0: usize,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn norms(v: &DenseVector) -> Norms {
    let mut out = Norms {
        l0: 0,
        l1: 0.0,
        l2: 0.0,
        linf: 0.0,
    };
    let mut sq = 0.0;
    for &x in v.iter() {
        if x != 0.0 {
            out.l0 += 1;
        }
        out.l1 += x.abs();
        sq += x * x;
        out.linf = out.linf.max(x.abs());
    }
    out.l2 = sq.sqrt();
    out
}

/// Entrywise `sign(v_i)·max(|v_i| − λ, 0)`: the proximal map of `λ‖·‖₁`.
pub fn soft_threshold(v: &DenseVector, lambda: f64) -> Result<DenseVector> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "soft-threshold level must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(DenseVector(
        v.iter().map(|&x| soft_threshold_scalar(x, lambda)).collect(),
    ))
}

#[inline]
pub(crate) fn soft_threshold_scalar(x: f64, lambda: f64) -> f64 {
    let m = x.abs() - lambda;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

/// Indices of the `s` largest-magnitude entries, in increasing index order.
///
/// Ties at the boundary go to the lowest index.
pub fn top_s_indices(v: &[f64], s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        v[*b].abs()
            .partial_cmp(&v[*a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    };
    if s < order.len() {
        order.select_nth_unstable_by(s, cmp);
        order.truncate(s);
    }
    order.sort_unstable();
    order
}

/// Keeps the `s` largest-magnitude entries of `v` and zeroes the rest.
pub fn hard_threshold_top_s(v: &DenseVector, s: usize) -> Result<DenseVector> {
    if s == 0 || s > v.len() {
        return Err(Error::InvalidParameter(format!(
            "top-s sparsity must lie in [1, {}], got {s}",
            v.len()
        )));
    }
    let mut out = vec![0.0; v.len()];
    for i in top_s_indices(v.as_slice(), s) {
        out[i] = v.get(i);
    }
    Ok(DenseVector(out))
}

/// Indices with `|v_i| > tol`.
///
/// # Panics
///
/// Panics if `tol` is negative or NaN.
pub fn support(v: &DenseVector, tol: f64) -> SupportSet {
    assert!(tol >= 0.0, "support tolerance must be nonnegative");
    SupportSet(
        v.iter()
            .enumerate()
            .filter(|(_, x)| x.abs() > tol)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// `|a \ b|`.
pub fn set_difference_size(a: &SupportSet, b: &SupportSet) -> usize {
    a.0.iter().filter(|i| !b.contains(**i)).count()
}
