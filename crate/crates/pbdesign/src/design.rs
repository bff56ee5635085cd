//! Domain types: block designs, point priors and contrast sets.

use crate::error::{Error, Result};

/// Allocation of `t` treatments to `b` blocks of `k` units each.
///
/// Treatment labels run from 1 to `t` and the grid is stored row-major,
/// one row per block. Values are immutable once constructed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDesign {
    t: usize,
    b: usize,
    k: usize,
    alloc: Vec<u32>,
}

impl BlockDesign {
    /// Validates dimensions and label ranges.
    pub fn new(t: usize, b: usize, k: usize, alloc: &[Vec<u32>]) -> Result<Self> {
        if t < 1 || b < 1 || k < 1 {
            return Err(Error::InvalidArgument(
                "t, b and k must all be at least 1".into(),
            ));
        }
        if alloc.len() != b || alloc.iter().any(|row| row.len() != k) {
            return Err(Error::DimensionMismatch(format!(
                "allocation must be {b} blocks of {k} units"
            )));
        }
        let mut flat = Vec::with_capacity(b * k);
        for row in alloc {
            for &label in row {
                if label < 1 || label as usize > t {
                    return Err(Error::LabelOutOfRange { label, t });
                }
                flat.push(label);
            }
        }
        Ok(BlockDesign {
            t,
            b,
            k,
            alloc: flat,
        })
    }

    /// Labels are assumed valid; used by move generation on already
    /// validated designs.
    pub(crate) fn from_flat_unchecked(t: usize, b: usize, k: usize, alloc: Vec<u32>) -> Self {
        debug_assert_eq!(alloc.len(), b * k);
        debug_assert!(alloc.iter().all(|&l| l >= 1 && l as usize <= t));
        BlockDesign { t, b, k, alloc }
    }

    pub fn treatments(&self) -> usize {
        self.t
    }

    pub fn blocks(&self) -> usize {
        self.b
    }

    pub fn block_size(&self) -> usize {
        self.k
    }

    /// Units of block `i` (0-based).
    pub fn block(&self, i: usize) -> &[u32] {
        &self.alloc[i * self.k..(i + 1) * self.k]
    }

    pub(crate) fn flat(&self) -> &[u32] {
        &self.alloc
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        (0..self.b).map(|i| self.block(i).to_vec()).collect()
    }

    /// Total replications per treatment; sums to `b * k`.
    pub fn replication_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.t];
        for &label in &self.alloc {
            counts[label as usize - 1] += 1;
        }
        counts
    }

    /// Replications per treatment within each block, one row per block.
    pub fn block_counts(&self) -> Vec<Vec<u32>> {
        (0..self.b)
            .map(|i| {
                let mut counts = vec![0u32; self.t];
                for &label in self.block(i) {
                    counts[label as usize - 1] += 1;
                }
                counts
            })
            .collect()
    }

    /// Equivalent design with units sorted within blocks and blocks sorted
    /// lexicographically. Two designs describe the same experiment exactly
    /// when their canonical forms are equal.
    pub fn canonical_form(&self) -> BlockDesign {
        let mut rows = self.rows();
        for row in &mut rows {
            row.sort_unstable();
        }
        rows.sort_unstable();
        BlockDesign {
            t: self.t,
            b: self.b,
            k: self.k,
            alloc: rows.into_iter().flatten().collect(),
        }
    }
}

/// Assumed rate parameters and variance components under which a design is
/// locally optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPriors {
    lambda: Vec<f64>,
    sigma2: f64,
    sigmab2: f64,
}

impl PointPriors {
    /// `lambda` holds one expected count per treatment (response scale);
    /// `sigma2` and `sigmab2` are the residual and block variances on the
    /// link scale.
    pub fn new(lambda: Vec<f64>, sigma2: f64, sigmab2: f64) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidArgument("lambda must not be empty".into()));
        }
        if lambda.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidArgument(
                "lambda entries must be strictly positive and finite".into(),
            ));
        }
        for (name, v) in [("sigma2", sigma2), ("sigmab2", sigmab2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(PointPriors {
            lambda,
            sigma2,
            sigmab2,
        })
    }

    pub fn treatments(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigmab2(&self) -> f64 {
        self.sigmab2
    }
}

/// A set of linear contrasts of the treatment means: a `t x c` matrix whose
/// columns each sum to zero and are linearly independent.
///
/// `c = 0` is admitted as the degenerate empty set, which a single-treatment
/// experiment requires.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastSet {
    rows: usize,
    cols: usize,
    entries: Vec<f64>, // row-major t x c
}

impl ContrastSet {
    pub fn new(t: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if t < 1 {
            return Err(Error::InvalidArgument("t must be at least 1".into()));
        }
        let c = columns.len();
        if columns.iter().any(|col| col.len() != t) {
            return Err(Error::DimensionMismatch(format!(
                "each contrast column must have {t} entries"
            )));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "contrast column {j} has a non-finite entry"
                )));
            }
            let scale: f64 = col.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            let sum: f64 = col.iter().sum();
            if sum.abs() > 1e-9 * scale {
                return Err(Error::InvalidArgument(format!(
                    "contrast column {j} does not sum to zero"
                )));
            }
        }
        let mut entries = vec![0.0; t * c];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                entries[i * c + j] = v;
            }
        }
        let set = ContrastSet {
            rows: t,
            cols: c,
            entries,
        };
        if c > 0 && !set.columns_independent() {
            return Err(Error::InvalidArgument(
                "contrast columns must be linearly independent".into(),
            ));
        }
        Ok(set)
    }

    /// Independence via the Gram matrix: B^T B must be positive definite.
    fn columns_independent(&self) -> bool {
        let c = self.cols;
        let mut gram = crate::linalg::SymMatrix::zeros(c);
        for a in 0..c {
            for b in a..c {
                let mut dot = 0.0;
                for i in 0..self.rows {
                    dot += self.entries[i * c + a] * self.entries[i * c + b];
                }
                gram.set(a, b, dot);
            }
        }
        gram.cholesky().is_some()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Same contrasts rescaled by a common factor.
    pub fn scaled(&self, factor: f64) -> ContrastSet {
        ContrastSet {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Differences from treatment 1: column `h - 1` is `e_1 - e_h` for
/// `h = 2..=t`, the same contrasts R's `contr.treatment` coding estimates.
/// This is the default basis.
pub fn baseline_contrasts(t: usize) -> Result<ContrastSet> {
    if t < 2 {
        return Err(Error::InvalidArgument(
            "baseline contrasts need at least 2 treatments".into(),
        ));
    }
    let mut columns = Vec::with_capacity(t - 1);
    for h in 1..t {
        let mut col = vec![0.0; t];
        col[0] = 1.0;
        col[h] = -1.0;
        columns.push(col);
    }
    ContrastSet::new(t, &columns)
}

/// Orthonormal Helmert basis for the `t - 1` treatment contrasts: column `j`
/// compares the mean of the first `j` treatments with treatment `j + 1`,
/// normalized so that B^T B = I.
pub fn helmert_contrasts(t: usize) -> Result<ContrastSet> {
    if t < 2 {
        return Err(Error::InvalidArgument(
            "helmert contrasts need at least 2 treatments".into(),
        ));
    }
    let mut columns = Vec::with_capacity(t - 1);
    for j in 1..t {
        let h = 1.0 / ((j * (j + 1)) as f64).sqrt();
        let mut col = vec![0.0; t];
        for entry in col.iter_mut().take(j) {
            *entry = h;
        }
        col[j] = -(j as f64) * h;
        columns.push(col);
    }
    ContrastSet::new(t, &columns)
}

/// Reference design with treatments spread as evenly as possible: within
/// every block the per-treatment counts differ by at most one, and so do the
/// total replications across the design. Ties go to the lowest label, so the
/// construction is deterministic.
pub fn balanced_reference(t: usize, b: usize, k: usize) -> Result<BlockDesign> {
    if t < 1 || b < 1 || k < 1 {
        return Err(Error::InvalidArgument(
            "t, b and k must all be at least 1".into(),
        ));
    }
    if t > b * k {
        return Err(Error::Infeasible(format!(
            "{t} treatments cannot all appear in {b} blocks of {k} units"
        )));
    }
    let base = k / t;
    let rem = k % t;
    let mut totals = vec![0u32; t];
    let mut alloc = Vec::with_capacity(b * k);
    for _ in 0..b {
        let mut order: Vec<usize> = (0..t).collect();
        order.sort_by_key(|&h| (totals[h], h));
        let mut counts = vec![base as u32; t];
        for &h in order.iter().take(rem) {
            counts[h] += 1;
        }
        for (h, &c) in counts.iter().enumerate() {
            totals[h] += c;
            for _ in 0..c {
                alloc.push(h as u32 + 1);
            }
        }
    }
    Ok(BlockDesign::from_flat_unchecked(t, b, k, alloc))
}

/// Expected count for a treatment with link-scale mean `alpha` and effect
/// `tau` under the log link.
pub fn link_to_rate(alpha: f64, tau: f64) -> Result<f64> {
    if !alpha.is_finite() || !tau.is_finite() {
        return Err(Error::InvalidArgument(
            "link-scale inputs must be finite".into(),
        ));
    }
    let rate = (alpha + tau).exp();
    if !rate.is_finite() {
        return Err(Error::Infeasible("rate overflows".into()));
    }
    Ok(rate)
}
