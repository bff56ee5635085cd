//! D_A- and C-optimality objective functions and design efficiencies.
//!
//! Both criteria are minimized. A design whose information matrix is
//! singular (some treatment never appears) scores positive infinity rather
//! than erroring, so search procedures can walk through it.

use crate::design::{BlockDesign, ContrastSet, PointPriors};
use crate::error::{Error, Result};
use crate::fisher;
use crate::linalg;

/// Optimality criterion for a contrast set B and information matrix M.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Minimize det(B^T M^{-1} B).
    DA,
    /// Minimize trace(B^T M^{-1} B).
    C,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Criterion::DA => write!(f, "DA"),
            Criterion::C => write!(f, "C"),
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DA" | "da" | "Da" => Ok(Criterion::DA),
            "C" | "c" => Ok(Criterion::C),
            other => Err(Error::InvalidArgument(format!(
                "unknown criterion {other:?}, expected \"DA\" or \"C\""
            ))),
        }
    }
}

/// Objective value of one design under one criterion. Infeasible designs
/// carry the infinity sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignScore {
    criterion: Criterion,
    value: f64,
}

impl DesignScore {
    pub(crate) fn new(criterion: Criterion, value: f64) -> Self {
        debug_assert!(!value.is_nan());
        DesignScore { criterion, value }
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    /// Objective value; positive infinity when infeasible.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_feasible(&self) -> bool {
        self.value.is_finite()
    }
}

/// Shared scoring kernel. Owns every scratch buffer so candidate designs in
/// the annealing loop are evaluated without allocating.
pub(crate) struct Evaluator {
    t: usize,
    cols: usize,
    criterion: Criterion,
    sigmab2: f64,
    precisions: Vec<f64>,
    bmat: Vec<f64>, // t x cols, row-major
    order: Vec<(u128, u32)>,
    scratch: Vec<f64>, // t
    m: Vec<f64>,       // t x t
    y: Vec<f64>,       // t x cols, column-major solves
    gram: Vec<f64>,    // cols x cols
}

impl Evaluator {
    pub(crate) fn new(
        priors: &PointPriors,
        contrasts: &ContrastSet,
        criterion: Criterion,
    ) -> Evaluator {
        let t = priors.treatments();
        debug_assert_eq!(contrasts.rows(), t);
        let cols = contrasts.cols();
        let mut bmat = vec![0.0; t * cols];
        for i in 0..t {
            for j in 0..cols {
                bmat[i * cols + j] = contrasts.get(i, j);
            }
        }
        Evaluator {
            t,
            cols,
            criterion,
            sigmab2: priors.sigmab2(),
            precisions: fisher::treatment_precisions(priors),
            bmat,
            order: Vec::new(),
            scratch: vec![0.0; t],
            m: vec![0.0; t * t],
            y: vec![0.0; t * cols],
            gram: vec![0.0; cols * cols],
        }
    }

    /// Scores a design given its per-block replication counts (row-major
    /// `b x t`). Returns infinity when the information matrix is singular.
    pub(crate) fn score_counts(&mut self, counts: &[u32], b: usize) -> f64 {
        let t = self.t;
        fisher::information_from_counts(
            counts,
            b,
            t,
            &self.precisions,
            self.sigmab2,
            &mut self.order,
            &mut self.scratch,
            &mut self.m,
        );
        if !linalg::cholesky_in_place(&mut self.m, t) {
            return f64::INFINITY;
        }
        // forward solves L y_j = b_j; B^T M^{-1} B = Y^T Y
        let c = self.cols;
        for j in 0..c {
            for i in 0..t {
                let mut sum = self.bmat[i * c + j];
                for p in 0..i {
                    sum -= self.m[i * t + p] * self.y[j * t + p];
                }
                self.y[j * t + i] = sum / self.m[i * t + i];
            }
        }
        for a in 0..c {
            for b2 in a..c {
                let mut dot = 0.0;
                for i in 0..t {
                    dot += self.y[a * t + i] * self.y[b2 * t + i];
                }
                self.gram[a * c + b2] = dot;
                self.gram[b2 * c + a] = dot;
            }
        }
        match self.criterion {
            Criterion::C => (0..c).map(|a| self.gram[a * c + a]).sum(),
            Criterion::DA => match linalg::cholesky_det_in_place(&mut self.gram, c) {
                Some(det) => det,
                None => f64::INFINITY,
            },
        }
    }

    pub(crate) fn score_design(&mut self, design: &BlockDesign) -> f64 {
        let counts: Vec<u32> = design.block_counts().into_iter().flatten().collect();
        self.score_counts(&counts, design.blocks())
    }
}

/// Evaluates `det(B^T M^{-1} B)` (D_A) or `trace(B^T M^{-1} B)` (C) for the
/// marginal information matrix M of the design under the given priors.
pub fn objective(
    design: &BlockDesign,
    priors: &PointPriors,
    contrasts: &ContrastSet,
    criterion: Criterion,
) -> Result<DesignScore> {
    let t = design.treatments();
    if priors.treatments() != t {
        return Err(Error::DimensionMismatch(format!(
            "priors carry {} rates but the design has {t} treatments",
            priors.treatments()
        )));
    }
    if contrasts.rows() != t {
        return Err(Error::DimensionMismatch(format!(
            "contrast matrix has {} rows but the design has {t} treatments",
            contrasts.rows()
        )));
    }
    let mut evaluator = Evaluator::new(priors, contrasts, criterion);
    Ok(DesignScore::new(criterion, evaluator.score_design(design)))
}

/// Efficiency of a candidate relative to an optimal design under the same
/// criterion: `optimal / candidate`, at most 1 when `optimal` really is the
/// minimum.
pub fn relative_efficiency(candidate: &DesignScore, optimal: &DesignScore) -> Result<f64> {
    if candidate.criterion() != optimal.criterion() {
        return Err(Error::InvalidArgument(
            "scores compare different criteria".into(),
        ));
    }
    if !candidate.is_feasible() || !optimal.is_feasible() {
        return Err(Error::InvalidArgument(
            "relative efficiency is undefined for infeasible scores".into(),
        ));
    }
    Ok(optimal.value() / candidate.value())
}

/// Optional D-efficiency variant for D_A scores: the determinant ratio
/// raised to `1 / cols`, i.e. a per-contrast geometric mean.
pub fn d_efficiency(
    candidate: &DesignScore,
    optimal: &DesignScore,
    contrast_cols: usize,
) -> Result<f64> {
    if candidate.criterion() != Criterion::DA || optimal.criterion() != Criterion::DA {
        return Err(Error::InvalidArgument(
            "d_efficiency applies to DA scores".into(),
        ));
    }
    if contrast_cols == 0 {
        return Err(Error::InvalidArgument(
            "d_efficiency needs at least one contrast".into(),
        ));
    }
    let ratio = relative_efficiency(candidate, optimal)?;
    Ok(ratio.powf(1.0 / contrast_cols as f64))
}

/// Each value divided by the largest value in the list, so the worst design
/// scores 1. Infeasible entries are excluded from the maximum and map to
/// infinity.
pub fn efficiency_vs_worst(scores: &[DesignScore]) -> Result<Vec<f64>> {
    let Some(first) = scores.first() else {
        return Err(Error::InvalidArgument("no scores given".into()));
    };
    if scores.iter().any(|s| s.criterion() != first.criterion()) {
        return Err(Error::InvalidArgument(
            "scores compare different criteria".into(),
        ));
    }
    let worst = scores
        .iter()
        .filter(|s| s.is_feasible())
        .map(|s| s.value())
        .fold(f64::NEG_INFINITY, f64::max);
    if worst == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "every score in the list is infeasible".into(),
        ));
    }
    Ok(scores
        .iter()
        .map(|s| {
            if !s.is_feasible() {
                f64::INFINITY
            } else if worst > 0.0 {
                s.value() / worst
            } else {
                1.0
            }
        })
        .collect())
}
