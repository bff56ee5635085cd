//! Marginal Fisher information for the fixed effects of a Poisson
//! log-link mixed model on a block design.
//!
//! A unit carrying treatment `h` contributes precision
//! `d_h = 1 / (sigma2 + 1/lambda_h)` on the link scale. The information
//! contribution of block `i` over the units it contains is
//!
//! ```text
//! Omega_i = diag(d) - sigmab2 * d d^T / (1 + sigmab2 * sum(d))
//! ```
//!
//! which stays well defined as either variance component goes to zero.
//! Under cell-means coding (one indicator column per treatment) the full
//! `t x t` information matrix reduces to sums over per-block replication
//! counts, so assembling it needs no matrix inversion at all. The
//! partitioned-matrix route ([`naive_marginal_information`]) computes the
//! same matrix by brute force and serves as an independent cross-check.

use crate::design::{BlockDesign, PointPriors};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Link-scale precision of one unit assigned a treatment with rate `lambda`.
#[inline]
pub(crate) fn unit_precision(lambda: f64, sigma2: f64) -> f64 {
    1.0 / (sigma2 + 1.0 / lambda)
}

/// Per-treatment precisions under the given priors.
pub(crate) fn treatment_precisions(priors: &PointPriors) -> Vec<f64> {
    priors
        .lambda()
        .iter()
        .map(|&l| unit_precision(l, priors.sigma2()))
        .collect()
}

/// The block-variance-scaled weight vector of one block: entry `j` equals
/// `sigmab2 / (sigma2 + 1/lambda)` for unit `j`'s treatment.
pub fn ell_vector(block_row: &[u32], priors: &PointPriors) -> Vec<f64> {
    block_row
        .iter()
        .map(|&label| {
            priors.sigmab2() * unit_precision(priors.lambda()[label as usize - 1], priors.sigma2())
        })
        .collect()
}

/// The `k x k` information weight matrix of one block,
/// `diag(d) - sigmab2 * d d^T / (1 + sigmab2 * sum(d))`.
///
/// At `sigmab2 = 0` the rank-one term vanishes and the matrix is the plain
/// diagonal of unit precisions.
pub fn omega_block(block_row: &[u32], priors: &PointPriors) -> SymMatrix {
    let k = block_row.len();
    let d: Vec<f64> = block_row
        .iter()
        .map(|&label| unit_precision(priors.lambda()[label as usize - 1], priors.sigma2()))
        .collect();
    let total: f64 = d.iter().sum();
    let shrink = priors.sigmab2() / (1.0 + priors.sigmab2() * total);
    let mut omega = SymMatrix::zeros(k);
    for i in 0..k {
        for j in i..k {
            let base = if i == j { d[i] } else { 0.0 };
            omega.set(i, j, base - shrink * d[i] * d[j]);
        }
    }
    omega
}

/// Weight vector and weight matrix of one block, bundled for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub ell: Vec<f64>,
    pub omega: SymMatrix,
}

impl BlockWeights {
    pub fn new(block_row: &[u32], priors: &PointPriors) -> Self {
        BlockWeights {
            ell: ell_vector(block_row, priors),
            omega: omega_block(block_row, priors),
        }
    }
}

/// Accumulates the information matrix from per-block replication counts.
///
/// `counts` is row-major `b x t`; blocks are visited in a canonical order
/// (count rows sorted) so that designs differing only by unit or block
/// permutations produce bit-identical matrices. `order` is scratch for the
/// sort keys, `scratch` must hold `t` floats and `m` holds the `t x t`
/// output.
pub(crate) fn information_from_counts(
    counts: &[u32],
    b: usize,
    t: usize,
    precisions: &[f64],
    sigmab2: f64,
    order: &mut Vec<(u128, u32)>,
    scratch: &mut [f64],
    m: &mut [f64],
) {
    debug_assert_eq!(counts.len(), b * t);
    debug_assert_eq!(precisions.len(), t);
    debug_assert_eq!(scratch.len(), t);
    debug_assert_eq!(m.len(), t * t);

    order.clear();
    if t <= 6 && counts.iter().all(|&c| c < (1 << 21)) {
        // pack each count row into one key so the canonical sort compares
        // integers instead of slices
        for i in 0..b {
            let key = counts[i * t..(i + 1) * t]
                .iter()
                .fold(0u128, |acc, &c| (acc << 21) | c as u128);
            order.push((key, i as u32));
        }
        order.sort_unstable();
    } else {
        order.extend((0..b).map(|i| (0u128, i as u32)));
        order.sort_unstable_by(|&(_, x), &(_, y)| {
            let (x, y) = (x as usize, y as usize);
            counts[x * t..(x + 1) * t].cmp(&counts[y * t..(y + 1) * t])
        });
    }

    m.iter_mut().for_each(|v| *v = 0.0);
    for &(_, i) in order.iter() {
        let i = i as usize;
        let row = &counts[i * t..(i + 1) * t];
        let mut total = 0.0;
        for g in 0..t {
            let s = row[g] as f64 * precisions[g];
            scratch[g] = s;
            total += s;
        }
        let shrink = sigmab2 / (1.0 + sigmab2 * total);
        for g in 0..t {
            let sg = scratch[g];
            if sg == 0.0 {
                continue;
            }
            m[g * t + g] += sg - shrink * sg * sg;
            for h in (g + 1)..t {
                let v = shrink * sg * scratch[h];
                m[g * t + h] -= v;
                m[h * t + g] -= v;
            }
        }
    }
}

/// Marginal information for the `t` treatment means under cell-means
/// coding: symmetric positive semi-definite, and positive definite exactly
/// when every treatment appears somewhere in the design.
pub fn marginal_information(design: &BlockDesign, priors: &PointPriors) -> SymMatrix {
    let t = design.treatments();
    assert_eq!(
        t,
        priors.treatments(),
        "design and priors disagree on the treatment count"
    );
    let b = design.blocks();
    let counts: Vec<u32> = design.block_counts().into_iter().flatten().collect();
    let precisions = treatment_precisions(priors);
    let mut order: Vec<(u128, u32)> = Vec::with_capacity(b);
    let mut scratch = vec![0.0; t];
    let mut m = vec![0.0; t * t];
    information_from_counts(
        &counts,
        b,
        t,
        &precisions,
        priors.sigmab2(),
        &mut order,
        &mut scratch,
        &mut m,
    );
    SymMatrix::from_raw(t, m)
}

/// Per-unit Poisson weights, i.e. the diagonal of W.
pub(crate) fn unit_rates(design: &BlockDesign, priors: &PointPriors) -> Vec<f64> {
    design
        .flat()
        .iter()
        .map(|&label| priors.lambda()[label as usize - 1])
        .collect()
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting; kept
/// deliberately separate from the Cholesky machinery so the two information
/// routes share no linear algebra.
fn invert_dense(mut a: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let mut pivot_row = col;
        let mut best = a[col * n + col].abs();
        for r in (col + 1)..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                pivot_row = r;
            }
        }
        if best == 0.0 {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
                inv.swap(col * n + j, pivot_row * n + j);
            }
        }
        let pivot = a[col * n + col];
        for j in 0..n {
            a[col * n + j] /= pivot;
            inv[col * n + j] /= pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r * n + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a[r * n + j] -= factor * a[col * n + j];
                inv[r * n + j] -= factor * inv[col * n + j];
            }
        }
    }
    Some(inv)
}

/// Marginal information via the partitioned-matrix route: assembles the
/// full `(b + bk) x (b + bk)` random-effect block `Z^T W Z + G^{-1}`,
/// inverts it densely and forms `X^T (W - W Z (Z^T W Z + G^{-1})^{-1} Z^T W) X`.
///
/// Requires both variance components strictly positive so that `G` is
/// invertible.
pub fn naive_marginal_information(design: &BlockDesign, priors: &PointPriors) -> Result<SymMatrix> {
    let t = design.treatments();
    if t != priors.treatments() {
        return Err(Error::DimensionMismatch(
            "design and priors disagree on the treatment count".into(),
        ));
    }
    if priors.sigma2() <= 0.0 {
        return Err(Error::SingularG("sigma2 must be strictly positive".into()));
    }
    if priors.sigmab2() <= 0.0 {
        return Err(Error::SingularG("sigmab2 must be strictly positive".into()));
    }

    let b = design.blocks();
    let k = design.block_size();
    let n = b * k;
    let q = b + n; // random-effect dimension: b block effects + n unit effects

    let w = unit_rates(design, priors);

    // Z = (I_b (x) 1_k | I_n): unit u in block i loads on columns i and b+u.
    let z_cols = |u: usize| (u / k, b + u);

    // M22 = Z^T W Z + G^{-1}
    let mut m22 = vec![0.0; q * q];
    for u in 0..n {
        let (bc, uc) = z_cols(u);
        m22[bc * q + bc] += w[u];
        m22[bc * q + uc] += w[u];
        m22[uc * q + bc] += w[u];
        m22[uc * q + uc] += w[u];
    }
    for i in 0..b {
        m22[i * q + i] += 1.0 / priors.sigmab2();
    }
    for u in 0..n {
        let c = b + u;
        m22[c * q + c] += 1.0 / priors.sigma2();
    }

    let m22_inv = invert_dense(m22, q).ok_or_else(|| {
        Error::SingularG("random-effect information block is numerically singular".into())
    })?;

    // A = W - W Z M22^{-1} Z^T W, assembled unit by unit.
    let mut a = vec![0.0; n * n];
    for u in 0..n {
        a[u * n + u] = w[u];
    }
    for u in 0..n {
        let (ubc, uuc) = z_cols(u);
        for v in 0..n {
            let (vbc, vuc) = z_cols(v);
            let quad = m22_inv[ubc * q + vbc]
                + m22_inv[ubc * q + vuc]
                + m22_inv[uuc * q + vbc]
                + m22_inv[uuc * q + vuc];
            a[u * n + v] -= w[u] * quad * w[v];
        }
    }

    // X^T A X with X the n x t cell-means indicator matrix.
    let labels = design.flat();
    let mut raw = vec![0.0; t * t];
    for u in 0..n {
        let g = labels[u] as usize - 1;
        for v in 0..n {
            let h = labels[v] as usize - 1;
            raw[g * t + h] += a[u * n + v];
        }
    }
    // symmetrize away elimination round-off
    let mut m = SymMatrix::zeros(t);
    for i in 0..t {
        m.set(i, i, raw[i * t + i]);
        for j in 0..i {
            m.set(i, j, 0.5 * (raw[i * t + j] + raw[j * t + i]));
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::BlockDesign;
    use proptest::prelude::*;

    fn priors(lambda: &[f64], sigma2: f64, sigmab2: f64) -> PointPriors {
        PointPriors::new(lambda.to_vec(), sigma2, sigmab2).unwrap()
    }

    #[test]
    fn ell_vector_examples() {
        let p = priors(&[1.0, 1.0, 1.0], 0.0, 1.0);
        assert_eq!(ell_vector(&[1, 2, 3], &p), vec![1.0, 1.0, 1.0]);

        let p = priors(&[3.0, 7.0], 0.5, 0.0);
        assert_eq!(ell_vector(&[1, 2, 2], &p), vec![0.0, 0.0, 0.0]);

        let p = priors(&[1.0, 2.0, 4.0], 0.25, 0.25);
        let ell = ell_vector(&[1, 2, 3], &p);
        assert!((ell[0] - 0.2).abs() < 1e-15);
        assert!((ell[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((ell[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn omega_reduces_to_diagonal_without_block_variance() {
        let p = priors(&[1.0, 2.0, 4.0], 0.25, 0.0);
        let omega = omega_block(&[3, 1, 2], &p);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j {
                    let lam = p.lambda()[[3usize, 1, 2][i] - 1];
                    1.0 / (0.25 + 1.0 / lam)
                } else {
                    0.0
                };
                assert_eq!(omega.get(i, j), expect);
            }
        }
    }

    #[test]
    fn omega_scalar_case_matches_total_variance() {
        let p = priors(&[2.0], 0.5, 1.0);
        let omega = omega_block(&[1], &p);
        // 1/(sigma2 + 1/lambda + sigmab2) for a single unit
        assert!((omega.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn omega_matches_dense_inverse_of_block_covariance() {
        // Omega must equal inv(diag(sigma2 + 1/lambda) + sigmab2 * J)
        let p = priors(&[1.0, 2.0, 4.0], 0.25, 0.25);
        let row = [1u32, 2, 3];
        let k = row.len();
        let mut v = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let mut entry = p.sigmab2();
                if i == j {
                    entry += p.sigma2() + 1.0 / p.lambda()[row[i] as usize - 1];
                }
                v[i * k + j] = entry;
            }
        }
        let vinv = invert_dense(v, k).unwrap();
        let omega = omega_block(&row, &p);
        for i in 0..k {
            for j in 0..k {
                assert!((omega.get(i, j) - vinv[i * k + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn omega_limit_small_block_variance() {
        let p = priors(&[1.0, 2.0, 4.0], 0.25, 1e-12);
        let omega = omega_block(&[1, 2, 3], &p);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j {
                    1.0 / (0.25 + 1.0 / p.lambda()[i])
                } else {
                    0.0
                };
                assert!((omega.get(i, j) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn omega_positive_definite_with_block_variance() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let t = rng.gen_range(1..=4usize);
            let k = rng.gen_range(1..=5usize);
            let lambda: Vec<f64> = (0..t).map(|_| rng.gen_range(0.5..16.0)).collect();
            let p = priors(&lambda, rng.gen_range(0.0..2.0), rng.gen_range(0.01..4.0));
            let row: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=t as u32)).collect();
            assert!(
                omega_block(&row, &p).cholesky().is_some(),
                "omega must be PD for sigmab2 > 0"
            );
        }
    }

    #[test]
    fn unit_rates_is_lambda_per_unit() {
        let d = BlockDesign::new(3, 1, 3, &[vec![1, 2, 3]]).unwrap();
        let p = priors(&[1.0, 2.0, 4.0], 0.25, 0.25);
        assert_eq!(unit_rates(&d, &p), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn missing_treatment_zeroes_its_row_and_column() {
        let d = BlockDesign::new(3, 2, 3, &[vec![1, 2, 1], vec![2, 1, 2]]).unwrap();
        let p = priors(&[1.0, 2.0, 4.0], 0.25, 0.25);
        let m = marginal_information(&d, &p);
        for j in 0..3 {
            assert_eq!(m.get(2, j), 0.0);
            assert_eq!(m.get(j, 2), 0.0);
        }
        assert!(m.cholesky().is_none());
    }

    #[test]
    fn closed_form_matches_hand_computed_two_unit_case() {
        // t=2, b=1, k=2, lambda=(1,1), sigma2=sigmab2=1:
        // the partitioned route gives [[3/8, -1/8], [-1/8, 3/8]]
        let d = BlockDesign::new(2, 1, 2, &[vec![1, 2]]).unwrap();
        let p = priors(&[1.0, 1.0], 1.0, 1.0);
        let m = marginal_information(&d, &p);
        assert!((m.get(0, 0) - 0.375).abs() < 1e-12);
        assert!((m.get(1, 1) - 0.375).abs() < 1e-12);
        assert!((m.get(0, 1) + 0.125).abs() < 1e-12);

        let naive = naive_marginal_information(&d, &p).unwrap();
        assert!(m.max_abs_diff(&naive) < 1e-12);
        assert!(naive.get(0, 1) < 0.0);
    }

    #[test]
    fn closed_form_matches_naive_on_complete_block_design() {
        let d = BlockDesign::new(3, 2, 3, &[vec![1, 2, 3], vec![1, 2, 3]]).unwrap();
        let p = priors(&[1.0, 2.0, 4.0], 0.25, 0.25);
        let m = marginal_information(&d, &p);
        let naive = naive_marginal_information(&d, &p).unwrap();
        assert!(m.max_abs_diff(&naive) < 1e-10);
    }

    #[test]
    fn naive_requires_positive_variances() {
        let d = BlockDesign::new(2, 1, 2, &[vec![1, 2]]).unwrap();
        let p = priors(&[1.0, 1.0], 0.0, 1.0);
        assert!(matches!(
            naive_marginal_information(&d, &p),
            Err(Error::SingularG(_))
        ));
        let p = priors(&[1.0, 1.0], 1.0, 0.0);
        assert!(matches!(
            naive_marginal_information(&d, &p),
            Err(Error::SingularG(_))
        ));
    }

    #[test]
    fn information_grows_with_rate() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let t = rng.gen_range(2..=4usize);
            let b = rng.gen_range(1..=3usize);
            let k = rng.gen_range(1..=5usize);
            let alloc: Vec<Vec<u32>> = (0..b)
                .map(|_| (0..k).map(|_| rng.gen_range(1..=t as u32)).collect())
                .collect();
            let d = BlockDesign::new(t, b, k, &alloc).unwrap();
            let h = rng.gen_range(0..t);
            if d.replication_counts()[h] == 0 {
                continue;
            }
            let lambda: Vec<f64> = (0..t).map(|_| rng.gen_range(0.5..16.0)).collect();
            let sigma2 = rng.gen_range(0.05..2.0);
            let sigmab2 = rng.gen_range(0.0..2.0);
            let mut bumped = lambda.clone();
            bumped[h] *= 1.5;
            let m0 = marginal_information(&d, &priors(&lambda, sigma2, sigmab2));
            let m1 = marginal_information(&d, &priors(&bumped, sigma2, sigmab2));
            assert!(
                m1.get(h, h) > m0.get(h, h),
                "raising lambda[{h}] must raise the information diagonal"
            );
        }
    }

    proptest! {
        // Both information routes agree over the variance grid.
        #[test]
        fn oracle_equivalence_over_grid(
            seed in 0u64..10_000,
            t in 1usize..=4,
            b in 1usize..=3,
            k in 1usize..=5,
            s2 in prop::sample::select(vec![0.01f64, 0.25, 4.0]),
            sb2 in prop::sample::select(vec![0.01f64, 0.25, 4.0]),
        ) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let grid = [0.5f64, 1.0, 4.0, 16.0];
            let lambda: Vec<f64> = (0..t).map(|_| *grid.choose(&mut rng).unwrap()).collect();
            let alloc: Vec<Vec<u32>> = (0..b)
                .map(|_| (0..k).map(|_| rng.gen_range(1..=t as u32)).collect())
                .collect();
            let d = BlockDesign::new(t, b, k, &alloc).unwrap();
            let p = priors(&lambda, s2, sb2);
            let fast = marginal_information(&d, &p);
            let naive = naive_marginal_information(&d, &p).unwrap();
            prop_assert!(fast.max_abs_diff(&naive) <= 1e-8);
        }

        // Unit order within blocks and block order never change the matrix.
        #[test]
        fn permutation_invariance_is_exact(
            seed in 0u64..10_000,
            t in 1usize..=4,
            b in 1usize..=4,
            k in 1usize..=5,
        ) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let lambda: Vec<f64> = (0..t).map(|_| rng.gen_range(0.5..16.0)).collect();
            let p = priors(&lambda, rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let alloc: Vec<Vec<u32>> = (0..b)
                .map(|_| (0..k).map(|_| rng.gen_range(1..=t as u32)).collect())
                .collect();
            let d = BlockDesign::new(t, b, k, &alloc).unwrap();

            let mut rows = alloc.clone();
            for row in &mut rows {
                row.shuffle(&mut rng);
            }
            rows.shuffle(&mut rng);
            let permuted = BlockDesign::new(t, b, k, &rows).unwrap();

            let m0 = marginal_information(&d, &p);
            let m1 = marginal_information(&permuted, &p);
            prop_assert_eq!(m0.rows(), m1.rows());
        }
    }
}
