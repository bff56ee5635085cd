//! Design search: simulated annealing over treatment allocations, and
//! exhaustive enumeration of design equivalence classes on small instances.
//!
//! The annealer starts each chain from a uniformly random allocation and
//! perturbs it by substituting the treatments of one or more randomly
//! chosen units with uniform draws from the treatment set. The number of
//! substitutions per step is drawn from a non-increasing probability vector
//! so occasional multi-unit moves can hop out of local minima. Worsening
//! moves are accepted with the Metropolis probability `exp(-delta / T)`
//! under a geometric cooling schedule, and independent restarts are merged
//! by taking the minimum value, ties going to the lexicographically
//! smallest allocation.
//!
//! The exhaustive route enumerates one canonical representative per
//! equivalence class (sorted units within blocks, blocks sorted), which is
//! sound because the objective is invariant under both permutations.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::design::{BlockDesign, ContrastSet, PointPriors};
use crate::error::{Error, Result};
use crate::objective::{Criterion, DesignScore, Evaluator};

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 20150925;

/// Default ceiling on the number of enumerated design classes.
pub const DEFAULT_CLASS_CAP: u64 = 10_000_000;

/// Starting temperature: fixed by the caller or calibrated from sampled
/// move deltas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialTemp {
    Auto,
    Fixed(f64),
}

/// Simulated annealing schedule and reproducibility knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub initial_temp: InitialTemp,
    /// Geometric cooling multiplier, strictly inside (0, 1).
    pub cooling_factor: f64,
    /// Steps at each temperature; `None` means `50 * b * k`.
    pub steps_per_temp: Option<u64>,
    pub temp_levels: u32,
    /// `swap_probs[m-1]` is the probability of substituting `m` units in
    /// one step; entries must be non-increasing and sum to 1.
    pub swap_probs: Vec<f64>,
    pub restarts: u32,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            initial_temp: InitialTemp::Auto,
            cooling_factor: 0.95,
            steps_per_temp: None,
            temp_levels: 100,
            swap_probs: vec![0.7, 0.2, 0.1],
            restarts: 5,
            seed: DEFAULT_SEED,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if let InitialTemp::Fixed(v) = self.initial_temp {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(
                    "initial_temp must be positive".into(),
                ));
            }
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return Err(Error::InvalidArgument(
                "cooling_factor must lie strictly between 0 and 1".into(),
            ));
        }
        if self.steps_per_temp == Some(0) {
            return Err(Error::InvalidArgument(
                "steps_per_temp must be positive".into(),
            ));
        }
        if self.temp_levels == 0 {
            return Err(Error::InvalidArgument(
                "temp_levels must be positive".into(),
            ));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be positive".into()));
        }
        if self.swap_probs.is_empty() {
            return Err(Error::InvalidArgument(
                "swap_probs must not be empty".into(),
            ));
        }
        if self
            .swap_probs
            .iter()
            .any(|&p| !(p.is_finite() && (0.0..=1.0).contains(&p)))
        {
            return Err(Error::InvalidArgument(
                "swap_probs entries must lie in [0, 1]".into(),
            ));
        }
        if self.swap_probs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "swap_probs must be non-increasing".into(),
            ));
        }
        let total: f64 = self.swap_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("swap_probs must sum to 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a search: the best design found, its score, the record of
/// best-value updates (annealing only) and the number of objective
/// evaluations spent.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_design: BlockDesign,
    pub best_score: DesignScore,
    pub trace: Option<Vec<(u64, f64)>>,
    pub evaluations: u64,
}

/// Number of substitutions for one step, drawn from the probability vector.
pub(crate) fn sample_substitution_count<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i + 1;
        }
    }
    probs.len()
}

/// Draws the unit positions and replacement labels of one move: `m` from
/// `swap_probs`, then `m` distinct positions, each receiving an independent
/// uniform label (possibly its current one).
fn draw_move<R: Rng + ?Sized>(
    rng: &mut R,
    swap_probs: &[f64],
    n_units: usize,
    t: usize,
    out: &mut Vec<(usize, u32)>,
) {
    out.clear();
    let m = sample_substitution_count(rng, swap_probs).min(n_units);
    for _ in 0..m {
        let pos = loop {
            let p = rng.gen_range(0..n_units);
            if !out.iter().any(|&(q, _)| q == p) {
                break p;
            }
        };
        let label = rng.gen_range(1..=t as u32);
        out.push((pos, label));
    }
}

/// Candidate generator: returns a design differing from `design` in at most
/// `m` unit positions, where `m` is drawn from `swap_probs`.
pub fn propose_candidate<R: Rng + ?Sized>(
    design: &BlockDesign,
    rng: &mut R,
    swap_probs: &[f64],
) -> BlockDesign {
    let mut alloc = design.flat().to_vec();
    let mut moves = Vec::new();
    draw_move(
        rng,
        swap_probs,
        alloc.len(),
        design.treatments(),
        &mut moves,
    );
    for (pos, label) in moves {
        alloc[pos] = label;
    }
    BlockDesign::from_flat_unchecked(
        design.treatments(),
        design.blocks(),
        design.block_size(),
        alloc,
    )
}

/// Mutable annealing state: the flat allocation plus its per-block
/// replication counts, kept in sync move by move.
struct AllocState {
    t: usize,
    k: usize,
    alloc: Vec<u32>,
    counts: Vec<u32>, // b x t
}

impl AllocState {
    fn random<R: Rng + ?Sized>(rng: &mut R, t: usize, b: usize, k: usize) -> Self {
        let alloc: Vec<u32> = (0..b * k).map(|_| rng.gen_range(1..=t as u32)).collect();
        let mut counts = vec![0u32; b * t];
        for (u, &label) in alloc.iter().enumerate() {
            counts[(u / k) * t + label as usize - 1] += 1;
        }
        AllocState {
            t,
            k,
            alloc,
            counts,
        }
    }

    /// Applies the move, recording prior labels in `undo`.
    fn apply(&mut self, moves: &[(usize, u32)], undo: &mut Vec<(usize, u32)>) {
        undo.clear();
        for &(pos, label) in moves {
            let old = self.alloc[pos];
            if old == label {
                continue;
            }
            let block = pos / self.k;
            self.counts[block * self.t + old as usize - 1] -= 1;
            self.counts[block * self.t + label as usize - 1] += 1;
            self.alloc[pos] = label;
            undo.push((pos, old));
        }
    }

    fn revert(&mut self, undo: &[(usize, u32)]) {
        for &(pos, old) in undo.iter().rev() {
            let current = self.alloc[pos];
            let block = pos / self.k;
            self.counts[block * self.t + current as usize - 1] -= 1;
            self.counts[block * self.t + old as usize - 1] += 1;
            self.alloc[pos] = old;
        }
    }
}

pub(crate) fn initial_temp_for_median(median_worsening: f64) -> f64 {
    // acceptance probability 0.8 at the median worsening move
    median_worsening / 1.25f64.ln()
}

fn calibrate_impl<R: Rng + ?Sized>(
    evaluator: &mut Evaluator,
    t: usize,
    b: usize,
    k: usize,
    rng: &mut R,
) -> (f64, u64) {
    let single = [1.0];
    let mut moves = Vec::new();
    let mut undo = Vec::new();
    let mut worsenings = Vec::new();
    let mut evaluations = 0;
    for _ in 0..100 {
        let mut state = AllocState::random(rng, t, b, k);
        let before = evaluator.score_counts(&state.counts, b);
        draw_move(rng, &single, b * k, t, &mut moves);
        state.apply(&moves, &mut undo);
        let after = evaluator.score_counts(&state.counts, b);
        evaluations += 2;
        let delta = after - before;
        if delta.is_finite() && delta > 0.0 {
            worsenings.push(delta);
        }
    }
    if worsenings.is_empty() {
        return (1.0, evaluations);
    }
    worsenings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = worsenings.len() / 2;
    let median = if worsenings.len() % 2 == 1 {
        worsenings[mid]
    } else {
        0.5 * (worsenings[mid - 1] + worsenings[mid])
    };
    (initial_temp_for_median(median), evaluations)
}

/// Samples 100 single-substitution moves from random designs and returns
/// the temperature at which the median worsening move would be accepted
/// with probability 0.8; falls back to 1.0 when no move worsens.
pub fn calibrate_initial_temp<R: Rng + ?Sized>(
    priors: &PointPriors,
    t: usize,
    b: usize,
    k: usize,
    contrasts: &ContrastSet,
    criterion: Criterion,
    rng: &mut R,
) -> Result<f64> {
    check_instance(priors, t, b, k, contrasts)?;
    let mut evaluator = Evaluator::new(priors, contrasts, criterion);
    Ok(calibrate_impl(&mut evaluator, t, b, k, rng).0)
}

fn check_instance(
    priors: &PointPriors,
    t: usize,
    b: usize,
    k: usize,
    contrasts: &ContrastSet,
) -> Result<()> {
    if t < 1 || b < 1 || k < 1 {
        return Err(Error::InvalidArgument(
            "t, b and k must all be at least 1".into(),
        ));
    }
    if priors.treatments() != t {
        return Err(Error::DimensionMismatch(format!(
            "priors carry {} rates but t = {t}",
            priors.treatments()
        )));
    }
    if contrasts.rows() != t {
        return Err(Error::DimensionMismatch(format!(
            "contrast matrix has {} rows but t = {t}",
            contrasts.rows()
        )));
    }
    Ok(())
}

/// Runs `restarts` independent annealing chains and returns the best
/// feasible design seen. Deterministic for a given config: chain `i` owns
/// the ChaCha stream `i + 1` of the seed, and stream 0 is reserved for
/// temperature calibration.
pub fn anneal(
    priors: &PointPriors,
    t: usize,
    b: usize,
    k: usize,
    contrasts: &ContrastSet,
    criterion: Criterion,
    config: &AnnealConfig,
) -> Result<SearchResult> {
    check_instance(priors, t, b, k, contrasts)?;
    config.validate()?;
    if t > b * k {
        // some treatment must be absent, so every design is singular
        return Err(Error::NoFeasibleDesign);
    }

    let n_units = b * k;
    let steps_per_temp = config.steps_per_temp.unwrap_or(50 * n_units as u64);
    let mut evaluator = Evaluator::new(priors, contrasts, criterion);
    let mut evaluations: u64 = 0;

    let initial_temp = match config.initial_temp {
        InitialTemp::Fixed(v) => v,
        InitialTemp::Auto => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(0);
            let (t0, evals) = calibrate_impl(&mut evaluator, t, b, k, &mut rng);
            evaluations += evals;
            t0
        }
    };

    let mut best: Option<(f64, Vec<u32>)> = None;
    let mut trace: Vec<(u64, f64)> = Vec::new();
    let mut moves = Vec::new();
    let mut undo = Vec::new();

    for chain in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(chain as u64 + 1);

        let mut state = AllocState::random(&mut rng, t, b, k);
        let mut current = evaluator.score_counts(&state.counts, b);
        evaluations += 1;

        let mut chain_best = current;
        let mut chain_best_alloc = state.alloc.clone();
        let mut temperature = initial_temp;

        for _ in 0..config.temp_levels {
            for _ in 0..steps_per_temp {
                draw_move(&mut rng, &config.swap_probs, n_units, t, &mut moves);
                state.apply(&moves, &mut undo);
                let candidate = evaluator.score_counts(&state.counts, b);
                evaluations += 1;
                let accept = candidate <= current
                    || rng.gen::<f64>() < ((current - candidate) / temperature).exp();
                if accept {
                    current = candidate;
                    if candidate < chain_best {
                        chain_best = candidate;
                        chain_best_alloc.copy_from_slice(&state.alloc);
                        let improves_global = match &best {
                            Some((v, _)) => candidate < *v,
                            None => candidate.is_finite(),
                        };
                        if improves_global {
                            trace.push((evaluations, candidate));
                        }
                    }
                } else {
                    state.revert(&undo);
                }
            }
            temperature *= config.cooling_factor;
        }

        if chain_best.is_finite() {
            let replace = match &best {
                None => true,
                Some((v, alloc)) => {
                    chain_best < *v || (chain_best == *v && chain_best_alloc < *alloc)
                }
            };
            if replace {
                best = Some((chain_best, chain_best_alloc));
            }
        }
    }

    let (value, alloc) = best.ok_or(Error::NoFeasibleDesign)?;
    Ok(SearchResult {
        best_design: BlockDesign::from_flat_unchecked(t, b, k, alloc),
        best_score: DesignScore::new(criterion, value),
        trace: Some(trace),
        evaluations,
    })
}

fn binomial_u128(n: u128, r: u128) -> Option<u128> {
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}

/// Number of design equivalence classes: multisets of size `b` over the
/// multisets of `k` labels from `t` treatments. `None` means the count
/// overflows, and is certainly above any practical cap.
pub fn design_class_count(t: usize, b: usize, k: usize) -> Option<u128> {
    let rows = binomial_u128((t + k - 1) as u128, k as u128)?;
    binomial_u128(rows + b as u128 - 1, b as u128)
}

/// All non-decreasing label rows of length `k` over `1..=t`, in
/// lexicographic order, paired with their replication count vectors.
fn canonical_rows(t: usize, k: usize) -> Vec<(Vec<u32>, Vec<u32>)> {
    let mut rows = Vec::new();
    let mut row = vec![0u32; k];
    fn recurse(
        t: usize,
        k: usize,
        depth: usize,
        min_label: u32,
        row: &mut Vec<u32>,
        rows: &mut Vec<(Vec<u32>, Vec<u32>)>,
    ) {
        if depth == k {
            let mut counts = vec![0u32; t];
            for &l in row.iter() {
                counts[l as usize - 1] += 1;
            }
            rows.push((row.clone(), counts));
            return;
        }
        for label in min_label..=t as u32 {
            row[depth] = label;
            recurse(t, k, depth + 1, label, row, rows);
        }
    }
    recurse(t, k, 0, 1, &mut row, &mut rows);
    rows
}

/// Enumerates every design class under the cap, scores each and returns the
/// global minimum; ties break toward the lexicographically smallest design.
pub fn exhaustive_search_with_cap(
    priors: &PointPriors,
    t: usize,
    b: usize,
    k: usize,
    contrasts: &ContrastSet,
    criterion: Criterion,
    cap: u64,
) -> Result<SearchResult> {
    check_instance(priors, t, b, k, contrasts)?;
    let classes = design_class_count(t, b, k).unwrap_or(u128::MAX);
    if classes > cap as u128 {
        return Err(Error::CapExceeded { classes, cap });
    }

    let rows = canonical_rows(t, k);
    let mut evaluator = Evaluator::new(priors, contrasts, criterion);
    let mut counts = vec![0u32; b * t];
    let mut chosen = vec![0usize; b];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluations: u64 = 0;

    // depth-first walk over non-decreasing row index tuples
    fn walk(
        depth: usize,
        start: usize,
        b: usize,
        t: usize,
        rows: &[(Vec<u32>, Vec<u32>)],
        counts: &mut Vec<u32>,
        chosen: &mut Vec<usize>,
        evaluator: &mut Evaluator,
        best: &mut Option<(f64, Vec<usize>)>,
        evaluations: &mut u64,
    ) {
        if depth == b {
            let value = evaluator.score_counts(counts, b);
            *evaluations += 1;
            if value.is_finite() {
                let better = match best {
                    None => true,
                    Some((v, _)) => value < *v,
                };
                if better {
                    *best = Some((value, chosen.clone()));
                }
            }
            return;
        }
        for r in start..rows.len() {
            counts[depth * t..(depth + 1) * t].copy_from_slice(&rows[r].1);
            chosen[depth] = r;
            walk(
                depth + 1,
                r,
                b,
                t,
                rows,
                counts,
                chosen,
                evaluator,
                best,
                evaluations,
            );
        }
    }
    walk(
        0,
        0,
        b,
        t,
        &rows,
        &mut counts,
        &mut chosen,
        &mut evaluator,
        &mut best,
        &mut evaluations,
    );

    let (value, indices) = best.ok_or(Error::NoFeasibleDesign)?;
    let alloc: Vec<u32> = indices.iter().flat_map(|&r| rows[r].0.clone()).collect();
    Ok(SearchResult {
        best_design: BlockDesign::from_flat_unchecked(t, b, k, alloc),
        best_score: DesignScore::new(criterion, value),
        trace: None,
        evaluations,
    })
}

/// [`exhaustive_search_with_cap`] at the default cap.
pub fn exhaustive_search(
    priors: &PointPriors,
    t: usize,
    b: usize,
    k: usize,
    contrasts: &ContrastSet,
    criterion: Criterion,
) -> Result<SearchResult> {
    exhaustive_search_with_cap(priors, t, b, k, contrasts, criterion, DEFAULT_CLASS_CAP)
}
