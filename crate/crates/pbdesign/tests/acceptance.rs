//! Acceptance suite: each test runs one exit criterion at its stated
//! tolerance and prints a `criterion N ... PASS/FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`, or on failure).
//!
//! Supplementary checks at the bottom pin down reproducible neighbours of
//! the two criteria that the reference results overstate; see the test
//! bodies for the computed-vs-stated values.

use std::time::Instant;

use pbdesign::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn priors(lambda: &[f64], sigma2: f64, sigmab2: f64) -> PointPriors {
    PointPriors::new(lambda.to_vec(), sigma2, sigmab2).unwrap()
}

fn design_from_counts(t: usize, block_counts: &[Vec<u32>]) -> BlockDesign {
    let rows: Vec<Vec<u32>> = block_counts
        .iter()
        .map(|counts| {
            let mut row = Vec::new();
            for (h, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    row.push(h as u32 + 1);
                }
            }
            row
        })
        .collect();
    let k = rows[0].len();
    BlockDesign::new(t, rows.len(), k, &rows).unwrap()
}

fn report(line: &str, ok: bool) {
    println!("{line} ... {}", if ok { "PASS" } else { "FAIL" });
}

/// Twelve three-treatment prior settings: enumeration must return the
/// reference optimal design for both criteria, and the efficiency of the
/// complete-block reference design must match the tabulated values within
/// 0.001.
#[test]
fn criterion_1_reference_efficiencies_three_treatments() {
    let start = Instant::now();
    let contrasts = baseline_contrasts(3).unwrap();
    let rcbd = balanced_reference(3, 2, 3).unwrap();
    let skew = BlockDesign::new(3, 2, 3, &[vec![1, 1, 2], vec![1, 2, 3]]).unwrap();

    // (lambda, sigmab2, C efficiency of the RCBD)
    let rows: [(&[f64], f64, f64); 12] = [
        (&[1.0, 1.0, 1.0], 0.016, 1.0),
        (&[1.0, 1.0, 2.0], 0.016, 0.988),
        (&[1.0, 2.0, 4.0], 0.016, 0.919),
        (&[1.0, 4.0, 16.0], 0.016, 0.851),
        (&[1.0, 1.0, 1.0], 0.25, 1.0),
        (&[1.0, 1.0, 2.0], 0.25, 1.0),
        (&[1.0, 2.0, 4.0], 0.25, 0.990),
        (&[1.0, 4.0, 16.0], 0.25, 0.923),
        (&[1.0, 1.0, 1.0], 4.0, 1.0),
        (&[1.0, 1.0, 2.0], 4.0, 1.0),
        (&[1.0, 2.0, 4.0], 4.0, 1.0),
        (&[1.0, 4.0, 16.0], 4.0, 1.0),
    ];

    let mut failures = Vec::new();
    for (lambda, sigmab2, c_eff) in rows {
        let p = priors(lambda, 0.25, sigmab2);

        let c_best = exhaustive_search(&p, 3, 2, 3, &contrasts, Criterion::C).unwrap();
        let expected_c = if c_eff < 1.0 { &skew } else { &rcbd };
        if c_best.best_design.canonical_form() != expected_c.canonical_form() {
            failures.push(format!(
                "C optimum for lambda={lambda:?} sigmab2={sigmab2}: got {:?}",
                c_best.best_design.rows()
            ));
        }
        let rcbd_c = objective(&rcbd, &p, &contrasts, Criterion::C).unwrap();
        let eff = relative_efficiency(&rcbd_c, &c_best.best_score).unwrap();
        if (eff - c_eff).abs() > 0.001 {
            failures.push(format!(
                "C efficiency for lambda={lambda:?} sigmab2={sigmab2}: got {eff:.4} want {c_eff}"
            ));
        }

        let da_best = exhaustive_search(&p, 3, 2, 3, &contrasts, Criterion::DA).unwrap();
        if da_best.best_design.canonical_form() != rcbd.canonical_form() {
            failures.push(format!(
                "DA optimum for lambda={lambda:?} sigmab2={sigmab2}: got {:?}",
                da_best.best_design.rows()
            ));
        }
        let rcbd_da = objective(&rcbd, &p, &contrasts, Criterion::DA).unwrap();
        let eff_da = relative_efficiency(&rcbd_da, &da_best.best_score).unwrap();
        if (eff_da - 1.0).abs() > 0.001 {
            failures.push(format!(
                "DA efficiency for lambda={lambda:?} sigmab2={sigmab2}: got {eff_da:.4}"
            ));
        }
    }

    let ok = failures.is_empty();
    report(
        &format!(
            "criterion 1 (12 reference settings, enumeration + RCBD efficiency, {:.2?})",
            start.elapsed()
        ),
        ok,
    );
    assert!(ok, "criterion 1 failures:\n{}", failures.join("\n"));
}

struct GeneCase {
    name: &'static str,
    lambda: [f64; 2],
    sigma: f64,
    sigma_u: f64,
    expected_block: [u32; 2],
}

const GENES: [GeneCase; 4] = [
    GeneCase {
        name: "A",
        lambda: [128.66, 128.79],
        sigma: 0.20104,
        sigma_u: 0.12874,
        expected_block: [4, 3],
    },
    GeneCase {
        name: "B",
        lambda: [908.77, 908.76],
        sigma: 0.13382,
        sigma_u: 0.27905,
        expected_block: [3, 4],
    },
    GeneCase {
        name: "C",
        lambda: [1855.30, 1.05],
        sigma: 0.0,
        sigma_u: 0.19885,
        expected_block: [1, 6],
    },
    GeneCase {
        name: "D",
        lambda: [1.23, 34.40],
        sigma: 0.00002,
        sigma_u: 0.26546,
        expected_block: [5, 2],
    },
];

fn gene_priors(gene: &GeneCase) -> PointPriors {
    priors(
        &gene.lambda,
        gene.sigma * gene.sigma,
        gene.sigma_u * gene.sigma_u,
    )
}

/// Per-gene sequencing priors: annealing must return the stated per-block
/// replications in at least 95 of 100 seeded runs.
#[test]
fn criterion_2_per_gene_optima() {
    let contrasts = baseline_contrasts(2).unwrap();
    let mut failures = Vec::new();

    for gene in &GENES {
        let start = Instant::now();
        let p = gene_priors(gene);
        let expected: Vec<Vec<u32>> = vec![gene.expected_block.to_vec(); 3];
        let mut hits = 0;
        let mut sample_miss: Option<BlockDesign> = None;
        for run in 0..100u64 {
            let config = AnnealConfig {
                seed: 8_600_000 + run,
                ..AnnealConfig::default()
            };
            let result = anneal(&p, 2, 3, 7, &contrasts, Criterion::C, &config).unwrap();
            if result.best_design.block_counts() == expected {
                hits += 1;
            } else if sample_miss.is_none() {
                sample_miss = Some(result.best_design.clone());
            }
        }
        let ok = hits >= 95;
        report(
            &format!(
                "criterion 2 (gene {}: every block {:?} in >=95/100 runs; got {hits}, {:.2?})",
                gene.name,
                gene.expected_block,
                start.elapsed()
            ),
            ok,
        );
        if !ok {
            let found = sample_miss.unwrap();
            let stated = design_from_counts(2, &expected);
            let v_found = objective(&found, &p, &contrasts, Criterion::C).unwrap();
            let v_stated = objective(&stated, &p, &contrasts, Criterion::C).unwrap();
            failures.push(format!(
                "gene {}: {hits}/100 runs returned {:?}; the search instead finds {:?} \
                 (objective {:.6e} vs {:.6e} for the stated design)",
                gene.name,
                expected,
                found.block_counts(),
                v_found.value(),
                v_stated.value()
            ));
        }
    }

    assert!(failures.is_empty(), "criterion 2 failures:\n{}", failures.join("\n"));
}

/// Owl broods: annealing must return fifteen blocks of replication
/// (3,3,2,2) for treatments (1,2,3,4) in at least 18 of 20 seeded runs.
#[test]
fn criterion_3_owl_brood_optimum() {
    let start = Instant::now();
    let p = priors(
        &[1.33, 1.36, 0.44, 0.54],
        0.47f64 * 0.47,
        1.11f64 * 1.11,
    );
    let contrasts = baseline_contrasts(4).unwrap();
    let expected: Vec<Vec<u32>> = vec![vec![3, 3, 2, 2]; 15];

    let mut hits = 0;
    let mut sample_miss: Option<BlockDesign> = None;
    for run in 0..20u64 {
        let config = AnnealConfig {
            seed: 7_700_000 + run,
            ..AnnealConfig::default()
        };
        let result = anneal(&p, 4, 15, 10, &contrasts, Criterion::C, &config).unwrap();
        if result.best_design.block_counts() == expected {
            hits += 1;
        } else if sample_miss.is_none() {
            sample_miss = Some(result.best_design.clone());
        }
    }

    let ok = hits >= 18;
    report(
        &format!(
            "criterion 3 (owl broods: every block (3,3,2,2) in >=18/20 runs; got {hits}, {:.2?})",
            start.elapsed()
        ),
        ok,
    );
    if !ok {
        let found = sample_miss.unwrap();
        let stated = design_from_counts(4, &expected);
        let v_found = objective(&found, &p, &contrasts, Criterion::C).unwrap();
        let v_stated = objective(&stated, &p, &contrasts, Criterion::C).unwrap();
        panic!(
            "criterion 3: {hits}/20 runs returned all-(3,3,2,2); the search instead finds \
             designs like {:?} (objective {:.6e} vs {:.6e} for the stated design)",
            found.block_counts(),
            v_found.value(),
            v_stated.value()
        );
    }
}

/// Closed-form and partitioned-matrix information must agree to 1e-8 over
/// 500 random instances.
#[test]
fn criterion_4_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(44_000);
    let mut max_diff = 0.0f64;
    for _ in 0..500 {
        let t = rng.gen_range(1..=4usize);
        let b = rng.gen_range(1..=3usize);
        let k = rng.gen_range(1..=5usize);
        let lambda: Vec<f64> = (0..t).map(|_| rng.gen_range(0.5..=16.0)).collect();
        let p = priors(
            &lambda,
            rng.gen_range(0.01..=4.0),
            rng.gen_range(0.01..=4.0),
        );
        let alloc: Vec<Vec<u32>> = (0..b)
            .map(|_| (0..k).map(|_| rng.gen_range(1..=t as u32)).collect())
            .collect();
        let d = BlockDesign::new(t, b, k, &alloc).unwrap();
        let fast = marginal_information(&d, &p);
        let naive = naive_marginal_information(&d, &p).unwrap();
        max_diff = max_diff.max(fast.max_abs_diff(&naive));
    }
    let ok = max_diff <= 1e-8;
    report(
        &format!(
            "criterion 4 (500 random instances, closed form vs partitioned route, max diff {max_diff:.2e}, {:.2?})",
            start.elapsed()
        ),
        ok,
    );
    assert!(ok, "criterion 4: max difference {max_diff:.3e} exceeds 1e-8");
}

/// Objective invariance under permutations, efficiency invariance under
/// contrast rescaling, and orthonormality of the generated Helmert basis.
#[test]
fn criterion_5_invariance_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(55_000);
    let mut failures = Vec::new();

    for trial in 0..200 {
        let t = rng.gen_range(2..=4usize);
        let b = rng.gen_range(1..=4usize);
        let k = rng.gen_range(2..=5usize);
        let lambda: Vec<f64> = (0..t).map(|_| rng.gen_range(0.5..=16.0)).collect();
        let p = priors(&lambda, rng.gen_range(0.0..=2.0), rng.gen_range(0.0..=2.0));
        let contrasts = baseline_contrasts(t).unwrap();
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

        for crit in [Criterion::C, Criterion::DA] {
            let s0 = objective(&d, &p, &contrasts, crit).unwrap();
            let s1 = objective(&permuted, &p, &contrasts, crit).unwrap();
            let diff = if s0.is_feasible() {
                (s0.value() - s1.value()).abs()
            } else if s1.is_feasible() {
                f64::INFINITY
            } else {
                0.0
            };
            if diff > 1e-12 * s0.value().abs().max(1.0) {
                failures.push(format!("trial {trial}: permutation moved {crit} by {diff:e}"));
            }
        }

        // efficiency is invariant when B is rescaled by a common factor
        if d.replication_counts().iter().all(|&r| r > 0) {
            let reference = balanced_reference(t, b, k).unwrap();
            let scaled = contrasts.scaled(3.0);
            for crit in [Criterion::C, Criterion::DA] {
                let c0 = objective(&d, &p, &contrasts, crit).unwrap();
                let r0 = objective(&reference, &p, &contrasts, crit).unwrap();
                let c1 = objective(&d, &p, &scaled, crit).unwrap();
                let r1 = objective(&reference, &p, &scaled, crit).unwrap();
                let e0 = relative_efficiency(&c0, &r0).unwrap();
                let e1 = relative_efficiency(&c1, &r1).unwrap();
                if (e0 - e1).abs() > 1e-12 * e0.abs().max(1.0) {
                    failures.push(format!(
                        "trial {trial}: contrast rescaling moved {crit} efficiency by {:e}",
                        (e0 - e1).abs()
                    ));
                }
            }
        }
    }

    for t in 2..=8 {
        let b = helmert_contrasts(t).unwrap();
        for a in 0..b.cols() {
            let sum: f64 = (0..t).map(|i| b.get(i, a)).sum();
            if sum.abs() > 1e-12 {
                failures.push(format!("helmert t={t}: column {a} sums to {sum:e}"));
            }
            for c in 0..b.cols() {
                let dot: f64 = (0..t).map(|i| b.get(i, a) * b.get(i, c)).sum();
                let expect = if a == c { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-12 {
                    failures.push(format!("helmert t={t}: gram ({a},{c}) off by {:e}", dot - expect));
                }
            }
        }
    }

    let ok = failures.is_empty();
    report(
        &format!(
            "criterion 5 (permutation/rescaling invariance + orthonormal basis, {:.2?})",
            start.elapsed()
        ),
        ok,
    );
    assert!(ok, "criterion 5 failures:\n{}", failures.join("\n"));
}

/// Annealing must attain the enumerated optimum objective (within 1e-10)
/// on at least 48 of 50 random small instances.
#[test]
fn criterion_6_annealing_matches_enumeration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(66_000);
    let mut hits = 0;
    let mut misses = Vec::new();
    for trial in 0..50u64 {
        let t = rng.gen_range(2..=4usize);
        let b = rng.gen_range(1..=3usize);
        let k_min = t.div_ceil(b).max(2);
        let k = rng.gen_range(k_min..=5usize.max(k_min));
        let lambda: Vec<f64> = (0..t).map(|_| rng.gen_range(0.5..=16.0)).collect();
        let p = priors(&lambda, rng.gen_range(0.01..=2.0), rng.gen_range(0.0..=2.0));
        let contrasts = baseline_contrasts(t).unwrap();
        let crit = if trial % 2 == 0 { Criterion::C } else { Criterion::DA };
        let config = AnnealConfig {
            seed: 66_100 + trial,
            ..AnnealConfig::default()
        };
        let sa = anneal(&p, t, b, k, &contrasts, crit, &config).unwrap();
        let exact = exhaustive_search(&p, t, b, k, &contrasts, crit).unwrap();
        if (sa.best_score.value() - exact.best_score.value()).abs() <= 1e-10 {
            hits += 1;
        } else {
            misses.push(format!(
                "trial {trial} (t={t} b={b} k={k} {crit}): sa {:.12e} vs exact {:.12e}",
                sa.best_score.value(),
                exact.best_score.value()
            ));
        }
    }
    let ok = hits >= 48;
    report(
        &format!(
            "criterion 6 (annealing vs enumeration on 50 instances; got {hits}/50, {:.2?})",
            start.elapsed()
        ),
        ok,
    );
    assert!(ok, "criterion 6: only {hits}/50 matched:\n{}", misses.join("\n"));
}

fn gene_candidate_designs() -> Vec<(String, Vec<Vec<u32>>)> {
    // the eight candidate arrangements of two strains in three blocks of 7
    vec![
        ("D1".into(), vec![vec![6, 1]; 3]),
        ("D2".into(), vec![vec![5, 2]; 3]),
        ("D3".into(), vec![vec![4, 3]; 3]),
        ("D4".into(), vec![vec![4, 3], vec![4, 3], vec![3, 4]]),
        ("D5".into(), vec![vec![3, 4], vec![3, 4], vec![4, 3]]),
        ("D6".into(), vec![vec![3, 4]; 3]),
        ("D7".into(), vec![vec![2, 5]; 3]),
        ("D8".into(), vec![vec![1, 6]; 3]),
    ]
}

/// Ordering note attached to the criteria: among the eight candidate
/// designs, D8 must score best for gene C and D2 best for gene D.
#[test]
fn acceptance_note_candidate_ordering() {
    let contrasts = baseline_contrasts(2).unwrap();
    let candidates = gene_candidate_designs();
    let mut failures = Vec::new();

    for (gene_name, expected_best) in [("C", "D8"), ("D", "D2")] {
        let gene = GENES.iter().find(|g| g.name == gene_name).unwrap();
        let p = gene_priors(gene);
        let scored: Vec<(String, f64)> = candidates
            .iter()
            .map(|(id, counts)| {
                let d = design_from_counts(2, counts);
                let s = objective(&d, &p, &contrasts, Criterion::C).unwrap();
                (id.clone(), s.value())
            })
            .collect();
        let best = scored
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let ok = best.0 == expected_best;
        report(
            &format!(
                "acceptance note (gene {gene_name}: best candidate {expected_best}; got {} at {:.6e})",
                best.0, best.1
            ),
            ok,
        );
        if !ok {
            failures.push(format!(
                "gene {gene_name}: expected {expected_best} to score best, values {scored:?}"
            ));
        }
    }
    assert!(failures.is_empty(), "ordering failures:\n{}", failures.join("\n"));
}

// ---------------------------------------------------------------------
// Supplementary checks: green facts adjacent to criteria 2 and 3,
// pinning what the search actually finds at those priors.
// ---------------------------------------------------------------------

/// For genes A and B the unrestricted optimum splits the three blocks
/// 2-vs-1 between mirrored compositions; the stated uniform designs are
/// only optimal among designs whose blocks all share one composition.
#[test]
fn supplementary_gene_ab_split_optima() {
    let contrasts = baseline_contrasts(2).unwrap();
    // canonical form sorts blocks, so the (4,3) rows come first
    for (name, expected_split, expected_uniform) in [
        ("A", vec![vec![4, 3], vec![4, 3], vec![3, 4]], [4, 3]),
        ("B", vec![vec![4, 3], vec![3, 4], vec![3, 4]], [3, 4]),
    ] {
        let gene = GENES.iter().find(|g| g.name == name).unwrap();
        let p = gene_priors(gene);

        let exact = exhaustive_search(&p, 2, 3, 7, &contrasts, Criterion::C).unwrap();
        assert_eq!(
            exact.best_design.canonical_form().block_counts(),
            expected_split,
            "gene {name}: unrestricted optimum"
        );

        // best design among those with a single shared block composition
        let mut best: Option<(f64, [u32; 2])> = None;
        for r1 in 0..=7u32 {
            let comp = [r1, 7 - r1];
            let d = design_from_counts(2, &vec![comp.to_vec(); 3]);
            let s = objective(&d, &p, &contrasts, Criterion::C).unwrap();
            if s.is_feasible() && best.map_or(true, |(v, _)| s.value() < v) {
                best = Some((s.value(), comp));
            }
        }
        assert_eq!(
            best.unwrap().1,
            expected_uniform,
            "gene {name}: best uniform composition"
        );
        println!(
            "supplementary (gene {name}: split optimum {expected_split:?}, best uniform {expected_uniform:?}) ... PASS"
        );
    }
}

/// With the owl treatment levels ordered (1.33, 0.44, 1.36, 0.54) the best
/// single shared composition is (3,3,2,2); the unrestricted optimum mixes
/// compositions and scores strictly better.
#[test]
fn supplementary_owl_uniform_composition() {
    let p = priors(
        &[1.33, 0.44, 1.36, 0.54],
        0.47f64 * 0.47,
        1.11f64 * 1.11,
    );
    let contrasts = baseline_contrasts(4).unwrap();

    let mut best: Option<(f64, Vec<u32>)> = None;
    for c1 in 0..=10u32 {
        for c2 in 0..=(10 - c1) {
            for c3 in 0..=(10 - c1 - c2) {
                let comp = vec![c1, c2, c3, 10 - c1 - c2 - c3];
                let d = design_from_counts(4, &vec![comp.clone(); 15]);
                let s = objective(&d, &p, &contrasts, Criterion::C).unwrap();
                if s.is_feasible() && best.as_ref().map_or(true, |(v, _)| s.value() < *v) {
                    best = Some((s.value(), comp));
                }
            }
        }
    }
    let (uniform_value, comp) = best.unwrap();
    assert_eq!(comp, vec![3, 3, 2, 2], "best shared composition");

    let config = AnnealConfig {
        seed: 7_654,
        ..AnnealConfig::default()
    };
    let sa = anneal(&p, 4, 15, 10, &contrasts, Criterion::C, &config).unwrap();
    assert!(
        sa.best_score.value() < uniform_value,
        "unrestricted search should beat the best shared composition \
         ({} vs {uniform_value})",
        sa.best_score.value()
    );
    println!(
        "supplementary (owl levels reordered: best shared composition (3,3,2,2) at {uniform_value:.6}, \
         unrestricted optimum {:.6}) ... PASS",
        sa.best_score.value()
    );
}
