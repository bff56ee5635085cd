//! Annealing against the enumeration oracle on the twelve three-treatment
//! reference settings: over 100 seeded runs per setting and criterion, the
//! annealer must attain the enumerated optimum value (within 1e-10) in at
//! least 95 runs, with matching per-block replication multisets.

use std::collections::BTreeSet;

use pbdesign::*;

fn count_multiset(design: &BlockDesign) -> BTreeSet<Vec<u32>> {
    design.block_counts().into_iter().collect()
}

#[test]
fn anneal_hits_enumerated_optimum_on_reference_settings() {
    let contrasts = baseline_contrasts(3).unwrap();
    let lambdas: [[f64; 3]; 4] = [
        [1.0, 1.0, 1.0],
        [1.0, 1.0, 2.0],
        [1.0, 2.0, 4.0],
        [1.0, 4.0, 16.0],
    ];
    let block_variances = [0.016, 0.25, 4.0];

    let mut failures = Vec::new();
    for lambda in &lambdas {
        for &sigmab2 in &block_variances {
            let priors = PointPriors::new(lambda.to_vec(), 0.25, sigmab2).unwrap();
            for criterion in [Criterion::C, Criterion::DA] {
                let exact =
                    exhaustive_search(&priors, 3, 2, 3, &contrasts, criterion).unwrap();
                let target = exact.best_score.value();
                let target_counts = count_multiset(&exact.best_design);

                let mut hits = 0;
                for run in 0..100u64 {
                    let config = AnnealConfig {
                        seed: 31_000 + run,
                        ..AnnealConfig::default()
                    };
                    let sa = anneal(&priors, 3, 2, 3, &contrasts, criterion, &config).unwrap();
                    if (sa.best_score.value() - target).abs() <= 1e-10
                        && count_multiset(&sa.best_design) == target_counts
                    {
                        hits += 1;
                    }
                }
                if hits < 95 {
                    failures.push(format!(
                        "lambda={lambda:?} sigmab2={sigmab2} {criterion}: {hits}/100"
                    ));
                }
            }
        }
    }
    assert!(
        failures.is_empty(),
        "annealing missed the oracle:\n{}",
        failures.join("\n")
    );
}
