//! Locally optimal block designs for experiments with Poisson-distributed
//! responses under a log-link mixed model.
//!
//! Given point priors for the expected treatment counts and the block and
//! residual variance components, this crate evaluates D_A- and C-optimality
//! objectives through a closed-form marginal information matrix, searches
//! the design space by simulated annealing, and enumerates small instances
//! exhaustively for exact answers and cross-checks.
//!
//! ```
//! use pbdesign::{anneal, baseline_contrasts, AnnealConfig, Criterion, PointPriors};
//!
//! let priors = PointPriors::new(vec![1.0, 4.0, 16.0], 0.25, 0.016).unwrap();
//! let contrasts = baseline_contrasts(3).unwrap();
//! let result = anneal(&priors, 3, 2, 3, &contrasts, Criterion::C,
//!                     &AnnealConfig::default()).unwrap();
//! assert_eq!(result.best_design.replication_counts(), vec![3, 2, 1]);
//! ```

pub mod design;
pub mod error;
pub mod fisher;
pub mod linalg;
pub mod objective;
pub mod search;

pub use design::{
    balanced_reference, baseline_contrasts, helmert_contrasts, link_to_rate, BlockDesign,
    ContrastSet, PointPriors,
};
pub use error::{Error, Result};
pub use fisher::{
    ell_vector, marginal_information, naive_marginal_information, omega_block, BlockWeights,
};
pub use linalg::SymMatrix;
pub use objective::{
    d_efficiency, efficiency_vs_worst, objective, relative_efficiency, Criterion, DesignScore,
};
pub use search::{
    anneal, calibrate_initial_temp, design_class_count, exhaustive_search,
    exhaustive_search_with_cap, propose_candidate, AnnealConfig, InitialTemp, SearchResult,
    DEFAULT_CLASS_CAP, DEFAULT_SEED,
};
