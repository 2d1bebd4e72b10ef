//! Construction and evaluation of sparse index-tracking portfolios.
//!
//! The pipeline has four parts:
//!
//! 1. [`market_data`] loads a price panel, computes periodic log returns,
//!    estimates a linearly weighted, shrunk correlation matrix and converts it
//!    to the correlation-distance matrix `d = sqrt(2 (1 - rho))`.
//! 2. [`selection`] states asset selection as a cardinality-constrained
//!    binary-quadratic problem over the distance matrix, balancing centrality
//!    (small total distance to the universe) against dissimilarity (selected
//!    assets far apart), with a forced top-N block and a top-H liquidity cap.
//!    [`multi_stage`] repeats the selection with different parameters, unions
//!    the stage sets and truncates to the largest-cap members.
//! 3. [`solver`] minimizes the selection objective by simulated annealing over
//!    cardinality-preserving swaps plus a deterministic pairwise swap descent,
//!    with an exact enumeration oracle for small instances. [`weighting`] fits
//!    long-only, fully invested tracking weights for the selected assets.
//! 4. [`evaluation`] backtests the tracking portfolio against the index with
//!    quarterly rebalances and examines cumulative-return residuals with the
//!    Wilcoxon signed-rank and Levene tests.
//!
//! [`synth`] generates seeded factor-model market data for experiments.
//!
//! ```
//! use sparsetrack_core::market_data::{self, Frequency, WeightingScheme};
//! use sparsetrack_core::{multi_stage, selection, solver, synth};
//!
//! let panel = synth::generate(&synth::SynthConfig {
//!     assets: 30,
//!     days: 220,
//!     factors: 2,
//!     seed: 7,
//!     ..Default::default()
//! })?;
//! let weekly = market_data::compute_log_returns(&panel, Frequency::Weekly)?;
//! let corr = market_data::estimate_correlation(&weekly, 26, WeightingScheme::Linear, 0.1)?;
//! let distance = market_data::correlation_to_distance(&corr, &panel.mc_ranking())?;
//!
//! let plan = selection::preset(selection::Preset::E6, 30, 25)?;
//! let problem = selection::build_problem(&distance, plan.stages[0])?;
//! let cfg = solver::SaConfig::tuned(&problem, 7);
//! let stage_sets = multi_stage::run_stages(&plan, &distance, &cfg)?;
//! let basket = multi_stage::union_and_truncate(&stage_sets, plan.m_star)?;
//! assert!(basket.len() <= plan.m_star);
//! assert!(basket.contains(0), "the largest asset is forced in");
//! # Ok::<(), sparsetrack_core::Error>(())
//! ```

pub mod error;
pub mod evaluation;
pub mod market_data;
pub mod multi_stage;
pub mod selection;
pub mod solver;
pub mod synth;
pub mod weighting;

pub use error::{Error, Result};
pub use evaluation::{BacktestConfig, BacktestReport, ResidualSeries, Selector, TestResult};
pub use market_data::{
    CorrelationMatrix, CsvSchema, DistanceMatrix, Frequency, PricePanel, ReturnPanel,
    WeightingScheme,
};
pub use multi_stage::{SelectedSet, StagePlan};
pub use selection::{Preset, Selection, SelectionParams, SelectionProblem};
pub use solver::{SaConfig, SolveResult};
pub use synth::SynthConfig;
pub use weighting::Portfolio;
