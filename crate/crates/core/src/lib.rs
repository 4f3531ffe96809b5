//! Kendall Interaction Filter: rank-based screening of feature couples
//! whose joint association changes across the classes of a categorical
//! response.
//!
//! For a couple `(j, l)` the score is
//!
//! ```text
//! ŵ = Σ_k π̂_k |τ̂_k − τ̂|
//! ```
//!
//! where `τ̂` is the strict Kendall τ of the two features over all rows,
//! `τ̂_k` the same statistic within class `k`, and `π̂_k = n_k / n`.
//! Couples are ranked by `ŵ` and the top `⌈n / ln n⌉` (or those above a
//! threshold `c·n^{−r}`) are selected.

pub mod dataset;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod io;
pub mod mvn;
pub mod pairwise;
pub mod permutation;
pub mod rank_stats;
pub mod simgen;

pub use dataset::Dataset;
pub use engine::{
    default_top_d, kif_score, run_screening, screen_all_pairs, variance_prescreen, ClassSizePolicy,
    PairScore, ResolvedRule, Retention, ScreeningConfig, ScreeningResult, SelectionRule,
};
pub use error::{KifError, Result};
pub use experiment::{run_experiment, ExperimentReport, ExperimentSpec};
pub use io::{load_csv, read_csv, save_csv, write_csv};
pub use mvn::{mvn_sample, CovarianceSpec, FactorRepair, MvnSampler};
pub use pairwise::KernelChoice;
pub use permutation::{permutation_pvalues, PairPValue, PermutationPlan};
pub use rank_stats::{
    class_partition, conditional_kendall_tau, kendall_tau_fast, kendall_tau_naive, ClassPartition,
    LabelVector,
};
pub use simgen::{
    gen_setting1, gen_setting2, gen_setting3, gen_setting4, gen_setting5, gen_toy, generate,
    replicate_seed, Generator, LogisticLabels, LogisticModel, Scenario, Setting, SimulationSpec,
};
