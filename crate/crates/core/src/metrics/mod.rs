//! Fidelity metrics. Every function is pure.

pub mod distribution;
pub mod diversity;
pub mod reliability;
pub mod scoring;
pub mod tercile;

pub use distribution::{
    bin_edges, bin_index, binned_pair, histogram, tvd_binned, tvd_discrete, DistributionSummary,
    Support,
};
pub use diversity::{item_entropy, profile_diversity, scale_entropy, DiversityResult, LogBase};
pub use reliability::{alpha_standardized, cronbach, icc1, AlphaDecomposition, IccResult};
pub use scoring::{pct_change, pearson, weighted_f1};
pub use tercile::{tercile_mean_validation, Tercile, TercileRow};

/// Default number of equal-width bins for continuous TVD.
pub const DEFAULT_K_BINS: usize = 50;
