//! Covariance models, class membership diagnostics and exact path sampling.

mod kernel;
mod membership;
mod model;
mod sampling;

pub use kernel::{eval_kernel, worst_case_increment, KernelValues};
pub use membership::{
    check_class_membership, MembershipConfig, MembershipReport, PositiveCovariance, RatioSup, VarianceLower, Verdict,
    WStarFit,
};
pub use model::{BracketFn, CovarianceModel, MixedSpec, ModelKind, Stationarity, StationaryKernel};
pub use sampling::{
    cholesky_with_jitter, covariance_matrix, sample_mixed, sample_paths, sample_paths_with, MixedEnsemble,
    SamplingMethod,
};

pub(crate) use sampling::replica_rng;
