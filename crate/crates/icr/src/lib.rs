//! Stationary distributions of conditionally specified probability models.
//!
//! A conditionally specified model is a collection of conditional
//! distributions `f(target_i | parents_i)` over blocks of a common variable
//! set, with no joint distribution given. Cyclic conditional replacement —
//! swap the working distribution's conditional for the model's while keeping
//! the parent marginal — drives every position of a permissible update order
//! to a stationary distribution, whether or not the conditionals agree on a
//! joint. This crate computes those limits and everything around them:
//!
//! - [`cycle`]: decide and enumerate permissible updating cycles.
//! - [`icr`]: the discrete replacement operator, the cyclic iteration, an
//!   exact eigenvector oracle and the compatibility decision.
//! - [`gaussian_icr`]: the same iteration in moment form for linear-Gaussian
//!   conditionals, plus trivariate assembly from bivariate margins.
//! - [`sampler`]: seeded Gibbs-type chains whose batch distributions
//!   cross-check the deterministic limits.
//! - [`cli`]: the `icr` command-line front end.
//!
//! Each major capability has a runnable example under `examples/`; start
//! with `cargo run --example discrete_fixed_point`.

pub mod cli;
pub mod cycle;
pub mod discrete;
pub mod error;
pub mod gaussian;
pub mod gaussian_icr;
pub mod icr;
pub mod model;
pub mod report;
pub mod sampler;

pub use cycle::{classify, enumerate_permissible, is_permissible, CycleMode, UpdatingCycle};
pub use discrete::{
    derive_conditionals, kl_divergence, marginalize, total_variation, DiscreteConditional,
    DiscreteDistribution,
};
pub use error::{Error, Result};
pub use gaussian::{gaussian_kl, GaussianConditional, GaussianDistribution};
pub use gaussian_icr::{
    assemble_trivariate, gaussian_compatibility_check, gaussian_icr_run,
    gaussian_mutual_stationarity_check, gaussian_replacement, GaussianIcrConfig,
    GaussianIcrReport,
};
pub use icr::{
    brute_force_fixed_point, compatibility_check, conditional_replacement, icr_run,
    markov_kernel_apply, mutual_stationarity_check, Compatibility, IcrConfig, IcrReport,
};
pub use model::{ConditionalModel, Conditionals, Family, VarKind, VarSet, VariableSpec};
pub use sampler::{compare, run_chain, BatchData, BatchSummary, ChainConfig, Comparison};
