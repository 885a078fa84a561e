//! Trimmed U-statistics and generalized L-statistics.
//!
//! Given a symmetric kernel `h` of arity `m` and a sample `X_1, ..., X_n`,
//! the `N = C(n, m)` kernel evaluations define an empirical distribution of
//! U-statistical structure. This crate computes the classical U-statistic,
//! its trimmed variants (the rank-trimmed `U_ab` and the quantile-trimmed
//! generalized L-statistic `L_ab`), the population quantities that drive
//! their joint limit law (quantile brackets, the centering functional, the
//! projection covariance matrix), a sampler for the non-Gaussian limit
//! variable, and a Monte Carlo engine that measures convergence of the
//! scaled statistics to that limit.
//!
//! The empirical machinery makes no continuity assumptions: ties, atoms,
//! and flat stretches of the kernel distribution are handled through exact
//! count/order-statistic identities, which are themselves exposed as
//! runnable identity suites (see [`identities`]).

pub mod cli;
pub mod empirical;
pub mod error;
pub mod experiment;
pub mod identities;
pub mod kernel;
pub mod limit_law;
pub mod model;
pub mod population;
mod quadrature;
pub mod rng;
pub mod trim;

pub use empirical::{Decomposition, KernelValues, ThresholdCounts, TrimCounts};
pub use error::Error;
pub use kernel::Kernel;
pub use limit_law::LimitParams;
pub use model::DataModel;
pub use population::{KernelDistribution, PopulationSummary, QuantileBracket};
pub use rng::SeedSpec;
pub use trim::{TrimLevel, TrimSpec};
