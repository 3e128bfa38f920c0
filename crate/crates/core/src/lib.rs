//! Full-likelihood variational inference for max-stable processes.
//!
//! The library fits logistic and Brown-Resnick max-stable models by maximizing
//! an importance-weighted lower bound on the full log likelihood. The latent
//! variable is the random partition of sites induced by the extremal functions
//! of the process; the variational family over partitions is the
//! Ewens-Pitman attraction (EPA) distribution.
//!
//! Main pieces:
//! - [`data`]: spatial datasets with unit Frechet margins and the distance
//!   matrices that drive partition similarity.
//! - [`partition`] and [`epa`]: set partitions, Bell numbers, exhaustive
//!   enumeration, and the EPA distribution (pmf, sampler, score).
//! - [`mvn`]: quasi-Monte Carlo multivariate normal probabilities (needed by
//!   the Brown-Resnick exponent measure).
//! - [`model`]: exponent measures, partial derivatives, Stephenson-Tawn
//!   partition likelihoods, and exact full likelihoods by enumeration.
//! - [`simulate`]: exact samplers for both models, with the ability to record
//!   the latent partition actually realized.
//! - [`vi`]: the importance-weighted bound, its gradient estimators, and the
//!   stochastic-gradient training loop.
//! - [`mle`]: maximum-likelihood baselines, including a collapsed logistic
//!   full likelihood that scales far beyond enumeration.

pub mod data;
pub mod dual;
pub mod epa;
pub mod error;
pub mod io;
pub mod mle;
pub mod model;
pub mod mvn;
pub mod partition;
pub mod simulate;
pub mod stream;
pub mod vi;

pub use data::{DistanceKind, DistanceMatrix, SpatialDataset};
pub use epa::EpaParams;
pub use error::{Error, Result};
pub use mle::MleResult;
pub use model::{BrownResnickParams, EvalCtx, LogisticParams, ModelParams};
pub use mvn::MvnConfig;
pub use partition::SetPartition;
pub use stream::RandomStream;
pub use vi::{FitResult, FitTrace, VIConfig};
