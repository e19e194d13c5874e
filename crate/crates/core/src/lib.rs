//! Decision making under model ambiguity with Dirichlet-process priors.
//!
//! A posterior over data-generating distributions is approximated by an
//! ensemble of weighted discrete measures; decisions minimize a smooth
//! ambiguity-averse criterion over that ensemble by stochastic gradient
//! descent.

pub mod ambiguity;
pub mod criterion;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod loss;
pub mod optimizer;
pub mod sampling;

pub use ambiguity::{AmbiguityTransform, PhiSpec};
pub use criterion::{CriterionContext, NeutralObjective, Objective};
pub use ensemble::{build_ensemble, CenteringSpec, DpPrior, Scheme, WeightedEnsemble, WeightedSample};
pub use error::{Error, Result};
pub use loss::{LossKind, LossSpec, Observation};
pub use sampling::{derive_stream, RngStream};
pub use optimizer::{sgd_minimize, RunTrace, SgdConfig, StepSchedule};
