//! Purely random forests on the unit cube and their kernel (KeRF) estimators.
//!
//! * [`partition`]: dyadic cell indexing, compositions, multinomial weights.
//! * [`forests`]: centered trees, simplified directional schedules, and the
//!   classic tree and forest estimators.
//! * [`kernel`]: proximity kernels, finite and infinite KeRF, and the
//!   closed-form connection probability.
//! * [`equivalence`]: exact, enumerative and Monte Carlo verifiers showing
//!   that both constructions share one kernel.
//! * [`experiment`]: the synthetic regression sweep and its CSV outputs.

pub mod equivalence;
pub mod error;
pub mod experiment;
pub mod forests;
pub mod kernel;
pub mod partition;
pub mod rng;

pub use error::{Error, Result};
pub use forests::{AnyPartition, CenteredTree, DirectionalSchedule, Partition, Prediction, TrainingSet};
pub use kernel::{Flavor, KernelSpec};
pub use partition::{Point, SplitCountVector};
