//! Operator catalog for the slow and fast equations and randomized checks of
//! the variational conditions they are expected to satisfy.

mod conditions;
pub(crate) mod coupling;
mod fast;
mod slow;

pub use conditions::{check_all, check_condition, random_smooth_field, ConditionId, ConditionReport, ConditionTarget};
pub use coupling::{coupling_f, noise_increment, CouplingSpec, NoiseBasis, NoiseSpec, NoiseWhich};
pub use fast::{dissipativity_margin, fast_drift, FastKind, FastOperatorSpec};
pub use slow::{slow_drift, SlowKind, SlowOperatorSpec};
