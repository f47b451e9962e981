//! Numerical core for slow-fast stochastic PDEs on the unit interval.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every algorithmic
//! piece of the simulator: grids and discrete Gelfand-triple norms, the
//! operator catalog with randomized checks of the monotonicity conditions,
//! the drift-implicit multirate Euler–Maruyama integrator for the coupled
//! system and the averaged equation, the frozen fast equation with its
//! invariant-measure estimator, and the Khasminskii block diagnostics.
//!
//! File formats, configuration and the command line live in the
//! `slowfast-cli` companion crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod averaging;
pub mod error;
pub mod fit;
pub mod grid;
pub mod integrators;
pub mod khasminskii;
pub mod operators;
pub mod rng;
mod tridiag;

pub use averaging::{
    ergodicity_decay, estimate_fbar, oracle_fbar_ou, simulate_frozen, DecayFit, FbarEstimate, FbarProvider,
    FrozenRunSpec, MemoizedEstimator, OuOracle,
};
pub use error::{CoreError, Result};
pub use fit::{fit_loglog, mean_and_stderr, LogLogFit};
pub use grid::{norm, poisson_solve, smallest_eigenvalue, Field, Grid1D, NormKind};
pub use integrators::{
    replay_coupled, simulate_averaged, simulate_coupled, step_fast_block, step_slow, strong_error, CoupledRun,
    CoupledState, ModelSpec, NoisePath, SchemeParams, TrajectoryStats,
};
pub use khasminskii::{build_auxiliary, deviation_statistic, increment_statistic, BlockSchedule};
pub use operators::{
    check_all, check_condition, coupling_f, dissipativity_margin, fast_drift, noise_increment, random_smooth_field,
    slow_drift, ConditionId, ConditionReport, ConditionTarget, CouplingSpec, FastKind, FastOperatorSpec, NoiseSpec,
    NoiseWhich, SlowKind, SlowOperatorSpec,
};
pub use rng::RngStream;
