//! Khasminskii block diagnostics: the auxiliary fast process driven by a
//! block-frozen slow input, its deviation from the true fast path, and the
//! slow-increment integral.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::grid::{norm, Field, NormKind};
use crate::integrators::{FastStepper, ModelSpec, NoisePath};

/// Blocks `[k delta, (k+1) delta)` aligned with the macro grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSchedule {
    delta: f64,
    horizon: f64,
    dt_macro: f64,
    steps_per_block: usize,
    n_macro: usize,
}

impl BlockSchedule {
    pub fn new(delta: f64, horizon: f64, dt_macro: f64) -> Result<Self> {
        if !(dt_macro > 0.0 && delta > 0.0 && horizon > 0.0) {
            return Err(CoreError::InvalidParameter("block schedule needs positive lengths".into()));
        }
        let ratio = delta / dt_macro;
        let k = ratio.round();
        if k < 1.0 || (k - ratio).abs() > 1e-9 * ratio {
            return Err(CoreError::Misaligned { delta, dt_macro });
        }
        let steps = (horizon / dt_macro).round();
        if (steps * dt_macro - horizon).abs() > 1e-9 * horizon {
            return Err(CoreError::Misaligned { delta: horizon, dt_macro });
        }
        if delta > horizon * (1.0 + 1e-12) {
            return Err(CoreError::InvalidParameter(format!("block length {delta} exceeds horizon {horizon}")));
        }
        Ok(Self { delta, horizon, dt_macro, steps_per_block: k as usize, n_macro: steps as usize })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt_macro(&self) -> f64 {
        self.dt_macro
    }

    pub fn steps_per_block(&self) -> usize {
        self.steps_per_block
    }

    pub fn n_macro(&self) -> usize {
        self.n_macro
    }

    /// Number of blocks, `ceil(T / delta)`.
    pub fn n_blocks(&self) -> usize {
        self.n_macro.div_ceil(self.steps_per_block)
    }

    /// Index of the macro node anchoring the block containing step `n`,
    /// i.e. the interval `(t_n, t_{n+1}]`.
    pub fn anchor(&self, n: usize) -> usize {
        (n / self.steps_per_block) * self.steps_per_block
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_macro + 1 {
            return Err(CoreError::ScheduleMismatch(format!(
                "trajectory has {len} points, schedule expects {}",
                self.n_macro + 1
            )));
        }
        Ok(())
    }
}

/// The auxiliary fast path: same micro scheme and same recorded fast
/// increments as the coupled run, with the slow input frozen at the block
/// anchor `X_{k delta}`. Starts from the model's `y0`.
pub fn build_auxiliary(
    coupled_x: &[Field],
    model: &ModelSpec,
    schedule: &BlockSchedule,
    noise: &NoisePath,
) -> Result<Vec<Field>> {
    schedule.check_len(coupled_x.len())?;
    if (noise.dt_macro() - schedule.dt_macro()).abs() > 1e-15 * schedule.dt_macro()
        || noise.n_macro() < schedule.n_macro()
    {
        return Err(CoreError::ScheduleMismatch("noise path does not cover the schedule".into()));
    }
    let stepper = FastStepper::new(model, noise.dt_micro(), model.epsilon);
    if stepper.noise_width() != noise.fast_width() {
        return Err(CoreError::ScheduleMismatch("fast noise width does not match the model".into()));
    }
    let mut out = Vec::with_capacity(coupled_x.len());
    out.push(model.y0.clone());
    for n in 0..schedule.n_macro() {
        let frozen = &coupled_x[schedule.anchor(n)];
        let (next, _) = stepper.block(frozen, &out[n], noise.fast_block(n), noise.substeps());
        out.push(next);
    }
    Ok(out)
}

/// `sum_{n=1}^N dt ||Y_n - Y_hat_n||_{L2}^2`.
pub fn deviation_statistic(y: &[Field], y_hat: &[Field], dt_macro: f64) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(CoreError::ScheduleMismatch(format!("{} vs {} points", y.len(), y_hat.len())));
    }
    let mut acc = 0.0;
    for (a, b) in y.iter().zip(y_hat).skip(1) {
        let d = norm(&a.sub(b)?, NormKind::L2)?;
        acc += dt_macro * d * d;
    }
    Ok(acc)
}

/// `sum_{n=1}^N dt ||X_n - X_{t(delta)}||^2` in the norm `kind`, where
/// `t(delta)` is the start of the block containing `(t_{n-1}, t_n]`.
pub fn increment_statistic(x: &[Field], schedule: &BlockSchedule, kind: NormKind) -> Result<f64> {
    schedule.check_len(x.len())?;
    let dt = schedule.dt_macro();
    let mut acc = 0.0;
    for n in 1..x.len() {
        let d = norm(&x[n].sub(&x[schedule.anchor(n - 1)])?, kind)?;
        acc += dt * d * d;
    }
    Ok(acc)
}
