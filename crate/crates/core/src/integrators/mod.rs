//! Time stepping for the coupled slow-fast system, the averaged equation and
//! the frozen fast equation.
//!
//! One macro step of length `dt` advances the fast variable first, through
//! `n_sub` micro steps with the slow variable frozen at its left-endpoint
//! value, and then the slow variable with the coupling `F` evaluated on the
//! micro-step average of the fast path. Both equations are drift-implicit in
//! their monotone parts and explicit in the noise.

mod noise_path;
mod scheme;
mod simulate;

pub use noise_path::NoisePath;
pub use scheme::{step_fast_block, step_slow, FastBlock, FastStepper, SlowStep, SlowStepper};
pub use simulate::{replay_coupled, simulate_averaged, simulate_coupled, CoupledRun};

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::grid::{norm, Field, Grid1D, NormKind};
use crate::operators::{dissipativity_margin, CouplingSpec, FastOperatorSpec, SlowOperatorSpec};

/// Product-space state `(X, Y)` at macro time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub x: Field,
    pub y: Field,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub slow: SlowOperatorSpec,
    pub fast: FastOperatorSpec,
    pub coupling: CouplingSpec,
    pub epsilon: f64,
    pub grid: Grid1D,
    pub x0: Field,
    pub y0: Field,
}

impl ModelSpec {
    pub fn new(
        slow: SlowOperatorSpec,
        fast: FastOperatorSpec,
        coupling: CouplingSpec,
        epsilon: f64,
        x0: Field,
        y0: Field,
    ) -> Result<Self> {
        let grid = coupling.grid();
        grid.check_same(&x0.grid())?;
        grid.check_same(&y0.grid())?;
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(CoreError::InvalidParameter(format!("epsilon must be in (0, 1], got {epsilon}")));
        }
        let margin = dissipativity_margin(&fast, &coupling, &grid);
        if !(margin > 0.0) {
            return Err(CoreError::NonDissipative { margin });
        }
        Ok(Self { slow, fast, coupling, epsilon, grid, x0, y0 })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.slow, self.fast, self.coupling.clone(), epsilon, self.x0.clone(), self.y0.clone())
    }

    pub fn margin(&self) -> f64 {
        dissipativity_margin(&self.fast, &self.coupling, &self.grid)
    }

    pub fn state_norm(&self) -> NormKind {
        self.slow.state_norm()
    }

    /// True when the frozen equation is linear with additive noise and `F` is
    /// affine, so the averaged coefficient has a closed form.
    pub fn is_ou(&self) -> bool {
        self.fast.is_linear() && self.coupling.g2.is_additive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub dt_macro: f64,
    /// Upper bound on the micro step measured in fast time, `dt_micro / eps`.
    pub dt_fast_target: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl SchemeParams {
    /// Defaults: `dt_fast_target = 0.1 / margin`, Newton tolerance `1e-10`,
    /// 50 iterations.
    pub fn for_model(model: &ModelSpec, dt_macro: f64) -> Self {
        Self { dt_macro, dt_fast_target: 0.1 / model.margin(), newton_tol: 1e-10, newton_max_iter: 50 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_macro > 0.0) || !(self.dt_fast_target > 0.0) || !(self.newton_tol > 0.0) {
            return Err(CoreError::InvalidParameter("step sizes and tolerances must be positive".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(CoreError::InvalidParameter("newton_max_iter must be positive".into()));
        }
        Ok(())
    }

    /// `ceil(dt_macro / (eps * dt_fast_target))`, at least 1.
    pub fn micro_substeps(&self, epsilon: f64) -> usize {
        let ratio = self.dt_macro / (epsilon * self.dt_fast_target);
        // guard against ratio = 4.000000000001 from rounding
        let r = ratio * (1.0 - 1e-12);
        (r.ceil() as usize).max(1)
    }

    /// Number of macro steps covering `[0, horizon]`; `horizon` must be an
    /// integer multiple of `dt_macro`.
    pub fn macro_steps(&self, horizon: f64) -> Result<usize> {
        let steps = (horizon / self.dt_macro).round();
        if !(horizon > 0.0) || steps < 1.0 || (steps * self.dt_macro - horizon).abs() > 1e-9 * horizon {
            return Err(CoreError::InvalidParameter(format!(
                "horizon {horizon} is not a positive multiple of dt_macro {}",
                self.dt_macro
            )));
        }
        Ok(steps as usize)
    }
}

/// Per-path moment and increment statistics accumulated during a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    /// `max_n ||X_n||_H^2` over the stored grid.
    pub sup_norm_x_sq: f64,
    /// Time average of `||Y_n||_{L2}^2` over the stored grid.
    pub mean_norm_y_sq: f64,
    /// `(delta, sum_{n>=1} dt ||X_n - X_{t(delta)}||_H^2)` for dyadic block
    /// lengths `delta = 2^j dt`; `t(delta)` is the start of the block that
    /// contains `(t_{n-1}, t_n]`.
    pub increment_integral: Vec<(f64, f64)>,
}

impl TrajectoryStats {
    pub fn increment_at(&self, delta: f64) -> Option<f64> {
        self.increment_integral.iter().find(|(d, _)| (d - delta).abs() <= 1e-12 * delta.max(1.0)).map(|(_, v)| *v)
    }
}

/// `max_n ||a_n - b_n||^2` over the stored time points of one path.
pub fn strong_error(coupled_x: &[Field], averaged_x: &[Field], kind: NormKind) -> Result<f64> {
    if coupled_x.len() != averaged_x.len() {
        return Err(CoreError::ScheduleMismatch(format!(
            "{} vs {} stored time points",
            coupled_x.len(),
            averaged_x.len()
        )));
    }
    let mut sup: f64 = 0.0;
    for (a, b) in coupled_x.iter().zip(averaged_x) {
        let d = norm(&a.sub(b)?, kind)?;
        sup = sup.max(d * d);
    }
    Ok(sup)
}
