use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::grid::Field;
use crate::integrators::{CoupledState, ModelSpec, SchemeParams};
use crate::operators::{NoiseBasis, SlowKind};
use crate::rng::RngStream;
use crate::tridiag::{solve_general, ShiftedLaplacian};

const MAX_HALVINGS: usize = 30;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlowStep {
    pub x: Field,
    /// Max-norm residual of the implicit relation at the accepted iterate.
    pub residual: f64,
    pub iterations: usize,
}

/// Drift-implicit slow step with cached noise basis and, for Burgers, the
/// factorized viscous operator.
#[derive(Debug, Clone)]
pub struct SlowStepper {
    model: ModelSpec,
    dt: f64,
    tol: f64,
    max_iter: usize,
    noise: NoiseBasis,
    viscous: Option<ShiftedLaplacian>,
}

impl SlowStepper {
    pub fn new(model: &ModelSpec, params: &SchemeParams) -> Result<Self> {
        params.validate()?;
        let grid = model.grid;
        let dt = params.dt_macro;
        let viscous = match model.slow.kind() {
            SlowKind::Burgers { viscosity } => {
                Some(ShiftedLaplacian::new(grid.n_interior(), grid.h(), 1.0, dt * viscosity))
            }
            _ => None,
        };
        Ok(Self {
            model: model.clone(),
            dt,
            tol: params.newton_tol,
            max_iter: params.newton_max_iter,
            noise: NoiseBasis::new(model.coupling.g1, grid),
            viscous,
        })
    }

    pub fn noise_width(&self) -> usize {
        self.noise.width()
    }

    /// `X_{n+1} = X_n + dt [A_imp(X_{n+1}) + A_exp(X_n) + forcing] + G1(X_n) dW`.
    pub fn step(&self, x: &Field, forcing: &Field, dw: &[f64]) -> Result<SlowStep> {
        let dt = self.dt;
        let mut rhs = x.values().to_vec();
        for (r, f) in rhs.iter_mut().zip(forcing.values()) {
            *r += dt * f;
        }
        if let Some(exp) = self.model.slow.explicit_drift(x) {
            for (r, e) in rhs.iter_mut().zip(exp.values()) {
                *r += dt * e;
            }
        }
        self.noise.add_increment(dw, x.values(), 1.0, &mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("slow step right-hand side"));
        }
        let scale = max_abs(&rhs).max(1.0);
        let grid = x.grid();

        if let Some(viscous) = &self.viscous {
            let mut sol = rhs.clone();
            viscous.solve_in_place(&mut sol);
            let sol = Field::from_raw(grid, sol);
            let residual = max_abs(&self.residual(&sol, &rhs)) / scale;
            return Ok(SlowStep { x: sol, residual, iterations: 1 });
        }

        let mut iterate = x.clone();
        let mut res = self.residual(&iterate, &rhs);
        let mut res_norm = max_abs(&res);
        for iter in 0..self.max_iter {
            if res_norm <= self.tol * scale {
                return Ok(SlowStep { x: iterate, residual: res_norm / scale, iterations: iter });
            }
            let (sub, diag, sup) = self.model.slow.implicit_jacobian(&iterate);
            // J_R = I - dt J_A
            let sub: Vec<f64> = sub.iter().map(|a| -dt * a).collect();
            let sup: Vec<f64> = sup.iter().map(|a| -dt * a).collect();
            let diag: Vec<f64> = diag.iter().map(|a| 1.0 - dt * a).collect();
            let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
            let delta = solve_general(&sub, &diag, &sup, &neg_res);

            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = iterate.values().iter().zip(&delta).map(|(u, d)| u + lambda * d).collect();
                let trial = Field::from_raw(grid, trial);
                let trial_res = self.residual(&trial, &rhs);
                let trial_norm = max_abs(&trial_res);
                if trial_norm.is_finite() && trial_norm < res_norm {
                    accepted = Some((trial, trial_res, trial_norm));
                    break;
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((t, r, n)) => {
                    iterate = t;
                    res = r;
                    res_norm = n;
                }
                None => break,
            }
        }
        if res_norm <= self.tol * scale {
            return Ok(SlowStep { x: iterate, residual: res_norm / scale, iterations: self.max_iter });
        }
        Err(CoreError::NewtonDivergence { iterations: self.max_iter, residual: res_norm / scale })
    }

    /// `u - dt A_imp(u) - rhs`.
    fn residual(&self, u: &Field, rhs: &[f64]) -> Vec<f64> {
        let a = self.model.slow.implicit_drift(u);
        u.values().iter().zip(a.values()).zip(rhs).map(|((ui, ai), r)| ui - self.dt * ai - r).collect()
    }
}

/// One slow macro step from `state.x`. `forcing` is the coupling drift for
/// the step (`F` averaged over the fast block, or `F_bar(X_n)`), and `dw`
/// holds the Brownian increments of the slow noise coefficients.
pub fn step_slow(
    model: &ModelSpec,
    state: &CoupledState,
    forcing: &Field,
    dw: &[f64],
    params: &SchemeParams,
) -> Result<Field> {
    Ok(SlowStepper::new(model, params)?.step(&state.x, forcing, dw)?.x)
}

/// Semi-implicit micro stepper of the fast equation,
/// `Y' = (I + tau L)^{-1} [Y + tau B2(x, Y) + s G2(Y) dW]`,
/// where `tau = dt_micro / eps` and `s = 1 / sqrt(eps)`.
#[derive(Debug, Clone)]
pub struct FastStepper {
    model_fast: crate::operators::FastOperatorSpec,
    tau: f64,
    noise_scale: f64,
    dt_micro: f64,
    noise: NoiseBasis,
    solver: ShiftedLaplacian,
}

impl FastStepper {
    /// Stepper for the coupled fast equation: `dt_micro = dt_macro / n_sub`.
    pub fn coupled(model: &ModelSpec, params: &SchemeParams) -> Self {
        let n_sub = params.micro_substeps(model.epsilon);
        let dt_micro = params.dt_macro / n_sub as f64;
        Self::new(model, dt_micro, model.epsilon)
    }

    /// Stepper for the frozen equation in fast time (`eps = 1`).
    pub fn frozen(model: &ModelSpec, dt_fast: f64) -> Self {
        Self::new(model, dt_fast, 1.0)
    }

    pub fn new(model: &ModelSpec, dt_micro: f64, epsilon: f64) -> Self {
        let grid = model.grid;
        let tau = dt_micro / epsilon;
        Self {
            model_fast: model.fast,
            tau,
            noise_scale: 1.0 / epsilon.sqrt(),
            dt_micro,
            noise: NoiseBasis::new(model.coupling.g2, grid),
            solver: ShiftedLaplacian::new(grid.n_interior(), grid.h(), 1.0, tau),
        }
    }

    pub fn noise_width(&self) -> usize {
        self.noise.width()
    }

    pub fn dt_micro(&self) -> f64 {
        self.dt_micro
    }

    /// Advances `y` in place; `dw` are Brownian increments over `dt_micro`.
    pub fn micro_step(&self, x: &[f64], y: &mut [f64], dw: &[f64], scratch: &mut Vec<f64>) {
        scratch.clear();
        scratch.extend_from_slice(y);
        self.model_fast.add_b2(x, y, self.tau, scratch);
        self.noise.add_increment(dw, y, self.noise_scale, scratch);
        self.solver.solve_in_place(scratch);
        y.copy_from_slice(scratch);
    }

    /// Runs `n_sub` micro steps drawing increments from `dws` (flattened,
    /// `n_sub * width`). Returns the final state and the left-point average
    /// of `Y` over the block.
    pub fn block(&self, x: &Field, y: &Field, dws: &[f64], n_sub: usize) -> (Field, Field) {
        let width = self.noise_width();
        debug_assert_eq!(dws.len(), n_sub * width);
        let mut state = y.values().to_vec();
        let mut sum = vec![0.0; state.len()];
        let mut scratch = Vec::with_capacity(state.len());
        for m in 0..n_sub {
            for (s, v) in sum.iter_mut().zip(&state) {
                *s += v;
            }
            self.micro_step(x.values(), &mut state, &dws[m * width..(m + 1) * width], &mut scratch);
        }
        let inv = 1.0 / n_sub as f64;
        sum.iter_mut().for_each(|s| *s *= inv);
        (Field::from_raw(y.grid(), state), Field::from_raw(y.grid(), sum))
    }
}

/// Result of advancing the fast variable across one macro step.
#[derive(Debug, Clone, PartialEq)]
pub struct FastBlock {
    pub y_end: Field,
    /// Left-point average of `Y` over the micro steps of the block.
    pub y_mean: Field,
    /// Recorded Brownian increments, `n_sub` rows of `width` coefficients.
    pub increments: Vec<f64>,
    pub n_sub: usize,
}

/// Advances `state.y` across one macro step with `X` frozen at `state.x`,
/// drawing the fast noise from `stream`.
pub fn step_fast_block(
    model: &ModelSpec,
    state: &CoupledState,
    params: &SchemeParams,
    stream: &mut RngStream,
) -> Result<FastBlock> {
    params.validate()?;
    let stepper = FastStepper::coupled(model, params);
    let n_sub = params.micro_substeps(model.epsilon);
    let mut increments = vec![0.0; n_sub * stepper.noise_width()];
    stream.fill_gaussian(&mut increments);
    let sq = stepper.dt_micro().sqrt();
    increments.iter_mut().for_each(|c| *c *= sq);
    let (y_end, y_mean) = stepper.block(&state.x, &state.y, &increments, n_sub);
    if !y_end.is_finite() {
        return Err(CoreError::NonFinite("fast block"));
    }
    Ok(FastBlock { y_end, y_mean, increments, n_sub })
}
