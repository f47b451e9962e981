use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::averaging::FbarProvider;
use crate::error::{CoreError, Result};
use crate::grid::{norm, Field, NormKind};
use crate::integrators::scheme::{FastStepper, SlowStepper};
use crate::integrators::{ModelSpec, NoisePath, SchemeParams, TrajectoryStats};
use crate::operators::coupling::affine_f;
use crate::rng::RngStream;

/// Output of a coupled run: states at every macro time `t_n = n dt`,
/// `n = 0..=N`, per-path statistics and, if requested, the noise record.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub x: Vec<Field>,
    pub y: Vec<Field>,
    pub noise: Option<NoisePath>,
    pub stats: TrajectoryStats,
}

enum Increments<'a> {
    Fresh { slow: &'a mut RngStream, fast: &'a mut RngStream },
    Replay(&'a NoisePath),
}

/// Runs the coupled scheme on `[0, horizon]` drawing the slow and fast
/// noises from independent streams.
pub fn simulate_coupled(
    model: &ModelSpec,
    horizon: f64,
    params: &SchemeParams,
    slow_stream: &mut RngStream,
    fast_stream: &mut RngStream,
    record_noise: bool,
) -> Result<CoupledRun> {
    run_coupled(model, horizon, params, Increments::Fresh { slow: slow_stream, fast: fast_stream }, record_noise)
}

/// Re-runs the coupled scheme on a recorded noise path.
pub fn replay_coupled(model: &ModelSpec, horizon: f64, params: &SchemeParams, noise: &NoisePath) -> Result<CoupledRun> {
    run_coupled(model, horizon, params, Increments::Replay(noise), false)
}

fn check_path(noise: &NoisePath, params: &SchemeParams, steps: usize, slow_width: usize) -> Result<()> {
    if noise.dt_macro() != params.dt_macro || noise.n_macro() < steps || noise.slow_width() != slow_width {
        return Err(CoreError::ScheduleMismatch(format!(
            "noise path (dt {}, {} steps, width {}) does not fit run (dt {}, {} steps, width {})",
            noise.dt_macro(),
            noise.n_macro(),
            noise.slow_width(),
            params.dt_macro,
            steps,
            slow_width
        )));
    }
    Ok(())
}

fn run_coupled(
    model: &ModelSpec,
    horizon: f64,
    params: &SchemeParams,
    mut source: Increments<'_>,
    record_noise: bool,
) -> Result<CoupledRun> {
    let steps = params.macro_steps(horizon)?;
    let slow_step = SlowStepper::new(model, params)?;
    let fast_step = FastStepper::coupled(model, params);
    let n_sub = params.micro_substeps(model.epsilon);
    let (sw, fw) = (slow_step.noise_width(), fast_step.noise_width());
    if let Increments::Replay(path) = &source {
        check_path(path, params, steps, sw)?;
        if path.substeps() != n_sub || path.fast_width() != fw {
            return Err(CoreError::ScheduleMismatch("fast noise layout does not match the scheme".into()));
        }
    }
    let mut record = record_noise.then(|| NoisePath::new(params.dt_macro, fast_step.dt_micro(), n_sub, sw, fw));
    let mut stats = StatsAccumulator::new(model.state_norm(), params.dt_macro, steps, &model.x0)?;

    let mut xs = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    xs.push(model.x0.clone());
    ys.push(model.y0.clone());
    let sq_macro = params.dt_macro.sqrt();
    let sq_micro = fast_step.dt_micro().sqrt();
    let mut dw_slow = vec![0.0; sw];
    let mut dw_fast = vec![0.0; n_sub * fw];

    for n in 0..steps {
        match &mut source {
            Increments::Fresh { slow, fast } => {
                fast.fill_gaussian(&mut dw_fast);
                dw_fast.iter_mut().for_each(|c| *c *= sq_micro);
                slow.fill_gaussian(&mut dw_slow);
                dw_slow.iter_mut().for_each(|c| *c *= sq_macro);
            }
            Increments::Replay(path) => {
                dw_fast.copy_from_slice(path.fast_block(n));
                dw_slow.copy_from_slice(path.slow(n));
            }
        }
        let x = &xs[n];
        let (y_end, y_mean) = fast_step.block(x, &ys[n], &dw_fast, n_sub);
        if !y_end.is_finite() {
            return Err(CoreError::NonFinite("fast variable"));
        }
        let forcing = Field::from_raw(model.grid, affine_f(&model.coupling, x.values(), y_mean.values()));
        let x_next = slow_step.step(x, &forcing, &dw_slow)?.x;
        if let Some(r) = record.as_mut() {
            r.push(&dw_slow, &dw_fast)?;
        }
        stats.push(&x_next, &y_end)?;
        xs.push(x_next);
        ys.push(y_end);
    }
    Ok(CoupledRun { x: xs, y: ys, noise: record, stats: stats.finish() })
}

/// Runs the averaged equation `dX = [A(X) + F_bar(X)] dt + G1(X) dW` with the
/// same slow step as the coupled scheme, driven by the slow increments of
/// `noise`. Returns `X_n` for `n = 0..=N`.
pub fn simulate_averaged(
    model: &ModelSpec,
    fbar: &mut dyn FbarProvider,
    horizon: f64,
    params: &SchemeParams,
    noise: &NoisePath,
) -> Result<Vec<Field>> {
    let steps = params.macro_steps(horizon)?;
    let slow_step = SlowStepper::new(model, params)?;
    check_path(noise, params, steps, slow_step.noise_width())?;
    let mut xs = Vec::with_capacity(steps + 1);
    xs.push(model.x0.clone());
    for n in 0..steps {
        let x = &xs[n];
        let forcing = fbar.fbar(x)?;
        let next = slow_step.step(x, &forcing, noise.slow(n))?.x;
        xs.push(next);
    }
    Ok(xs)
}

struct StatsAccumulator {
    kind: NormKind,
    dt: f64,
    n: usize,
    sup_x: f64,
    sum_y: f64,
    /// Per dyadic level: block length in steps, current anchor, integral.
    levels: Vec<(usize, Field, f64)>,
}

impl StatsAccumulator {
    fn new(kind: NormKind, dt: f64, steps: usize, x0: &Field) -> Result<Self> {
        let mut levels = Vec::new();
        let mut len = 1usize;
        while len <= steps {
            levels.push((len, x0.clone(), 0.0));
            len *= 2;
        }
        let n0 = norm(x0, kind)?;
        Ok(Self { kind, dt, n: 0, sup_x: n0 * n0, sum_y: 0.0, levels })
    }

    fn push(&mut self, x: &Field, y: &Field) -> Result<()> {
        self.n += 1;
        let nx = norm(x, self.kind)?;
        self.sup_x = self.sup_x.max(nx * nx);
        let ny = norm(y, NormKind::L2)?;
        self.sum_y += ny * ny;
        for (len, anchor, acc) in &mut self.levels {
            let d = norm(&x.sub(anchor)?, self.kind)?;
            *acc += self.dt * d * d;
            if self.n.is_multiple_of(*len) {
                *anchor = x.clone();
            }
        }
        Ok(())
    }

    fn finish(self) -> TrajectoryStats {
        let dt = self.dt;
        TrajectoryStats {
            sup_norm_x_sq: self.sup_x,
            mean_norm_y_sq: if self.n > 0 { self.sum_y / self.n as f64 } else { 0.0 },
            increment_integral: self.levels.into_iter().map(|(len, _, acc)| (len as f64 * dt, acc)).collect(),
        }
    }
}
