//! The frozen fast equation `dY = B(x, Y) dt + G2(Y) dW` with `x` held
//! fixed, estimation of its invariant mean and of the averaged coefficient
//! `F_bar(x)`, synchronous-coupling decay fits, and the closed form of
//! `F_bar` for linear fast dynamics with additive noise.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::fit::{linear_fit, mean_and_stderr};
use crate::grid::{norm, poisson_solve, Field, NormKind};
use crate::integrators::{FastStepper, ModelSpec};
use crate::operators::coupling::affine_f;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenRunSpec {
    pub x_frozen: Field,
    pub y0: Field,
    /// Burn-in in fast time units.
    pub t_burn: f64,
    pub t_avg: f64,
    pub n_replicas: usize,
    pub dt_fast: f64,
}

impl FrozenRunSpec {
    /// Burn-in `8 / margin`, window `50 / margin`, 8 replicas, step
    /// `0.1 / margin`, started from the model's `y0`.
    pub fn defaults(model: &ModelSpec, x_frozen: Field) -> Self {
        let rate = model.margin();
        Self {
            x_frozen,
            y0: model.y0.clone(),
            t_burn: 8.0 / rate,
            t_avg: 50.0 / rate,
            n_replicas: 8,
            dt_fast: 0.1 / rate,
        }
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        model.grid.check_same(&self.x_frozen.grid())?;
        model.grid.check_same(&self.y0.grid())?;
        let ok = self.t_burn >= 0.0 && self.t_avg > 0.0 && self.dt_fast > 0.0 && self.n_replicas > 0;
        if !ok || !self.t_burn.is_finite() || !self.t_avg.is_finite() {
            return Err(CoreError::InvalidParameter("frozen run needs positive times and replicas".into()));
        }
        if !(model.margin() > 0.0) {
            return Err(CoreError::NonDissipative { margin: model.margin() });
        }
        Ok(())
    }

    fn steps(&self, t: f64) -> usize {
        (t / self.dt_fast).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbarEstimate {
    pub value: Field,
    /// Per-node standard error from the spread across replicas.
    pub std_error: Field,
    pub t_avg_used: f64,
    pub replicas_used: usize,
    /// Set when the burn-in is shorter than `5 / margin`.
    pub short_burn_in: bool,
}

fn draw(stream: &mut RngStream, dw: &mut [f64], sq: f64) {
    stream.fill_gaussian(dw);
    dw.iter_mut().for_each(|c| *c *= sq);
}

/// One frozen path over `[0, t_burn + t_avg]` at every fast step,
/// starting with `y0`.
pub fn simulate_frozen(spec: &FrozenRunSpec, model: &ModelSpec, stream: &mut RngStream) -> Result<Vec<Field>> {
    spec.validate(model)?;
    let stepper = FastStepper::frozen(model, spec.dt_fast);
    let steps = spec.steps(spec.t_burn + spec.t_avg);
    let sq = spec.dt_fast.sqrt();
    let mut dw = vec![0.0; stepper.noise_width()];
    let mut y = spec.y0.values().to_vec();
    let mut scratch = Vec::with_capacity(y.len());
    let mut out = Vec::with_capacity(steps + 1);
    out.push(spec.y0.clone());
    for _ in 0..steps {
        draw(stream, &mut dw, sq);
        stepper.micro_step(spec.x_frozen.values(), &mut y, &dw, &mut scratch);
        out.push(Field::from_raw(model.grid, y.clone()));
    }
    if !out.last().is_some_and(Field::is_finite) {
        return Err(CoreError::NonFinite("frozen path"));
    }
    Ok(out)
}

/// Time average of `Y` over the averaging window of one replica.
fn time_average(spec: &FrozenRunSpec, stepper: &FastStepper, stream: &mut RngStream) -> Vec<f64> {
    let sq = spec.dt_fast.sqrt();
    let n_burn = spec.steps(spec.t_burn);
    let n_avg = spec.steps(spec.t_avg).max(1);
    let mut dw = vec![0.0; stepper.noise_width()];
    let mut y = spec.y0.values().to_vec();
    let mut scratch = Vec::with_capacity(y.len());
    let mut sum = vec![0.0; y.len()];
    for m in 0..n_burn + n_avg {
        draw(stream, &mut dw, sq);
        stepper.micro_step(spec.x_frozen.values(), &mut y, &dw, &mut scratch);
        if m >= n_burn {
            sum.iter_mut().zip(&y).for_each(|(s, v)| *s += v);
        }
    }
    sum.iter_mut().for_each(|s| *s /= n_avg as f64);
    sum
}

/// Estimates `F_bar(x_frozen)` by replicated time averages. Because `F` is
/// affine in `y`, the time average of `F(x, Y_s)` is `F(x, Y_avg)`.
pub fn estimate_fbar(model: &ModelSpec, spec: &FrozenRunSpec, stream: &mut RngStream) -> Result<FbarEstimate> {
    spec.validate(model)?;
    let stepper = FastStepper::frozen(model, spec.dt_fast);
    let replicas: Vec<Vec<f64>> = (0..spec.n_replicas).map(|_| time_average(spec, &stepper, stream)).collect();
    let n = model.grid.n_interior();
    let mut ybar = vec![0.0; n];
    let mut se = vec![0.0; n];
    let mut column = vec![0.0; spec.n_replicas];
    for i in 0..n {
        for (c, r) in column.iter_mut().zip(&replicas) {
            *c = r[i];
        }
        let (m, s) = mean_and_stderr(&column);
        ybar[i] = m;
        se[i] = model.coupling.c_fy.abs() * s;
    }
    if ybar.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite("frozen time average"));
    }
    let value = Field::from_raw(model.grid, affine_f(&model.coupling, spec.x_frozen.values(), &ybar));
    Ok(FbarEstimate {
        value,
        std_error: Field::from_raw(model.grid, se),
        t_avg_used: spec.steps(spec.t_avg).max(1) as f64 * spec.dt_fast,
        replicas_used: spec.n_replicas,
        short_burn_in: spec.t_burn < 5.0 / model.margin(),
    })
}

/// `f0 + c_fx x + c_fy c_b L^{-1} x`: `F` evaluated at the invariant mean of
/// the linear frozen equation.
pub fn oracle_fbar_ou(x: &Field, model: &ModelSpec) -> Result<Field> {
    if !model.fast.is_linear() {
        return Err(CoreError::NotOuModel("fast drift is not linear in y"));
    }
    if !model.coupling.g2.is_additive() {
        return Err(CoreError::NotOuModel("fast noise is multiplicative"));
    }
    model.grid.check_same(&x.grid())?;
    let mean = poisson_solve(x).scaled(model.fast.c_b());
    Ok(Field::from_raw(model.grid, affine_f(&model.coupling, x.values(), mean.values())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Least-squares slope of `ln ||Y1 - Y2||_{L2}` against fast time.
    pub slope: f64,
    pub r_squared: f64,
    pub samples: usize,
    /// Fewer than 10 samples were collected before the paths merged.
    pub degenerate: bool,
}

/// Runs two frozen paths from `y1` and `y2` under the same noise and fits
/// the exponential decay of their distance. Samples are collected while the
/// distance stays above round-off.
pub fn ergodicity_decay(
    x: &Field,
    y1: &Field,
    y2: &Field,
    model: &ModelSpec,
    horizon: f64,
    dt_fast: f64,
    stream: &mut RngStream,
) -> Result<DecayFit> {
    for f in [x, y1, y2] {
        model.grid.check_same(&f.grid())?;
    }
    if !(horizon > 0.0 && dt_fast > 0.0) {
        return Err(CoreError::InvalidParameter("horizon and dt_fast must be positive".into()));
    }
    let stepper = FastStepper::frozen(model, dt_fast);
    let steps = (horizon / dt_fast).round() as usize;
    let sq = dt_fast.sqrt();
    let mut dw = vec![0.0; stepper.noise_width()];
    let (mut a, mut b) = (y1.values().to_vec(), y2.values().to_vec());
    let mut scratch = Vec::with_capacity(a.len());
    let h = model.grid.h();
    let dist = |a: &[f64], b: &[f64]| (h * a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>()).sqrt();
    let size = |a: &[f64]| (h * a.iter().map(|u| u * u).sum::<f64>()).sqrt();

    let mut points = Vec::new();
    let d0 = dist(&a, &b);
    if d0 > 1e-10 * (1.0 + size(&a)) {
        points.push((0.0, d0.ln()));
        for m in 1..=steps {
            draw(stream, &mut dw, sq);
            stepper.micro_step(x.values(), &mut a, &dw, &mut scratch);
            stepper.micro_step(x.values(), &mut b, &dw, &mut scratch);
            let d = dist(&a, &b);
            if !(d > 1e-10 * (1.0 + size(&a))) {
                break;
            }
            points.push((m as f64 * dt_fast, d.ln()));
        }
    }
    if points.len() < 10 {
        return Ok(DecayFit { slope: 0.0, r_squared: 0.0, samples: points.len(), degenerate: true });
    }
    let (slope, _, r_squared) = linear_fit(points.iter().copied());
    Ok(DecayFit { slope, r_squared, samples: points.len(), degenerate: false })
}

/// Source of the averaged coefficient for the averaged equation.
pub trait FbarProvider {
    fn fbar(&mut self, x: &Field) -> Result<Field>;
}

/// Closed-form `F_bar` for linear fast dynamics with additive noise.
#[derive(Debug, Clone)]
pub struct OuOracle {
    model: ModelSpec,
}

impl OuOracle {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        oracle_fbar_ou(&Field::zeros(model.grid), model)?;
        Ok(Self { model: model.clone() })
    }
}

impl FbarProvider for OuOracle {
    fn fbar(&mut self, x: &Field) -> Result<Field> {
        oracle_fbar_ou(x, &self.model)
    }
}

/// Monte Carlo `F_bar` with a cache: exact repeats are looked up by a hash
/// of the nodal values, and a cached estimate is reused for any `x` within
/// the trust radius `rel * ||x||_{L2} + abs` of its anchor.
#[derive(Debug, Clone)]
pub struct MemoizedEstimator {
    model: ModelSpec,
    template: FrozenRunSpec,
    stream: RngStream,
    rel_radius: f64,
    abs_radius: f64,
    exact: BTreeMap<u64, usize>,
    entries: Vec<(Field, Field)>,
    misses: usize,
}

impl MemoizedEstimator {
    /// `template` supplies every frozen-run setting except `x_frozen`.
    pub fn new(model: &ModelSpec, template: FrozenRunSpec, stream: RngStream) -> Self {
        Self {
            model: model.clone(),
            template,
            stream,
            rel_radius: 0.05,
            abs_radius: 1e-3,
            exact: BTreeMap::new(),
            entries: Vec::new(),
            misses: 0,
        }
    }

    pub fn with_trust_radius(mut self, rel: f64, abs: f64) -> Self {
        self.rel_radius = rel;
        self.abs_radius = abs;
        self
    }

    /// Number of frozen-run estimates computed so far.
    pub fn estimates_computed(&self) -> usize {
        self.misses
    }

    fn key(x: &Field) -> u64 {
        // FNV-1a over the bit patterns
        x.values().iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            v.to_bits().to_le_bytes().iter().fold(h, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
        })
    }
}

impl FbarProvider for MemoizedEstimator {
    fn fbar(&mut self, x: &Field) -> Result<Field> {
        let key = Self::key(x);
        if let Some(&i) = self.exact.get(&key) {
            if self.entries[i].0 == *x {
                return Ok(self.entries[i].1.clone());
            }
        }
        let radius = self.rel_radius * norm(x, NormKind::L2)? + self.abs_radius;
        for (anchor, value) in self.entries.iter().rev() {
            if norm(&x.sub(anchor)?, NormKind::L2)? <= radius {
                return Ok(value.clone());
            }
        }
        let spec = FrozenRunSpec { x_frozen: x.clone(), ..self.template.clone() };
        let est = estimate_fbar(&self.model, &spec, &mut self.stream)?;
        self.misses += 1;
        self.exact.insert(key, self.entries.len());
        self.entries.push((x.clone(), est.value.clone()));
        Ok(est.value)
    }
}
