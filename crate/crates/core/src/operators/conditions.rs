//! Randomized checks of the monotonicity, coercivity and growth conditions
//! on the discretized operators.
//!
//! Every check draws random smooth fields, evaluates `lhs <= rhs` for the
//! condition with explicit constants and records a normalized margin
//! `(rhs + tol - lhs) / scale` per sample. Constants that follow from the
//! operator structure are used directly; the two Burgers constants without a
//! closed form (local monotonicity and growth) are calibrated on a separate
//! batch of samples and checked on a fresh batch with a factor-2 allowance;
//! the local-monotonicity calibration uses the exact worst direction for
//! each sampled base point.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Result;
use crate::grid::{norm, poisson_solve, smallest_eigenvalue, state_inner, Field, Grid1D, NormKind};
use crate::operators::coupling::{CouplingSpec, NoiseBasis};
use crate::operators::fast::{dissipativity_margin, fast_drift, FastOperatorSpec};
use crate::operators::slow::{p_laplace_flux, slow_drift, SlowKind, SlowOperatorSpec};
use crate::rng::RngStream;
use crate::tridiag::sym_max_eigenvalue;

const AMPLITUDES: [f64; 3] = [0.1, 1.0, 10.0];
const SAMPLER_MODES: usize = 16;
const REL_TOL: f64 = 1e-9;
const CALIBRATION_SLACK: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConditionId {
    A2LocalMonotone,
    A3Coercive,
    A4Growth,
    B2Dissipative,
    B3Coercive,
    B4Growth,
}

impl ConditionId {
    pub const ALL: [ConditionId; 6] = [
        ConditionId::A2LocalMonotone,
        ConditionId::A3Coercive,
        ConditionId::A4Growth,
        ConditionId::B2Dissipative,
        ConditionId::B3Coercive,
        ConditionId::B4Growth,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ConditionId::A2LocalMonotone => "A2_local_monotone",
            ConditionId::A3Coercive => "A3_coercive",
            ConditionId::A4Growth => "A4_growth",
            ConditionId::B2Dissipative => "B2_dissipative",
            ConditionId::B3Coercive => "B3_coercive",
            ConditionId::B4Growth => "B4_growth",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label() == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition_id: ConditionId,
    pub samples: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub fitted_constants: BTreeMap<&'static str, f64>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// The operator triple a condition is evaluated on.
#[derive(Debug, Clone, Copy)]
pub struct ConditionTarget<'a> {
    pub slow: &'a SlowOperatorSpec,
    pub fast: &'a FastOperatorSpec,
    pub coupling: &'a CouplingSpec,
}

/// Truncated sine series `sum_k amplitude xi_k / k e_k`, `xi_k ~ N(0,1)`.
pub fn random_smooth_field(grid: Grid1D, amplitude: f64, stream: &mut RngStream) -> Field {
    let modes = grid.n_interior().min(SAMPLER_MODES);
    let mut out = Field::zeros(grid);
    for k in 1..=modes {
        let c = amplitude * stream.gaussian() / k as f64;
        let e = grid.sine_mode(k);
        out.values_mut().iter_mut().zip(e.values()).for_each(|(o, ek)| *o += c * ek);
    }
    out
}

struct Tally {
    samples: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self { samples: 0, violations: 0, worst: f64::INFINITY }
    }

    fn record(&mut self, lhs: f64, rhs: f64, scale: f64) {
        let scale = scale.max(f64::MIN_POSITIVE);
        let margin = (rhs + REL_TOL * scale - lhs) / scale;
        self.samples += 1;
        if !(margin > 0.0) {
            self.violations += 1;
        }
        self.worst = self.worst.min(margin);
    }

    fn finish(self, id: ConditionId, constants: BTreeMap<&'static str, f64>) -> ConditionReport {
        ConditionReport {
            condition_id: id,
            samples: self.samples,
            violations: self.violations,
            worst_margin: self.worst,
            fitted_constants: constants,
        }
    }
}

fn amp(i: usize, stride: usize) -> f64 {
    AMPLITUDES[(i / stride) % AMPLITUDES.len()]
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Largest ratio `||x||_{L2} / ||x||_{H1}` for the slow pivot space.
fn l2_over_state(kind: NormKind, grid: &Grid1D) -> f64 {
    match kind {
        NormKind::HMinus1 => grid.max_eigenvalue().sqrt(),
        _ => 1.0,
    }
}

pub fn check_condition(
    id: ConditionId,
    target: &ConditionTarget<'_>,
    grid: &Grid1D,
    samples: usize,
    stream: &mut RngStream,
) -> Result<ConditionReport> {
    grid.check_same(&target.coupling.grid())?;
    let samples = samples.max(1);
    match id {
        ConditionId::A2LocalMonotone => check_a2(target, grid, samples, stream),
        ConditionId::A3Coercive => check_a3(target, grid, samples, stream),
        ConditionId::A4Growth => check_a4(target, grid, samples, stream),
        ConditionId::B2Dissipative => check_b2(target, grid, samples, stream),
        ConditionId::B3Coercive => check_b3(target, grid, samples, stream),
        ConditionId::B4Growth => check_b4(target, grid, samples, stream),
    }
}

fn random_pair(i: usize, grid: Grid1D, stream: &mut RngStream) -> (Field, Field) {
    let v = random_smooth_field(grid, amp(i, 1), stream);
    let w = if i == 0 { grid.sine_mode(1).scaled(amp(i, 3)) } else { random_smooth_field(grid, amp(i, 3), stream) };
    (v, w)
}

/// `2 <A(u) - A(v), u - v> + ||G1(u) - G1(v)||^2 <= rho(v) ||u - v||^2` with
/// `rho = L_G1^2` for the monotone operators and
/// `rho(v) = L_G1^2 + C (1 + ||v||_{L4}^4)` for Burgers.
fn check_a2(
    target: &ConditionTarget<'_>,
    grid: &Grid1D,
    samples: usize,
    stream: &mut RngStream,
) -> Result<ConditionReport> {
    let slow = target.slow;
    let kind = slow.state_norm();
    let l_g1 = target.coupling.lipschitz_g1();
    let eval = |v: &Field, w: &Field| -> Result<(f64, f64, f64, f64)> {
        let u = v.add_scaled(1.0, w)?;
        let au = slow_drift(slow, &u);
        let av = slow_drift(slow, v);
        let pu = state_inner(&au, w, kind)?;
        let pv = state_inner(&av, w, kind)?;
        let w2 = sq(norm(w, kind)?);
        let lhs = 2.0 * (pu - pv) + sq(l_g1) * w2;
        let shape = (1.0 + norm(v, NormKind::Lp(4.0))?.powi(4)) * w2;
        let scale = 2.0 * (pu.abs() + pv.abs()) + sq(l_g1) * w2;
        Ok((lhs, sq(l_g1) * w2, shape, scale))
    };

    let bound = if slow.is_globally_monotone() {
        0.0
    } else {
        // The convection term is quadratic and skew, so for u = v + w the
        // pairing 2 <A(u) - A(v), w> equals 2 <J(v) w, w> exactly and its
        // worst direction is the top eigenvalue of the symmetrized Jacobian.
        let mut c_cal: f64 = 0.0;
        for i in 0..samples {
            let v = random_smooth_field(*grid, amp(i, 1), stream);
            let rho = 2.0 * burgers_sym_jacobian_max(slow, &v);
            let shape = 1.0 + norm(&v, NormKind::Lp(4.0))?.powi(4);
            c_cal = c_cal.max(rho / shape);
        }
        CALIBRATION_SLACK * c_cal
    };

    let mut tally = Tally::new();
    let mut c_fit = f64::NEG_INFINITY;
    for i in 0..samples {
        let (v, w) = random_pair(i, *grid, stream);
        let (lhs, base, shape, scale) = eval(&v, &w)?;
        c_fit = c_fit.max((lhs - base) / shape);
        let rhs = base + bound * shape;
        tally.record(lhs, rhs, scale + rhs.abs());
    }
    let mut constants = BTreeMap::new();
    constants.insert("rho_C", c_fit);
    constants.insert("rho_C_bound", bound);
    constants.insert("L_G1", l_g1);
    Ok(tally.finish(ConditionId::A2LocalMonotone, constants))
}

/// Top eigenvalue of the symmetric part of the Burgers drift Jacobian at `v`.
fn burgers_sym_jacobian_max(slow: &SlowOperatorSpec, v: &Field) -> f64 {
    let nu = match slow.kind() {
        SlowKind::Burgers { viscosity } => viscosity,
        _ => 0.0,
    };
    let u = v.values();
    let n = u.len();
    let h = v.grid().h();
    let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { u[i as usize] };
    let diag: Vec<f64> = (0..n as isize).map(|i| -2.0 * nu / (h * h) + (at(i + 1) - at(i - 1)) / (6.0 * h)).collect();
    let off: Vec<f64> = (0..n as isize - 1).map(|i| nu / (h * h) + (at(i + 1) - at(i)) / (12.0 * h)).collect();
    sym_max_eigenvalue(&diag, &off)
}

/// Nominal coercivity constant `theta` in `<A(v), v> <= -theta ||v||_V^alpha`.
fn nominal_theta(slow: &SlowOperatorSpec) -> f64 {
    match slow.kind() {
        SlowKind::PorousMedium { c, .. } => c,
        SlowKind::PLaplace { .. } => 1.0,
        SlowKind::Burgers { viscosity } => viscosity,
    }
}

fn check_a3(
    target: &ConditionTarget<'_>,
    grid: &Grid1D,
    samples: usize,
    stream: &mut RngStream,
) -> Result<ConditionReport> {
    let slow = target.slow;
    let kind = slow.state_norm();
    let theta = nominal_theta(slow);
    let alpha = slow.alpha();
    let mut tally = Tally::new();
    let mut theta_fit = f64::INFINITY;
    for i in 0..samples {
        let v = random_smooth_field(*grid, amp(i, 1), stream);
        let lhs = state_inner(&slow_drift(slow, &v), &v, kind)?;
        let vn = slow.v_norm(&v)?.powf(alpha);
        if vn > 0.0 {
            theta_fit = theta_fit.min(-lhs / vn);
        }
        let rhs = -theta * vn;
        tally.record(lhs, rhs, lhs.abs() + rhs.abs());
    }
    let mut constants = BTreeMap::new();
    constants.insert("theta", theta_fit);
    constants.insert("theta_nominal", theta);
    constants.insert("alpha", alpha);
    Ok(tally.finish(ConditionId::A3Coercive, constants))
}

/// `||A(v)||_{V*}^{alpha/(alpha-1)} <= C (1 + ||v||_V^alpha)(1 + ||v||_H^beta)`.
/// For the porous medium the dual norm is exact (`||Psi(v)||_{L^{p'}}`); for
/// the p-Laplacian it is bounded above by the face-flux `L^{p'}` norm; for
/// Burgers it is the discrete `H^{-1}` norm.
fn check_a4(
    target: &ConditionTarget<'_>,
    grid: &Grid1D,
    samples: usize,
    stream: &mut RngStream,
) -> Result<ConditionReport> {
    let slow = target.slow;
    let kind = slow.state_norm();
    let alpha = slow.alpha();
    let beta = slow.beta();
    let h = grid.h();
    let conj = alpha / (alpha - 1.0);
    let eval = |v: &Field| -> Result<(f64, f64)> {
        let a = slow_drift(slow, v);
        let lhs = match slow.kind() {
            SlowKind::PorousMedium { .. } => {
                let riesz = poisson_solve(&a);
                h * riesz.values().iter().map(|z| z.abs().powf(conj)).sum::<f64>()
            }
            SlowKind::PLaplace { p } => h * p_laplace_flux(v, p).iter().map(|z| z.abs().powf(conj)).sum::<f64>(),
            SlowKind::Burgers { .. } => norm(&a, NormKind::HMinus1)?.powf(conj),
        };
        let shape = (1.0 + slow.v_norm(v)?.powf(alpha)) * (1.0 + norm(v, kind)?.powf(beta));
        Ok((lhs, shape))
    };
    let bound = match slow.kind() {
        SlowKind::PorousMedium { c, .. } => c.powf(conj),
        SlowKind::PLaplace { .. } => 1.0,
        SlowKind::Burgers { .. } => {
            let mut c_cal: f64 = 0.0;
            for i in 0..samples {
                let v = random_smooth_field(*grid, amp(i, 1), stream);
                let (lhs, shape) = eval(&v)?;
                c_cal = c_cal.max(lhs / shape);
            }
            CALIBRATION_SLACK * c_cal
        }
    };
    let mut tally = Tally::new();
    let mut c_fit: f64 = 0.0;
    for i in 0..samples {
        let v = random_smooth_field(*grid, amp(i, 1), stream);
        let (lhs, shape) = eval(&v)?;
        c_fit = c_fit.max(lhs / shape);
        let rhs = bound * shape;
        tally.record(lhs, rhs, lhs.abs() + rhs.abs());
    }
    let g1 = NoiseBasis::new(target.coupling.g1, *grid);
    let mut constants = BTreeMap::new();
    constants.insert("C", c_fit);
    constants.insert("C_bound", bound);
    constants.insert("G1_hs", g1.additive_hs_norm_sq(kind).sqrt());
    Ok(tally.finish(ConditionId::A4Growth, constants))
}

/// `2 <B(x,u) - B(x,v), u - v> + ||G2(u) - G2(v)||^2 <= -gamma ||u - v||^2`
/// with `gamma` the dissipativity margin (required positive).
fn check_b2(
    target: &ConditionTarget<'_>,
    grid: &Grid1D,
    samples: usize,
    stream: &mut RngStream,
) -> Result<ConditionReport> {
    let fast = target.fast;
    let margin = dissipativity_margin(fast, target.coupling, grid);
    let gamma = margin.max(0.0);
    let l_g2 = target.coupling.lipschitz_g2();
    let e1 = grid.sine_mode(1);
    let mut tally = Tally::new();
    let mut gamma_fit = f64::INFINITY;
    for i in 0..samples {
        let x = random_smooth_field(*grid, amp(i, 9), stream);
        let (v, w) = match i {
            // linearization at the origin along the slowest mode
            0 => (Field::zeros(*grid), e1.scaled(1e-3)),
            1 => (random_smooth_field(*grid, amp(i, 1), stream), e1.scaled(amp(i, 3))),
            _ => random_pair(i, *grid, stream),
        };
        let u = v.add_scaled(1.0, &w)?;
        let bu = fast_drift(fast, &x, &u)?;
        let bv = fast_drift(fast, &x, &v)?;
        let pu = bu.inner(&w)?;
        let pv = bv.inner(&w)?;
        let w2 = sq(norm(&w, NormKind::L2)?);
        let lhs = 2.0 * (pu - pv) + sq(l_g2) * w2;
        gamma_fit = gamma_fit.min(-lhs / w2);
        let rhs = -gamma * w2;
        tally.record(lhs, rhs, 2.0 * (pu.abs() + pv.abs()) + sq(l_g2) * w2 + rhs.abs());
    }
    let mut constants = BTreeMap::new();
    constants.insert("gamma_hat", gamma_fit);
    constants.insert("margin", margin);
    constants.insert("lambda1", smallest_eigenvalue(grid));
    Ok(tally.finish(ConditionId::B2Dissipative, constants))
}

/// `<B(x,v), v> <= C ||v||^2 - eta ||v||_{H1_0}^2 + C (1 + ||x||_H^2)` with
/// `eta = 1`, `C = max(b + 1/2, c_b^2 k^2 / 2)`, `k` the norm ratio between
/// `L2` and the slow pivot space.
fn check_b3(
    target: &ConditionTarget<'_>,
    grid: &Grid1D,
    samples: usize,
    stream: &mut RngStream,
) -> Result<ConditionReport> {
    let fast = target.fast;
    let kind = target.slow.state_norm();
    let kappa = l2_over_state(kind, grid);
    let eta = 1.0;
    let c = (fast.lipschitz_y() + 0.5).max(0.5 * sq(fast.c_b() * kappa));
    let mut tally = Tally::new();
    let mut eta_fit = f64::INFINITY;
    for i in 0..samples {
        let x = random_smooth_field(*grid, amp(i, 3), stream);
        let v = random_smooth_field(*grid, amp(i, 1), stream);
        let lhs = fast_drift(fast, &x, &v)?.inner(&v)?;
        let v2 = sq(norm(&v, NormKind::L2)?);
        let grad2 = sq(norm(&v, NormKind::H10)?);
        let x2 = sq(norm(&x, kind)?);
        let affine = c * v2 + c * (1.0 + x2);
        if grad2 > 0.0 {
            eta_fit = eta_fit.min((affine - lhs) / grad2);
        }
        let rhs = affine - eta * grad2;
        tally.record(lhs, rhs, lhs.abs() + affine + eta * grad2);
    }
    let mut constants = BTreeMap::new();
    constants.insert("eta", eta_fit);
    constants.insert("eta_nominal", eta);
    constants.insert("C_bound", c);
    Ok(tally.finish(ConditionId::B3Coercive, constants))
}

/// `||B(x,v)||_{H^{-1}} <= C (1 + ||v||_{H1_0} + ||x||_H)` with
/// `C = max(1, |c_b| k / sqrt(lambda1), b / sqrt(lambda1))`.
fn check_b4(
    target: &ConditionTarget<'_>,
    grid: &Grid1D,
    samples: usize,
    stream: &mut RngStream,
) -> Result<ConditionReport> {
    let fast = target.fast;
    let kind = target.slow.state_norm();
    let kappa = l2_over_state(kind, grid);
    let s1 = smallest_eigenvalue(grid).sqrt();
    let bound = 1.0f64.max(fast.c_b().abs() * kappa / s1).max(fast.lipschitz_y() / s1);
    let mut tally = Tally::new();
    let mut c_fit: f64 = 0.0;
    for i in 0..samples {
        let x = random_smooth_field(*grid, amp(i, 3), stream);
        let v = random_smooth_field(*grid, amp(i, 1), stream);
        let lhs = norm(&fast_drift(fast, &x, &v)?, NormKind::HMinus1)?;
        let shape = 1.0 + norm(&v, NormKind::H10)? + norm(&x, kind)?;
        c_fit = c_fit.max(lhs / shape);
        let rhs = bound * shape;
        tally.record(lhs, rhs, lhs + rhs);
    }
    let g2 = NoiseBasis::new(target.coupling.g2, *grid);
    let mut constants = BTreeMap::new();
    constants.insert("C", c_fit);
    constants.insert("C_bound", bound);
    constants.insert("G2_hs", g2.additive_hs_norm_sq(NormKind::L2).sqrt());
    Ok(tally.finish(ConditionId::B4Growth, constants))
}

/// Runs every condition on `target`.
pub fn check_all(
    target: &ConditionTarget<'_>,
    grid: &Grid1D,
    samples: usize,
    stream: &mut RngStream,
) -> Result<Vec<ConditionReport>> {
    ConditionId::ALL.iter().map(|&id| check_condition(id, target, grid, samples, stream)).collect()
}
