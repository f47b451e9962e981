use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::grid::{Field, Grid1D, NormKind};
use crate::rng::RngStream;

/// Noise on the first `modes` sine modes with amplitudes `amplitude / k^2`,
/// plus an optional diagonal multiplicative part `multiplicative * u dbeta`
/// driven by one extra scalar Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub amplitude: f64,
    pub modes: usize,
    pub multiplicative: f64,
}

impl NoiseSpec {
    pub fn additive(amplitude: f64, modes: usize) -> Self {
        Self { amplitude, modes, multiplicative: 0.0 }
    }

    pub fn is_additive(&self) -> bool {
        self.multiplicative == 0.0
    }

    /// Number of scalar Brownian coefficients consumed per step.
    pub fn width(&self) -> usize {
        self.modes + usize::from(!self.is_additive())
    }

    fn validate(&self, grid: &Grid1D, name: &str) -> Result<()> {
        if !(self.amplitude >= 0.0) || !(self.multiplicative >= 0.0) {
            return Err(CoreError::InvalidParameter(format!("{name}: amplitudes must be >= 0")));
        }
        if self.modes == 0 || self.modes > grid.n_interior() {
            return Err(CoreError::InvalidParameter(format!(
                "{name}: modes must be in 1..={}, got {}",
                grid.n_interior(),
                self.modes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseWhich {
    Slow,
    Fast,
}

/// `F(x, y) = f0 + c_fx x + c_fy y` together with the two noise coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    pub f0: Field,
    pub c_fx: f64,
    pub c_fy: f64,
    pub g1: NoiseSpec,
    pub g2: NoiseSpec,
}

impl CouplingSpec {
    pub fn new(f0: Field, c_fx: f64, c_fy: f64, g1: NoiseSpec, g2: NoiseSpec) -> Result<Self> {
        let grid = f0.grid();
        if !c_fx.is_finite() || !c_fy.is_finite() || !f0.is_finite() {
            return Err(CoreError::InvalidParameter("coupling coefficients must be finite".into()));
        }
        g1.validate(&grid, "slow noise")?;
        g2.validate(&grid, "fast noise")?;
        Ok(Self { f0, c_fx, c_fy, g1, g2 })
    }

    /// `f0 = 0`, `c_fx = 0`, `c_fy = 1`, slow noise 0.5 and fast noise 1.0
    /// on up to 8 modes.
    pub fn additive_default(grid: Grid1D) -> Self {
        let modes = grid.n_interior().min(8);
        Self {
            f0: Field::zeros(grid),
            c_fx: 0.0,
            c_fy: 1.0,
            g1: NoiseSpec::additive(0.5, modes),
            g2: NoiseSpec::additive(1.0, modes),
        }
    }

    pub fn grid(&self) -> Grid1D {
        self.f0.grid()
    }

    pub fn noise(&self, which: NoiseWhich) -> &NoiseSpec {
        match which {
            NoiseWhich::Slow => &self.g1,
            NoiseWhich::Fast => &self.g2,
        }
    }

    pub fn lipschitz_f(&self) -> f64 {
        self.c_fx.abs().max(self.c_fy.abs())
    }

    pub fn lipschitz_g1(&self) -> f64 {
        self.g1.multiplicative
    }

    pub fn lipschitz_g2(&self) -> f64 {
        self.g2.multiplicative
    }

    pub fn is_additive(&self) -> bool {
        self.g1.is_additive() && self.g2.is_additive()
    }
}

pub fn coupling_f(spec: &CouplingSpec, x: &Field, y: &Field) -> Result<Field> {
    let grid = spec.grid();
    grid.check_same(&x.grid())?;
    grid.check_same(&y.grid())?;
    Ok(Field::from_raw(grid, affine_f(spec, x.values(), y.values())))
}

pub(crate) fn affine_f(spec: &CouplingSpec, x: &[f64], y: &[f64]) -> Vec<f64> {
    spec.f0.values().iter().zip(x).zip(y).map(|((f, xi), yi)| f + spec.c_fx * xi + spec.c_fy * yi).collect()
}

/// Precomputed `q_k e_k` vectors of one noise coefficient.
#[derive(Debug, Clone)]
pub struct NoiseBasis {
    n: usize,
    spec: NoiseSpec,
    scaled_modes: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl NoiseBasis {
    pub fn new(spec: NoiseSpec, grid: Grid1D) -> Self {
        let n = grid.n_interior();
        let mut scaled_modes = Vec::with_capacity(spec.modes * n);
        let mut eigenvalues = Vec::with_capacity(spec.modes);
        for k in 1..=spec.modes {
            let q = spec.amplitude / (k * k) as f64;
            scaled_modes.extend(grid.sine_mode(k).values().iter().map(|e| q * e));
            eigenvalues.push(grid.eigenvalue(k));
        }
        Self { n, spec, scaled_modes, eigenvalues }
    }

    pub fn width(&self) -> usize {
        self.spec.width()
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    /// `out += scale * G(state) dW` where `dW` holds the Brownian increments
    /// of the mode coefficients (and the multiplicative scalar, last).
    pub fn add_increment(&self, dw: &[f64], state: &[f64], scale: f64, out: &mut [f64]) {
        debug_assert_eq!(dw.len(), self.width());
        if self.spec.amplitude != 0.0 {
            for (k, &c) in dw[..self.spec.modes].iter().enumerate() {
                let s = scale * c;
                let mode = &self.scaled_modes[k * self.n..(k + 1) * self.n];
                for (o, e) in out.iter_mut().zip(mode) {
                    *o += s * e;
                }
            }
        }
        if !self.spec.is_additive() {
            let s = scale * self.spec.multiplicative * dw[self.spec.modes];
            for (o, u) in out.iter_mut().zip(state) {
                *o += s * u;
            }
        }
    }

    /// Squared Hilbert-Schmidt norm of the additive part measured in `kind`
    /// (`L2` or `HMinus1`).
    pub fn additive_hs_norm_sq(&self, kind: NormKind) -> f64 {
        (1..=self.spec.modes)
            .map(|k| {
                let q = self.spec.amplitude / (k * k) as f64;
                match kind {
                    NormKind::HMinus1 => q * q / self.eigenvalues[k - 1],
                    _ => q * q,
                }
            })
            .sum()
    }
}

/// One noise increment `G(state) dW` over a step of length `dt`.
pub fn noise_increment(
    spec: &CouplingSpec,
    which: NoiseWhich,
    dt: f64,
    stream: &mut RngStream,
    state: &Field,
) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(CoreError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let grid = spec.grid();
    grid.check_same(&state.grid())?;
    let basis = NoiseBasis::new(*spec.noise(which), grid);
    let mut dw = vec![0.0; basis.width()];
    stream.fill_gaussian(&mut dw);
    let sq = dt.sqrt();
    dw.iter_mut().for_each(|c| *c *= sq);
    let mut out = vec![0.0; grid.n_interior()];
    basis.add_increment(&dw, state.values(), 1.0, &mut out);
    Ok(Field::from_raw(grid, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norm;

    fn grid() -> Grid1D {
        Grid1D::new(31).unwrap()
    }

    #[test]
    fn f_of_zero_is_zero() {
        let g = grid();
        let spec = CouplingSpec::additive_default(g);
        let z = Field::zeros(g);
        assert_eq!(coupling_f(&spec, &z, &z).unwrap(), z);
    }

    #[test]
    fn f_ignores_y_when_decoupled() {
        let g = grid();
        let mut spec = CouplingSpec::additive_default(g);
        spec.c_fy = 0.0;
        spec.c_fx = 0.4;
        let x = Field::from_fn(g, |s| s.sin());
        let a = coupling_f(&spec, &x, &Field::constant(g, 3.0)).unwrap();
        let b = coupling_f(&spec, &x, &Field::constant(g, -7.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f_lipschitz_on_random_tuples() {
        let g = grid();
        let mut spec = CouplingSpec::additive_default(g);
        spec.c_fx = -0.7;
        spec.c_fy = 1.3;
        spec.f0 = Field::constant(g, 0.25);
        let mut rng = RngStream::new(1, 1);
        let rand = |rng: &mut RngStream| Field::from_raw(g, (0..g.n_interior()).map(|_| rng.gaussian()).collect());
        for _ in 0..100 {
            let (x1, y1, x2, y2) = (rand(&mut rng), rand(&mut rng), rand(&mut rng), rand(&mut rng));
            let d = coupling_f(&spec, &x1, &y1).unwrap().sub(&coupling_f(&spec, &x2, &y2).unwrap()).unwrap();
            let lhs = norm(&d, NormKind::L2).unwrap();
            let rhs = spec.lipschitz_f()
                * (norm(&x1.sub(&x2).unwrap(), NormKind::L2).unwrap()
                    + norm(&y1.sub(&y2).unwrap(), NormKind::L2).unwrap());
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_increment() {
        let g = grid();
        let mut spec = CouplingSpec::additive_default(g);
        spec.g1.amplitude = 0.0;
        let mut rng = RngStream::new(2, 0);
        let inc = noise_increment(&spec, NoiseWhich::Slow, 0.01, &mut rng, &Field::zeros(g)).unwrap();
        assert_eq!(inc, Field::zeros(g));
    }

    #[test]
    fn increment_replay() {
        let g = grid();
        let spec = CouplingSpec::additive_default(g);
        let z = Field::zeros(g);
        let a = noise_increment(&spec, NoiseWhich::Fast, 0.1, &mut RngStream::new(3, 9), &z).unwrap();
        let b = noise_increment(&spec, NoiseWhich::Fast, 0.1, &mut RngStream::new(3, 9), &z).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn increment_energy_matches_trace() {
        // E ||dW||^2 = dt * sum_k (a / k^2)^2 since the e_k are L2-orthonormal.
        let g = grid();
        let spec = CouplingSpec::additive_default(g);
        let dt = 0.02;
        let trace: f64 = (1..=8).map(|k| (1.0 / (k * k) as f64).powi(2)).sum();
        let expected = dt * trace;
        let mut rng = RngStream::new(4, 0);
        let z = Field::zeros(g);
        let samples = 100_000;
        let vals: Vec<f64> = (0..samples)
            .map(|_| {
                let inc = noise_increment(&spec, NoiseWhich::Fast, dt, &mut rng, &z).unwrap();
                norm(&inc, NormKind::L2).unwrap().powi(2)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / samples as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
        let se = (var / samples as f64).sqrt();
        assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected} (se {se})");
    }

    #[test]
    fn per_mode_variance_chi_square() {
        // Project 10^4 increments on each mode; sum of squares / (dt q_k^2)
        // is chi-square with 10^4 dof. 99% two-sided band via the normal
        // approximation: N +- 2.576 sqrt(2N).
        let g = grid();
        let spec = CouplingSpec::additive_default(g);
        let dt = 0.5;
        let samples = 10_000usize;
        let mut rng = RngStream::new(5, 0);
        let z = Field::zeros(g);
        let modes: Vec<Field> = (1..=8).map(|k| g.sine_mode(k)).collect();
        let mut ss = [0.0f64; 8];
        for _ in 0..samples {
            let inc = noise_increment(&spec, NoiseWhich::Fast, dt, &mut rng, &z).unwrap();
            for (k, e) in modes.iter().enumerate() {
                ss[k] += inc.inner(e).unwrap().powi(2);
            }
        }
        let n = samples as f64;
        let band = 2.576 * (2.0 * n).sqrt();
        for (k, s) in ss.iter().enumerate() {
            let q = 1.0 / ((k + 1) * (k + 1)) as f64;
            let chi = s / (dt * q * q);
            assert!((chi - n).abs() <= band, "mode {}: {chi}", k + 1);
        }
    }

    #[test]
    fn rejects_bad_noise() {
        let g = Grid1D::new(4).unwrap();
        let bad = NoiseSpec::additive(1.0, 5);
        assert!(CouplingSpec::new(Field::zeros(g), 0.0, 1.0, bad, NoiseSpec::additive(1.0, 2)).is_err());
        let neg = NoiseSpec::additive(-1.0, 2);
        assert!(CouplingSpec::new(Field::zeros(g), 0.0, 1.0, NoiseSpec::additive(1.0, 2), neg).is_err());
    }
}
