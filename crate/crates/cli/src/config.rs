//! Flat `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment, lists are comma separated.
//! Every key is optional; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use slowfast_core::{
    CouplingSpec, FastKind, FastOperatorSpec, Field, Grid1D, ModelSpec, NoiseSpec, SlowKind, SlowOperatorSpec,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    Fixed(f64),
    /// `delta = c * eps^a`.
    Power {
        c: f64,
        a: f64,
    },
}

impl DeltaRule {
    pub fn delta(&self, epsilon: f64) -> f64 {
        match *self {
            DeltaRule::Fixed(d) => d,
            DeltaRule::Power { c, a } => c * epsilon.powf(a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbarSource {
    /// Closed form when the fast part is linear with additive noise,
    /// Monte Carlo estimator otherwise.
    Auto,
    Oracle,
    Estimator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialShape {
    Zero,
    Sine,
    Bump,
}

impl InitialShape {
    pub fn field(&self, grid: Grid1D, amplitude: f64) -> Field {
        use std::f64::consts::PI;
        match self {
            InitialShape::Zero => Field::zeros(grid),
            InitialShape::Sine => Field::from_fn(grid, |s| amplitude * (PI * s).sin()),
            InitialShape::Bump => Field::from_fn(grid, |s| amplitude * ((PI * s).sin() + 0.5 * (3.0 * PI * s).sin())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_interior: usize,
    pub slow: SlowKind,
    pub fast: FastKind,
    pub f0: f64,
    pub c_fx: f64,
    pub c_fy: f64,
    pub g1: NoiseSpec,
    pub g2: NoiseSpec,
    pub x0: InitialShape,
    pub x0_amplitude: f64,
    pub y0: InitialShape,
    pub y0_amplitude: f64,
    pub epsilon_grid: Vec<f64>,
    pub delta_rule: DeltaRule,
    pub replicas: usize,
    pub horizon: f64,
    pub dt_macro: f64,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub fbar: FbarSource,
    pub condition_samples: usize,
    /// Block lengths of the increment and deviation suites, as `2^-k * T`.
    pub delta_exponents: Vec<u32>,
    /// Block length exponent of the deviation uniformity check.
    pub uniformity_exponent: u32,
    pub fbar_replicas: usize,
    pub fbar_t_burn: Option<f64>,
    pub fbar_t_avg: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_interior: 64,
            slow: SlowKind::Burgers { viscosity: 0.5 },
            fast: FastKind::LinearInX { c_b: 1.0 },
            f0: 0.0,
            c_fx: 0.0,
            c_fy: 1.0,
            g1: NoiseSpec::additive(0.5, 8),
            g2: NoiseSpec::additive(1.0, 8),
            x0: InitialShape::Bump,
            x0_amplitude: 1.0,
            y0: InitialShape::Zero,
            y0_amplitude: 0.0,
            epsilon_grid: vec![0.1, 0.05, 0.02, 0.01],
            delta_rule: DeltaRule::Power { c: 1.0, a: 2.0 / 3.0 },
            replicas: 100,
            horizon: 1.0,
            dt_macro: 1.0 / 512.0,
            master_seed: 20240611,
            output_dir: PathBuf::from("out"),
            fbar: FbarSource::Auto,
            condition_samples: 500,
            delta_exponents: vec![3, 4, 5, 6, 7],
            uniformity_exponent: 3,
            fbar_replicas: 8,
            fbar_t_burn: None,
            fbar_t_avg: None,
        }
    }
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("{key} = {value}: {why}"))
}

fn real(key: &str, value: &str) -> Result<f64, CliError> {
    let v: f64 = value.parse().map_err(|_| bad(key, value, "expected a number"))?;
    if !v.is_finite() {
        return Err(bad(key, value, "must be finite"));
    }
    Ok(v)
}

fn integer<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad(key, value, "expected a nonnegative integer"))
}

fn list<T>(key: &str, value: &str, item: impl Fn(&str, &str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| item(key, s)).collect()
}

fn shape(key: &str, value: &str) -> Result<InitialShape, CliError> {
    match value {
        "zero" => Ok(InitialShape::Zero),
        "sine" => Ok(InitialShape::Sine),
        "bump" => Ok(InitialShape::Bump),
        _ => Err(bad(key, value, "expected zero, sine or bump")),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
        }
        Self::from_entries(&entries)
    }

    fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let get = |k: &str| entries.get(k).map(String::as_str);

        let viscosity = get("viscosity").map(|v| real("viscosity", v)).transpose()?.unwrap_or(0.5);
        let slow_p = get("slow_p").map(|v| real("slow_p", v)).transpose()?.unwrap_or(3.0);
        let slow_c = get("slow_c").map(|v| real("slow_c", v)).transpose()?.unwrap_or(1.0);
        cfg.slow = match get("slow").unwrap_or("burgers") {
            "burgers" => SlowKind::Burgers { viscosity },
            "porous_medium" => SlowKind::PorousMedium { p: slow_p, c: slow_c },
            "p_laplace" => SlowKind::PLaplace { p: slow_p },
            other => return Err(bad("slow", other, "expected burgers, porous_medium or p_laplace")),
        };
        let c_b = get("c_b").map(|v| real("c_b", v)).transpose()?.unwrap_or(1.0);
        let b = get("b").map(|v| real("b", v)).transpose()?.unwrap_or(1.0);
        cfg.fast = match get("fast").unwrap_or("linear") {
            "linear" => FastKind::LinearInX { c_b },
            "smooth_bounded" => FastKind::SmoothBounded { c_b, b },
            other => return Err(bad("fast", other, "expected linear or smooth_bounded")),
        };

        for (key, value) in entries {
            let (k, v) = (key.as_str(), value.as_str());
            match k {
                "slow" | "fast" | "viscosity" | "slow_p" | "slow_c" | "c_b" | "b" => {}
                "n_interior" => cfg.n_interior = integer(k, v)?,
                "f0" => cfg.f0 = real(k, v)?,
                "c_fx" => cfg.c_fx = real(k, v)?,
                "c_fy" => cfg.c_fy = real(k, v)?,
                "g1_amplitude" => cfg.g1.amplitude = real(k, v)?,
                "g1_modes" => cfg.g1.modes = integer(k, v)?,
                "g1_multiplicative" => cfg.g1.multiplicative = real(k, v)?,
                "g2_amplitude" => cfg.g2.amplitude = real(k, v)?,
                "g2_modes" => cfg.g2.modes = integer(k, v)?,
                "g2_multiplicative" => cfg.g2.multiplicative = real(k, v)?,
                "x0" => cfg.x0 = shape(k, v)?,
                "x0_amplitude" => cfg.x0_amplitude = real(k, v)?,
                "y0" => cfg.y0 = shape(k, v)?,
                "y0_amplitude" => cfg.y0_amplitude = real(k, v)?,
                "epsilon_grid" => cfg.epsilon_grid = list(k, v, real)?,
                "delta_rule" => {
                    cfg.delta_rule = match v {
                        "power" => DeltaRule::Power { c: 1.0, a: 2.0 / 3.0 },
                        "fixed" => DeltaRule::Fixed(0.125),
                        _ => return Err(bad(k, v, "expected power or fixed")),
                    }
                }
                "delta_c" | "delta_a" | "delta" => {}
                "replicas" => cfg.replicas = integer(k, v)?,
                "T" => cfg.horizon = real(k, v)?,
                "dt_macro" => cfg.dt_macro = real(k, v)?,
                "master_seed" => cfg.master_seed = integer(k, v)?,
                "output_dir" => cfg.output_dir = PathBuf::from(v),
                "fbar" => {
                    cfg.fbar = match v {
                        "auto" => FbarSource::Auto,
                        "oracle" => FbarSource::Oracle,
                        "estimator" => FbarSource::Estimator,
                        _ => return Err(bad(k, v, "expected auto, oracle or estimator")),
                    }
                }
                "condition_samples" => cfg.condition_samples = integer(k, v)?,
                "delta_exponents" => cfg.delta_exponents = list(k, v, integer)?,
                "uniformity_exponent" => cfg.uniformity_exponent = integer(k, v)?,
                "fbar_replicas" => cfg.fbar_replicas = integer(k, v)?,
                "fbar_t_burn" => cfg.fbar_t_burn = Some(real(k, v)?),
                "fbar_t_avg" => cfg.fbar_t_avg = Some(real(k, v)?),
                _ => return Err(CliError::Config(format!("unknown key {k}"))),
            }
        }
        match &mut cfg.delta_rule {
            DeltaRule::Power { c, a } => {
                if let Some(v) = get("delta_c") {
                    *c = real("delta_c", v)?;
                }
                if let Some(v) = get("delta_a") {
                    *a = real("delta_a", v)?;
                }
            }
            DeltaRule::Fixed(d) => {
                if let Some(v) = get("delta") {
                    *d = real("delta", v)?;
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.epsilon_grid.is_empty() {
            return fail("epsilon_grid is empty");
        }
        if self.epsilon_grid.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return fail("epsilon_grid entries must lie in (0, 1]");
        }
        if self.epsilon_grid.windows(2).any(|w| w[1] >= w[0]) {
            return fail("epsilon_grid must be strictly decreasing");
        }
        if self.replicas == 0 || self.fbar_replicas == 0 {
            return fail("replicas must be positive");
        }
        if !(self.horizon > 0.0 && self.dt_macro > 0.0) {
            return fail("T and dt_macro must be positive");
        }
        let steps = (self.horizon / self.dt_macro).round();
        if (steps * self.dt_macro - self.horizon).abs() > 1e-9 * self.horizon {
            return fail("T must be an integer multiple of dt_macro");
        }
        if self.delta_exponents.is_empty() {
            return fail("delta_exponents is empty");
        }
        Grid1D::new(self.n_interior).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Ok(Grid1D::new(self.n_interior)?)
    }

    pub fn slow_spec(&self) -> Result<SlowOperatorSpec, CliError> {
        Ok(SlowOperatorSpec::new(self.slow)?)
    }

    pub fn fast_spec(&self) -> Result<FastOperatorSpec, CliError> {
        Ok(FastOperatorSpec::new(self.fast)?)
    }

    pub fn coupling(&self) -> Result<CouplingSpec, CliError> {
        let grid = self.grid()?;
        Ok(CouplingSpec::new(Field::constant(grid, self.f0), self.c_fx, self.c_fy, self.g1, self.g2)?)
    }

    /// The model at `epsilon`; a nonpositive dissipativity margin is a
    /// configuration error.
    pub fn model(&self, epsilon: f64) -> Result<ModelSpec, CliError> {
        let grid = self.grid()?;
        let model = ModelSpec::new(
            self.slow_spec()?,
            self.fast_spec()?,
            self.coupling()?,
            epsilon,
            self.x0.field(grid, self.x0_amplitude),
            self.y0.field(grid, self.y0_amplitude),
        )?;
        Ok(model)
    }

    /// Block lengths `2^-k * T` of the scaling suites, largest first.
    pub fn delta_grid(&self) -> Vec<f64> {
        let mut exps = self.delta_exponents.clone();
        exps.sort_unstable();
        exps.iter().map(|&k| self.horizon / f64::powi(2.0, k as i32)).collect()
    }
}
