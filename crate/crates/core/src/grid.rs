//! Uniform Dirichlet grid on (0,1), nodal fields and their discrete norms.
//!
//! Every norm carries the factor `h` so that values converge to the
//! continuum norms under refinement. `L` below always denotes the discrete
//! Dirichlet negative Laplacian with stencil `(-1, 2, -1) / h^2`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::tridiag::{apply_neg_laplacian, ShiftedLaplacian};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n_interior: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(n_interior: usize) -> Result<Self> {
        if n_interior < 2 {
            return Err(CoreError::InvalidParameter(format!("grid needs at least 2 interior nodes, got {n_interior}")));
        }
        Ok(Self { n_interior, h: 1.0 / (n_interior as f64 + 1.0) })
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coordinate of interior node `i` (0-based), i.e. `(i + 1) h`.
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.h
    }

    /// `lambda_k^h = (4 / h^2) sin^2(k pi h / 2)`, the k-th eigenvalue of `L`.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let s = (k as f64 * PI * self.h / 2.0).sin();
        4.0 * s * s / (self.h * self.h)
    }

    /// Largest eigenvalue of `L`.
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalue(self.n_interior)
    }

    /// L2-normalized discrete sine eigenvector `sqrt(2) sin(k pi x_i)`.
    pub fn sine_mode(&self, k: usize) -> Field {
        let values =
            (0..self.n_interior).map(|i| core::f64::consts::SQRT_2 * (k as f64 * PI * self.node(i)).sin()).collect();
        Field { grid: *self, values }
    }

    pub(crate) fn check_same(&self, other: &Grid1D) -> Result<()> {
        if self.n_interior != other.n_interior {
            return Err(CoreError::GridMismatch { left: self.n_interior, right: other.n_interior });
        }
        Ok(())
    }
}

/// Nodal values on the interior nodes; boundary values are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![0.0; grid.n_interior] }
    }

    pub fn constant(grid: Grid1D, value: f64) -> Self {
        Self { grid, values: vec![value; grid.n_interior] }
    }

    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_interior {
            return Err(CoreError::InvalidParameter(format!(
                "field has {} values, grid has {} interior nodes",
                values.len(),
                grid.n_interior
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("field construction"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the interior node coordinates.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: (0..grid.n_interior).map(|i| f(grid.node(i))).collect() }
    }

    pub(crate) fn from_raw(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_interior);
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Field::from_raw(self.grid, self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect()))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.add_scaled(-1.0, other)
    }

    /// Discrete L2 inner product `h * sum u_i v_i`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.grid.h * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Face differences `(v_{j+1} - v_j) / h`, `j = 0..=n`, boundary zeros included.
    pub fn face_gradient(&self) -> Vec<f64> {
        let n = self.values.len();
        let inv_h = 1.0 / self.grid.h;
        (0..=n)
            .map(|j| {
                let left = if j > 0 { self.values[j - 1] } else { 0.0 };
                let right = if j < n { self.values[j] } else { 0.0 };
                (right - left) * inv_h
            })
            .collect()
    }

    /// `L v`.
    pub fn neg_laplacian(&self) -> Field {
        let mut out = vec![0.0; self.values.len()];
        apply_neg_laplacian(self.grid.h, &self.values, &mut out);
        Field::from_raw(self.grid, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    H10,
    HMinus1,
    Lp(f64),
}

impl NormKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NormKind::Lp(p) if !(p >= 2.0) => Err(CoreError::InvalidExponent(p)),
            _ => Ok(()),
        }
    }
}

pub fn norm(f: &Field, kind: NormKind) -> Result<f64> {
    kind.validate()?;
    let h = f.grid.h;
    let v = &f.values;
    Ok(match kind {
        NormKind::L2 => (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt(),
        NormKind::H10 => (h * f.face_gradient().iter().map(|g| g * g).sum::<f64>()).sqrt(),
        NormKind::Lp(p) => (h * v.iter().map(|x| x.abs().powf(p)).sum::<f64>()).powf(1.0 / p),
        NormKind::HMinus1 => {
            let u = poisson_solve(f);
            // <v, L^{-1} v> >= 0 up to rounding
            (h * v.iter().zip(&u.values).map(|(a, b)| a * b).sum::<f64>()).max(0.0).sqrt()
        }
    })
}

/// `h * <a, b>` for `L2`-type state spaces, `h * <L^{-1} a, b>` for `HMinus1`.
pub fn state_inner(a: &Field, b: &Field, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::HMinus1 => poisson_solve(a).inner(b),
        _ => a.inner(b),
    }
}

/// Solves `L u = rhs` by a tridiagonal sweep.
pub fn poisson_solve(rhs: &Field) -> Field {
    let grid = rhs.grid;
    let mut u = rhs.values.clone();
    ShiftedLaplacian::new(grid.n_interior, grid.h, 0.0, 1.0).solve_in_place(&mut u);
    Field::from_raw(grid, u)
}

/// Smallest eigenvalue of `L`; tends to `pi^2` from below as `h -> 0`.
pub fn smallest_eigenvalue(grid: &Grid1D) -> f64 {
    grid.eigenvalue(1)
}
