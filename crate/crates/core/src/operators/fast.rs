use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::grid::{smallest_eigenvalue, Field, Grid1D};
use crate::operators::coupling::CouplingSpec;

/// The x- and y-dependent reaction term `B2(x, y)` added to the fast
/// Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FastKind {
    /// `B2(x, y) = c_b x`.
    LinearInX { c_b: f64 },
    /// `B2(x, y) = c_b x + b sin(y)`, Lipschitz in `y` with constant `b`.
    SmoothBounded { c_b: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastOperatorSpec {
    kind: FastKind,
}

impl FastOperatorSpec {
    pub fn new(kind: FastKind) -> Result<Self> {
        let ok = match kind {
            FastKind::LinearInX { c_b } => c_b.is_finite(),
            FastKind::SmoothBounded { c_b, b } => c_b.is_finite() && b >= 0.0 && b.is_finite(),
        };
        if !ok {
            return Err(CoreError::InvalidParameter(format!("bad fast operator {kind:?}")));
        }
        Ok(Self { kind })
    }

    pub fn kind(&self) -> FastKind {
        self.kind
    }

    pub fn c_b(&self) -> f64 {
        match self.kind {
            FastKind::LinearInX { c_b } | FastKind::SmoothBounded { c_b, .. } => c_b,
        }
    }

    pub fn lipschitz_y(&self) -> f64 {
        match self.kind {
            FastKind::LinearInX { .. } => 0.0,
            FastKind::SmoothBounded { b, .. } => b,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, FastKind::LinearInX { .. })
    }

    /// Adds `scale * B2(x, y)` into `out`.
    pub(crate) fn add_b2(&self, x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
        match self.kind {
            FastKind::LinearInX { c_b } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += scale * c_b * xi;
                }
            }
            FastKind::SmoothBounded { c_b, b } => {
                for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
                    *o += scale * (c_b * xi + b * yi.sin());
                }
            }
        }
    }
}

/// `-L y + B2(x, y)`, without the `1/eps` time-scale factor.
pub fn fast_drift(spec: &FastOperatorSpec, x: &Field, y: &Field) -> Result<Field> {
    x.grid().check_same(&y.grid())?;
    let mut out = y.neg_laplacian().scaled(-1.0);
    spec.add_b2(x.values(), y.values(), 1.0, out.values_mut());
    Ok(out)
}

/// `2 lambda_1^h - 2 L_{B2} - L_{G2}^2`; positive means the frozen fast
/// dynamics contract at that rate.
pub fn dissipativity_margin(spec: &FastOperatorSpec, coupling: &CouplingSpec, grid: &Grid1D) -> f64 {
    let l_g2 = coupling.lipschitz_g2();
    2.0 * smallest_eigenvalue(grid) - 2.0 * spec.lipschitz_y() - l_g2 * l_g2
}
