use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::grid::{norm, Field, NormKind};
use crate::tridiag::apply_neg_laplacian;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowKind {
    /// `A(u) = Laplacian(Psi(u))` with `Psi(s) = c s |s|^{p-2}`.
    PorousMedium { p: f64, c: f64 },
    /// `A(u) = div(|grad u|^{p-2} grad u)`.
    PLaplace { p: f64 },
    /// `A(u) = nu Laplacian(u) + u u_x`.
    Burgers { viscosity: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowOperatorSpec {
    kind: SlowKind,
}

impl SlowOperatorSpec {
    pub fn new(kind: SlowKind) -> Result<Self> {
        let bad = |msg: &str| Err(CoreError::InvalidParameter(format!("{msg}: {kind:?}")));
        match kind {
            SlowKind::PorousMedium { p, c } => {
                if !(p >= 2.0) || !(c > 0.0) {
                    return bad("porous medium needs p >= 2 and c > 0");
                }
            }
            SlowKind::PLaplace { p } => {
                if !(p >= 2.0) {
                    return bad("p-Laplace needs p >= 2");
                }
            }
            SlowKind::Burgers { viscosity } => {
                if !(viscosity > 0.0) {
                    return bad("Burgers needs positive viscosity");
                }
            }
        }
        Ok(Self { kind })
    }

    pub fn kind(&self) -> SlowKind {
        self.kind
    }

    /// Pivot space `H1` of the slow Gelfand triple.
    pub fn state_norm(&self) -> NormKind {
        match self.kind {
            SlowKind::PorousMedium { .. } => NormKind::HMinus1,
            _ => NormKind::L2,
        }
    }

    /// Coercivity exponent `alpha`.
    pub fn alpha(&self) -> f64 {
        match self.kind {
            SlowKind::PorousMedium { p, .. } | SlowKind::PLaplace { p } => p,
            SlowKind::Burgers { .. } => 2.0,
        }
    }

    /// Growth exponent `beta` in the local monotonicity and growth bounds.
    pub fn beta(&self) -> f64 {
        match self.kind {
            SlowKind::Burgers { .. } => 2.0,
            _ => 0.0,
        }
    }

    /// Norm of the reflexive space `V1`.
    pub fn v_norm(&self, u: &Field) -> Result<f64> {
        match self.kind {
            SlowKind::PorousMedium { p, .. } => norm(u, NormKind::Lp(p)),
            SlowKind::PLaplace { p } => Ok(gradient_lp_norm(u, p)),
            SlowKind::Burgers { .. } => norm(u, NormKind::H10),
        }
    }

    pub fn is_globally_monotone(&self) -> bool {
        !matches!(self.kind, SlowKind::Burgers { .. })
    }

    pub(crate) fn psi(&self, s: f64) -> f64 {
        match self.kind {
            SlowKind::PorousMedium { p, c } => c * s * s.abs().powf(p - 2.0),
            _ => s,
        }
    }

    pub(crate) fn psi_prime(&self, s: f64) -> f64 {
        match self.kind {
            SlowKind::PorousMedium { p, c } => c * (p - 1.0) * s.abs().powf(p - 2.0),
            _ => 1.0,
        }
    }

    /// Tridiagonal Jacobian `(sub, diag, sup)` of the implicit part of the
    /// drift at `u`. For Burgers this is the viscous part only.
    pub(crate) fn implicit_jacobian(&self, u: &Field) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = u.values().len();
        let h = u.grid().h();
        let inv_h2 = 1.0 / (h * h);
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        match self.kind {
            SlowKind::PorousMedium { .. } => {
                let d: Vec<f64> = u.values().iter().map(|&s| self.psi_prime(s)).collect();
                for i in 0..n {
                    diag[i] = -2.0 * d[i] * inv_h2;
                    if i > 0 {
                        sub[i] = d[i - 1] * inv_h2;
                    }
                    if i + 1 < n {
                        sup[i] = d[i + 1] * inv_h2;
                    }
                }
            }
            SlowKind::PLaplace { p } => {
                let g = u.face_gradient();
                let d: Vec<f64> = g.iter().map(|gj| (p - 1.0) * gj.abs().powf(p - 2.0)).collect();
                for i in 0..n {
                    diag[i] = -(d[i] + d[i + 1]) * inv_h2;
                    sub[i] = d[i] * inv_h2;
                    sup[i] = d[i + 1] * inv_h2;
                }
            }
            SlowKind::Burgers { viscosity } => {
                for i in 0..n {
                    diag[i] = -2.0 * viscosity * inv_h2;
                    sub[i] = viscosity * inv_h2;
                    sup[i] = viscosity * inv_h2;
                }
            }
        }
        (sub, diag, sup)
    }

    /// Part of the drift treated implicitly by the slow step.
    pub(crate) fn implicit_drift(&self, u: &Field) -> Field {
        match self.kind {
            SlowKind::Burgers { viscosity } => u.neg_laplacian().scaled(-viscosity),
            _ => slow_drift(self, u),
        }
    }

    /// Part of the drift treated explicitly (Burgers convection, else zero).
    pub(crate) fn explicit_drift(&self, u: &Field) -> Option<Field> {
        match self.kind {
            SlowKind::Burgers { .. } => Some(convection(u)),
            _ => None,
        }
    }
}

/// `(h * sum_faces |grad u|^p)^{1/p}`, the discrete `W^{1,p}_0` norm.
pub fn gradient_lp_norm(u: &Field, p: f64) -> f64 {
    let h = u.grid().h();
    (h * u.face_gradient().iter().map(|g| g.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Face fluxes `|g|^{p-2} g` of the p-Laplacian.
pub(crate) fn p_laplace_flux(u: &Field, p: f64) -> Vec<f64> {
    u.face_gradient().iter().map(|g| g * g.abs().powf(p - 2.0)).collect()
}

/// Skew-symmetric central discretization of `u u_x`:
/// `N(u)_i = [ (u_{i+1}^2 - u_{i-1}^2) + u_i (u_{i+1} - u_{i-1}) ] / (6h)`,
/// which is `(2/3) d(u^2/2) + (1/3) u du` with the central difference `d`.
/// The blend is conservative and satisfies `<N(u), u> = 0` exactly, which
/// the pure divergence form does not.
pub(crate) fn convection(u: &Field) -> Field {
    let v = u.values();
    let n = v.len();
    let inv_6h = 1.0 / (6.0 * u.grid().h());
    let out = (0..n)
        .map(|i| {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            ((right * right - left * left) + v[i] * (right - left)) * inv_6h
        })
        .collect();
    Field::from_raw(u.grid(), out)
}

pub fn slow_drift(spec: &SlowOperatorSpec, u: &Field) -> Field {
    let grid = u.grid();
    let n = grid.n_interior();
    match spec.kind {
        SlowKind::PorousMedium { .. } => {
            let psi: Vec<f64> = u.values().iter().map(|&s| spec.psi(s)).collect();
            let mut out = vec![0.0; n];
            apply_neg_laplacian(grid.h(), &psi, &mut out);
            out.iter_mut().for_each(|x| *x = -*x);
            Field::from_raw(grid, out)
        }
        SlowKind::PLaplace { p } => {
            let flux = p_laplace_flux(u, p);
            let inv_h = 1.0 / grid.h();
            Field::from_raw(grid, (0..n).map(|i| (flux[i + 1] - flux[i]) * inv_h).collect())
        }
        SlowKind::Burgers { viscosity } => {
            let mut out = u.neg_laplacian().scaled(-viscosity);
            let conv = convection(u);
            out.values_mut().iter_mut().zip(conv.values()).for_each(|(a, b)| *a += b);
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;

    fn random_field(grid: Grid1D, rng: &mut RngStream, amp: f64) -> Field {
        Field::from_raw(grid, (0..grid.n_interior()).map(|_| amp * rng.gaussian()).collect())
    }

    fn catalog() -> [SlowOperatorSpec; 4] {
        [
            SlowOperatorSpec::new(SlowKind::PorousMedium { p: 3.0, c: 0.5 }).unwrap(),
            SlowOperatorSpec::new(SlowKind::PLaplace { p: 2.0 }).unwrap(),
            SlowOperatorSpec::new(SlowKind::PLaplace { p: 4.0 }).unwrap(),
            SlowOperatorSpec::new(SlowKind::Burgers { viscosity: 0.7 }).unwrap(),
        ]
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SlowOperatorSpec::new(SlowKind::PorousMedium { p: 1.5, c: 1.0 }).is_err());
        assert!(SlowOperatorSpec::new(SlowKind::PorousMedium { p: 2.0, c: 0.0 }).is_err());
        assert!(SlowOperatorSpec::new(SlowKind::PLaplace { p: f64::NAN }).is_err());
        assert!(SlowOperatorSpec::new(SlowKind::Burgers { viscosity: -1.0 }).is_err());
    }

    #[test]
    fn state_norm_forced_by_kind() {
        let [pm, pl, _, bu] = catalog();
        assert_eq!(pm.state_norm(), NormKind::HMinus1);
        assert_eq!(pl.state_norm(), NormKind::L2);
        assert_eq!(bu.state_norm(), NormKind::L2);
    }

    #[test]
    fn drifts_vanish_at_zero() {
        let g = Grid1D::new(9).unwrap();
        for spec in catalog() {
            assert_eq!(slow_drift(&spec, &Field::zeros(g)), Field::zeros(g));
        }
    }

    #[test]
    fn p_laplace_two_is_laplacian() {
        let g = Grid1D::new(11).unwrap();
        let mut rng = RngStream::new(3, 0);
        let u = random_field(g, &mut rng, 1.0);
        let spec = SlowOperatorSpec::new(SlowKind::PLaplace { p: 2.0 }).unwrap();
        let a = slow_drift(&spec, &u);
        let lu = u.neg_laplacian();
        for (x, y) in a.values().iter().zip(lu.values()) {
            assert_relative_eq!(*x, -*y, epsilon = 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn burgers_three_node_stencil() {
        // h = 1/4, u = (1, 0, -1): L u = 16 * (2, 0, -2); convection
        // [(u_{i+1}^2 - u_{i-1}^2) + u_i (u_{i+1} - u_{i-1})] / (6h) = (0, 0, 0).
        let g = Grid1D::new(3).unwrap();
        let u = Field::from_values(g, alloc::vec![1.0, 0.0, -1.0]).unwrap();
        let spec = SlowOperatorSpec::new(SlowKind::Burgers { viscosity: 1.0 }).unwrap();
        assert_eq!(slow_drift(&spec, &u).values(), &[-32.0, 0.0, 32.0]);

        // u = (1, 2, 0): L u = 16 * (0, 3, -2); convection/(1/(6h)=2/3):
        // i0: (4 - 0) + 1*(2 - 0) = 6; i1: (0 - 1) + 2*(0 - 1) = -3; i2: (0 - 4) + 0 = -4
        let u = Field::from_values(g, alloc::vec![1.0, 2.0, 0.0]).unwrap();
        let expected = [0.0 + 6.0 * 2.0 / 3.0, -48.0 - 3.0 * 2.0 / 3.0, 32.0 - 4.0 * 2.0 / 3.0];
        for (a, b) in slow_drift(&spec, &u).values().iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn convection_is_skew() {
        let g = Grid1D::new(40).unwrap();
        let mut rng = RngStream::new(9, 1);
        for _ in 0..100 {
            let v = random_field(g, &mut rng, 5.0);
            let n = convection(&v);
            let ip = n.inner(&v).unwrap();
            let scale = n.inner(&n).unwrap().sqrt() * v.inner(&v).unwrap().sqrt();
            assert!(ip.abs() <= 1e-10 * scale.max(1.0), "{ip}");
            // conservative up to the boundary flux
            let w = v.values();
            let flux = (w[w.len() - 1].powi(2) - w[0].powi(2)) / (6.0 * g.h());
            assert_relative_eq!(n.values().iter().sum::<f64>(), flux, epsilon = 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn burgers_energy_identity() {
        let g = Grid1D::new(30).unwrap();
        let spec = SlowOperatorSpec::new(SlowKind::Burgers { viscosity: 0.3 }).unwrap();
        let mut rng = RngStream::new(10, 1);
        for _ in 0..100 {
            let v = random_field(g, &mut rng, 3.0);
            let lhs = slow_drift(&spec, &v).inner(&v).unwrap();
            let h1 = norm(&v, NormKind::H10).unwrap();
            let rhs = -0.3 * h1 * h1;
            assert!(lhs <= rhs + 1e-10 * h1 * h1, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn psi_monotone_and_growth() {
        let spec = SlowOperatorSpec::new(SlowKind::PorousMedium { p: 3.5, c: 2.0 }).unwrap();
        let mut rng = RngStream::new(11, 0);
        for _ in 0..1_000_000 {
            let s = 10.0 * (rng.uniform() - 0.5);
            let t = 10.0 * (rng.uniform() - 0.5);
            assert!((s - t) * (spec.psi(s) - spec.psi(t)) >= 0.0);
            assert_relative_eq!(spec.psi(s).abs(), 2.0 * s.abs().powf(2.5), max_relative = 1e-14);
        }
    }

    #[test]
    fn p_laplace_monotone() {
        let g = Grid1D::new(25).unwrap();
        let mut rng = RngStream::new(12, 0);
        for p in [2.0, 3.0, 4.0] {
            let spec = SlowOperatorSpec::new(SlowKind::PLaplace { p }).unwrap();
            for _ in 0..200 {
                let u = random_field(g, &mut rng, 1.0);
                let v = random_field(g, &mut rng, 1.0);
                let d = slow_drift(&spec, &u).sub(&slow_drift(&spec, &v)).unwrap();
                assert!(d.inner(&u.sub(&v).unwrap()).unwrap() <= 1e-9);
            }
        }
    }

    #[test]
    fn implicit_jacobian_matches_finite_differences() {
        let g = Grid1D::new(8).unwrap();
        let mut rng = RngStream::new(13, 0);
        for spec in catalog() {
            let u = random_field(g, &mut rng, 1.0);
            let (sub, diag, sup) = spec.implicit_jacobian(&u);
            let base = spec.implicit_drift(&u);
            let eps = 1e-6;
            for j in 0..8 {
                let mut up = u.clone();
                up.values_mut()[j] += eps;
                let fd = spec.implicit_drift(&up).sub(&base).unwrap().scaled(1.0 / eps);
                for i in 0..8 {
                    let exact = if i == j {
                        diag[i]
                    } else if j + 1 == i {
                        sub[i]
                    } else if i + 1 == j {
                        sup[i]
                    } else {
                        0.0
                    };
                    let got = fd.values()[i];
                    assert!((got - exact).abs() <= 1e-4 * exact.abs().max(1.0), "{spec:?} {i},{j}: {got} vs {exact}");
                }
            }
        }
    }
}
