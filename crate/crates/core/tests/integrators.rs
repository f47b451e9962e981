use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use slowfast_core::integrators::{replay_coupled, SlowStepper};
use slowfast_core::rng::channel;
use slowfast_core::{
    norm, poisson_solve, simulate_averaged, simulate_coupled, smallest_eigenvalue, step_fast_block, step_slow,
    strong_error, CoupledState, CouplingSpec, FastKind, FastOperatorSpec, Field, Grid1D, ModelSpec, NoiseSpec,
    NormKind, OuOracle, RngStream, SchemeParams, SlowKind, SlowOperatorSpec,
};

fn dense_laplacian(n: usize) -> DMatrix<f64> {
    let h = 1.0 / (n + 1) as f64;
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0 / (h * h),
        1 => -1.0 / (h * h),
        _ => 0.0,
    })
}

fn quiet_coupling(g: Grid1D) -> CouplingSpec {
    let mut c = CouplingSpec::additive_default(g);
    c.g1 = NoiseSpec::additive(0.0, 1);
    c.g2 = NoiseSpec::additive(0.0, 1);
    c
}

fn model(slow: SlowKind, fast: FastKind, coupling: CouplingSpec, eps: f64, x0: Field, y0: Field) -> ModelSpec {
    ModelSpec::new(SlowOperatorSpec::new(slow).unwrap(), FastOperatorSpec::new(fast).unwrap(), coupling, eps, x0, y0)
        .unwrap()
}

fn bump(g: Grid1D) -> Field {
    Field::from_fn(g, |s| (std::f64::consts::PI * s).sin() + 0.5 * (3.0 * std::f64::consts::PI * s).sin())
}

#[test]
fn zero_state_is_fixed() {
    let g = Grid1D::new(16).unwrap();
    let mut c = quiet_coupling(g);
    c.c_fy = 0.0;
    for slow in
        [SlowKind::PorousMedium { p: 3.0, c: 1.0 }, SlowKind::PLaplace { p: 3.0 }, SlowKind::Burgers { viscosity: 0.5 }]
    {
        let m = model(slow, FastKind::LinearInX { c_b: 1.0 }, c.clone(), 1.0, Field::zeros(g), Field::zeros(g));
        let p = SchemeParams::for_model(&m, 0.01);
        let state = CoupledState { x: Field::zeros(g), y: Field::zeros(g), t: 0.0 };
        let x1 = step_slow(&m, &state, &Field::zeros(g), &[0.0], &p).unwrap();
        assert_eq!(x1, Field::zeros(g));
    }
}

#[test]
fn laplacian_step_is_implicit_heat_step() {
    let n = 12;
    let g = Grid1D::new(n).unwrap();
    let x0 = bump(g);
    let m = model(
        SlowKind::PLaplace { p: 2.0 },
        FastKind::LinearInX { c_b: 1.0 },
        quiet_coupling(g),
        1.0,
        x0.clone(),
        Field::zeros(g),
    );
    let dt = 0.01;
    let p = SchemeParams::for_model(&m, dt);
    let state = CoupledState { x: x0.clone(), y: Field::zeros(g), t: 0.0 };
    let x1 = step_slow(&m, &state, &Field::zeros(g), &[0.0], &p).unwrap();
    let a = DMatrix::identity(n, n) + dense_laplacian(n) * dt;
    let expected = a.lu().solve(&DVector::from_column_slice(x0.values())).unwrap();
    for (u, v) in x1.values().iter().zip(expected.iter()) {
        assert_relative_eq!(*u, *v, max_relative = 1e-10, epsilon = 1e-12);
    }
}

#[test]
fn p_laplace_energy_decays_every_step() {
    let g = Grid1D::new(32).unwrap();
    let x0 = bump(g).scaled(2.0);
    let mut c = quiet_coupling(g);
    c.c_fy = 0.0;
    let m = model(SlowKind::PLaplace { p: 3.0 }, FastKind::LinearInX { c_b: 1.0 }, c, 1.0, x0.clone(), Field::zeros(g));
    let p = SchemeParams::for_model(&m, 0.005);
    let stepper = SlowStepper::new(&m, &p).unwrap();
    let mut x = x0;
    for _ in 0..100 {
        let step = stepper.step(&x, &Field::zeros(g), &[0.0]).unwrap();
        assert!(step.residual <= p.newton_tol);
        let before = norm(&x, NormKind::L2).unwrap();
        let after = norm(&step.x, NormKind::L2).unwrap();
        assert!(after <= before, "{after} > {before}");
        x = step.x;
    }
}

#[test]
fn porous_medium_newton_residual_bounded() {
    let g = Grid1D::new(32).unwrap();
    let x0 = bump(g).scaled(3.0);
    let c = CouplingSpec::additive_default(g);
    let m =
        model(SlowKind::PorousMedium { p: 4.0, c: 1.0 }, FastKind::LinearInX { c_b: 1.0 }, c, 0.1, x0, Field::zeros(g));
    let p = SchemeParams::for_model(&m, 1.0 / 256.0);
    let stepper = SlowStepper::new(&m, &p).unwrap();
    let mut rng = RngStream::new(3, 0);
    let mut x = m.x0.clone();
    for _ in 0..64 {
        let dw: Vec<f64> =
            rng.gaussian_increments(stepper.noise_width()).iter().map(|z| z * p.dt_macro.sqrt()).collect();
        let step = stepper.step(&x, &Field::constant(g, 0.1), &dw).unwrap();
        assert!(step.residual <= p.newton_tol);
        x = step.x;
    }
}

#[test]
fn fast_block_trivial_and_steady_state() {
    let g = Grid1D::new(24).unwrap();
    let x = bump(g);
    let zero = model(
        SlowKind::Burgers { viscosity: 1.0 },
        FastKind::LinearInX { c_b: 0.0 },
        quiet_coupling(g),
        0.1,
        x.clone(),
        Field::zeros(g),
    );
    let p = SchemeParams::for_model(&zero, 0.01);
    let state = CoupledState { x: x.clone(), y: Field::zeros(g), t: 0.0 };
    let block = step_fast_block(&zero, &state, &p, &mut RngStream::new(1, 1)).unwrap();
    assert_eq!(block.y_end, Field::zeros(g));

    let c_b = 1.5;
    let m = model(
        SlowKind::Burgers { viscosity: 1.0 },
        FastKind::LinearInX { c_b },
        quiet_coupling(g),
        0.1,
        x.clone(),
        Field::zeros(g),
    );
    let p = SchemeParams::for_model(&m, 0.01);
    let target = poisson_solve(&x).scaled(c_b);
    // 50 / margin units of fast time
    let fast_time_per_block = p.dt_macro / m.epsilon;
    let blocks = (50.0 / m.margin() / fast_time_per_block).ceil() as usize;
    let mut state = CoupledState { x: x.clone(), y: Field::zeros(g), t: 0.0 };
    let mut rng = RngStream::new(1, 1);
    for _ in 0..blocks {
        state.y = step_fast_block(&m, &state, &p, &mut rng).unwrap().y_end;
    }
    let err = norm(&state.y.sub(&target).unwrap(), NormKind::L2).unwrap() / norm(&target, NormKind::L2).unwrap();
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn stationary_variance_of_first_fast_mode() {
    let g = Grid1D::new(15).unwrap();
    let q = 1.0;
    let mut c = quiet_coupling(g);
    c.g2 = NoiseSpec::additive(q, 1);
    let m = model(
        SlowKind::Burgers { viscosity: 1.0 },
        FastKind::LinearInX { c_b: 0.0 },
        c,
        1.0,
        Field::zeros(g),
        Field::zeros(g),
    );
    let p = SchemeParams::for_model(&m, 1.0);
    let n_sub = p.micro_substeps(1.0);
    let tau = 1.0 / n_sub as f64;
    let l1 = smallest_eigenvalue(&g);
    // implicit Euler on a' = -l1 a + q dW has stationary variance
    // q^2 / (l1 (2 + tau l1)), which tends to q^2 / (2 l1)
    let discrete = q * q / (l1 * (2.0 + tau * l1));
    let continuum = q * q / (2.0 * l1);
    let e1 = g.sine_mode(1);
    let samples = 10_000;
    let mut rng = RngStream::new(77, 1);
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let state = CoupledState { x: Field::zeros(g), y: Field::zeros(g), t: 0.0 };
            let y = step_fast_block(&m, &state, &p, &mut rng).unwrap().y_end;
            y.inner(&e1).unwrap().powi(2)
        })
        .collect();
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    // after fast time 1 the start-up transient is e^{-2 l1} ~ 2e-9
    assert!((mean - discrete).abs() <= 3.0 * sd / n.sqrt(), "{mean} vs {discrete}");
    assert!((discrete - continuum).abs() / continuum < 0.06);
}

fn default_model(g: Grid1D, eps: f64) -> ModelSpec {
    let mut c = CouplingSpec::additive_default(g);
    c.c_fx = -0.5;
    c.f0 = Field::constant(g, 0.2);
    model(SlowKind::Burgers { viscosity: 0.5 }, FastKind::LinearInX { c_b: 1.0 }, c, eps, bump(g), Field::zeros(g))
}

#[test]
fn decoupled_runs_coincide_bitwise() {
    let g = Grid1D::new(32).unwrap();
    let mut m = default_model(g, 1.0);
    m.coupling.c_fy = 0.0;
    let p = SchemeParams::for_model(&m, 1.0 / 64.0);
    let run = simulate_coupled(
        &m,
        1.0,
        &p,
        &mut RngStream::new(5, channel::SLOW),
        &mut RngStream::new(5, channel::FAST),
        true,
    )
    .unwrap();
    let mut oracle = OuOracle::new(&m).unwrap();
    let avg = simulate_averaged(&m, &mut oracle, 1.0, &p, run.noise.as_ref().unwrap()).unwrap();
    assert_eq!(avg, run.x);
    assert!(strong_error(&run.x, &avg, NormKind::L2).unwrap() <= 1e-12);
}

#[test]
fn averaged_linear_run_matches_dense_recursion() {
    let n = 10;
    let g = Grid1D::new(n).unwrap();
    let mut c = quiet_coupling(g);
    c.c_fx = -0.3;
    c.c_fy = 0.7;
    c.f0 = Field::constant(g, 0.1);
    let c_b = 2.0;
    let m = model(SlowKind::PLaplace { p: 2.0 }, FastKind::LinearInX { c_b }, c, 0.5, bump(g), Field::zeros(g));
    let dt = 0.02;
    let p = SchemeParams::for_model(&m, dt);
    let run = simulate_coupled(&m, 0.4, &p, &mut RngStream::new(1, 0), &mut RngStream::new(1, 1), true).unwrap();
    let avg = simulate_averaged(&m, &mut OuOracle::new(&m).unwrap(), 0.4, &p, run.noise.as_ref().unwrap()).unwrap();

    let l = dense_laplacian(n);
    let l_inv = l.clone().try_inverse().unwrap();
    let lhs = (DMatrix::identity(n, n) + &l * dt).try_inverse().unwrap();
    let drift = DMatrix::identity(n, n) * -0.3 + &l_inv * (0.7 * c_b);
    let f0 = DVector::from_element(n, 0.1);
    let mut x = DVector::from_column_slice(m.x0.values());
    for (k, got) in avg.iter().enumerate() {
        if k > 0 {
            x = &lhs * (&x + (&f0 + &drift * &x) * dt);
        }
        for (a, b) in got.values().iter().zip(x.iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-10, epsilon = 1e-12);
        }
    }
}

#[test]
fn replay_reproduces_trajectories() {
    let g = Grid1D::new(24).unwrap();
    let m = default_model(g, 0.05);
    let p = SchemeParams::for_model(&m, 1.0 / 64.0);
    let run = simulate_coupled(&m, 0.5, &p, &mut RngStream::new(9, 0), &mut RngStream::new(9, 1), true).unwrap();
    let again = simulate_coupled(&m, 0.5, &p, &mut RngStream::new(9, 0), &mut RngStream::new(9, 1), false).unwrap();
    assert_eq!(run.x, again.x);
    assert_eq!(run.y, again.y);
    let noise = run.noise.as_ref().unwrap();
    let replay = replay_coupled(&m, 0.5, &p, noise).unwrap();
    assert_eq!(replay.x, run.x);
    assert_eq!(replay.y, run.y);
    let mut oracle = OuOracle::new(&m).unwrap();
    let a = simulate_averaged(&m, &mut oracle, 0.5, &p, noise).unwrap();
    let b = simulate_averaged(&m, &mut oracle, 0.5, &p, noise).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fast_paths_contract_under_synchronous_coupling() {
    let g = Grid1D::new(32).unwrap();
    for fast in [FastKind::LinearInX { c_b: 1.0 }, FastKind::SmoothBounded { c_b: 1.0, b: 2.0 }] {
        let eps = 0.01;
        let base = model(
            SlowKind::Burgers { viscosity: 0.5 },
            fast,
            CouplingSpec::additive_default(g),
            eps,
            bump(g),
            Field::zeros(g),
        );
        let mut other = base.clone();
        other.y0 = Field::from_fn(g, |s| 4.0 * s * (1.0 - s) + (5.0 * s).sin());
        let dt = 1.0 / 2048.0;
        let p = SchemeParams::for_model(&base, dt);
        let rate = base.margin() / 2.0;
        // about four e-folds of the bound
        let horizon = dt * (4.0 * eps / (rate * dt)).ceil();
        let a =
            simulate_coupled(&base, horizon, &p, &mut RngStream::new(2, 0), &mut RngStream::new(2, 1), false).unwrap();
        let b =
            simulate_coupled(&other, horizon, &p, &mut RngStream::new(2, 0), &mut RngStream::new(2, 1), false).unwrap();
        let d0 = norm(&base.y0.sub(&other.y0).unwrap(), NormKind::L2).unwrap();
        for (n, (ya, yb)) in a.y.iter().zip(&b.y).enumerate() {
            let t = n as f64 * dt;
            let d = norm(&ya.sub(yb).unwrap(), NormKind::L2).unwrap();
            let bound = (-rate * t / eps).exp() * d0 * 1.1;
            assert!(d <= bound, "{fast:?} t={t}: {d} > {bound}");
        }
    }
}

#[test]
fn increment_statistic_matches_recomputation() {
    let g = Grid1D::new(24).unwrap();
    let m = default_model(g, 0.05);
    let p = SchemeParams::for_model(&m, 1.0 / 64.0);
    let run = simulate_coupled(&m, 1.0, &p, &mut RngStream::new(4, 0), &mut RngStream::new(4, 1), false).unwrap();
    assert_eq!(run.stats.increment_integral.len(), 7);
    for &(delta, value) in &run.stats.increment_integral {
        let k = (delta / p.dt_macro).round() as usize;
        let direct: f64 = (1..run.x.len())
            .map(|n| {
                p.dt_macro * norm(&run.x[n].sub(&run.x[((n - 1) / k) * k]).unwrap(), NormKind::L2).unwrap().powi(2)
            })
            .sum();
        assert_relative_eq!(value, direct, max_relative = 1e-12);
        assert!(value >= 0.0);
    }
    let sup = run.x.iter().map(|x| norm(x, NormKind::L2).unwrap().powi(2)).fold(0.0, f64::max);
    assert_relative_eq!(run.stats.sup_norm_x_sq, sup, max_relative = 1e-12);
    assert!(run.stats.mean_norm_y_sq >= 0.0);
}

#[test]
fn model_rejects_non_dissipative_fast_part() {
    let g = Grid1D::new(16).unwrap();
    let l1 = smallest_eigenvalue(&g);
    let r = ModelSpec::new(
        SlowOperatorSpec::new(SlowKind::Burgers { viscosity: 1.0 }).unwrap(),
        FastOperatorSpec::new(FastKind::SmoothBounded { c_b: 1.0, b: l1 + 1.0 }).unwrap(),
        CouplingSpec::additive_default(g),
        0.1,
        Field::zeros(g),
        Field::zeros(g),
    );
    assert!(matches!(r, Err(slowfast_core::CoreError::NonDissipative { .. })));
}
