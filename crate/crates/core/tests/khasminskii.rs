use slowfast_core::{
    build_auxiliary, deviation_statistic, increment_statistic, mean_and_stderr, simulate_coupled, BlockSchedule,
    CouplingSpec, FastKind, FastOperatorSpec, Field, Grid1D, ModelSpec, NoisePath, NoiseSpec, NormKind, RngStream,
    SchemeParams, SlowKind, SlowOperatorSpec,
};

const T: f64 = 0.5;
const DT: f64 = 1.0 / 128.0;

fn model(g: Grid1D, fast: FastKind, coupling: CouplingSpec, x0: Field) -> ModelSpec {
    ModelSpec::new(
        SlowOperatorSpec::new(SlowKind::Burgers { viscosity: 0.5 }).unwrap(),
        FastOperatorSpec::new(fast).unwrap(),
        coupling,
        0.05,
        x0,
        Field::zeros(g),
    )
    .unwrap()
}

fn heat_model(g: Grid1D) -> ModelSpec {
    let x0 = Field::from_fn(g, |s| (std::f64::consts::PI * s).sin());
    model(g, FastKind::LinearInX { c_b: 2.0 }, CouplingSpec::additive_default(g), x0)
}

fn run(m: &ModelSpec, seed: u64) -> (Vec<Field>, Vec<Field>, NoisePath) {
    let p = SchemeParams::for_model(m, DT);
    let r = simulate_coupled(m, T, &p, &mut RngStream::new(seed, 0), &mut RngStream::new(seed, 1), true).unwrap();
    (r.x, r.y, r.noise.unwrap())
}

#[test]
fn frozen_constant_slow_path_reproduces_fast_path() {
    let g = Grid1D::new(16).unwrap();
    let mut c = CouplingSpec::additive_default(g);
    c.c_fy = 0.0;
    c.g1 = NoiseSpec::additive(0.0, 1);
    let m = model(g, FastKind::SmoothBounded { c_b: 1.0, b: 1.0 }, c, Field::zeros(g));
    let (x, y, noise) = run(&m, 1);
    assert!(x.iter().all(|f| *f == Field::zeros(g)));
    let s = BlockSchedule::new(T, T, DT).unwrap();
    assert_eq!(build_auxiliary(&x, &m, &s, &noise).unwrap(), y);
}

#[test]
fn x_independent_fast_drift_reproduces_fast_path() {
    let g = Grid1D::new(16).unwrap();
    let m = model(g, FastKind::LinearInX { c_b: 0.0 }, CouplingSpec::additive_default(g), Field::constant(g, 1.0));
    let (x, y, noise) = run(&m, 2);
    let s = BlockSchedule::new(T, T, DT).unwrap();
    assert_eq!(build_auxiliary(&x, &m, &s, &noise).unwrap(), y);
}

#[test]
fn single_step_blocks_follow_the_slow_path() {
    let g = Grid1D::new(16).unwrap();
    let m = heat_model(g);
    let (x, y, noise) = run(&m, 3);
    let s = BlockSchedule::new(DT, T, DT).unwrap();
    let aux = build_auxiliary(&x, &m, &s, &noise).unwrap();
    assert_eq!(aux, y);
    assert_eq!(deviation_statistic(&y, &aux, DT).unwrap(), 0.0);
}

#[test]
fn tampered_noise_changes_auxiliary() {
    let g = Grid1D::new(16).unwrap();
    let m = heat_model(g);
    let (x, _, noise) = run(&m, 4);
    let s = BlockSchedule::new(T / 4.0, T, DT).unwrap();
    let clean = build_auxiliary(&x, &m, &s, &noise).unwrap();
    let mut bytes = noise.to_bytes();
    let last = bytes.len() - 3;
    bytes[last] ^= 0x10;
    let tampered = NoisePath::from_bytes(&bytes).unwrap();
    assert_ne!(build_auxiliary(&x, &m, &s, &tampered).unwrap(), clean);
}

#[test]
fn deviation_grows_with_block_length() {
    let g = Grid1D::new(16).unwrap();
    let m = heat_model(g);
    let deltas = [DT * 2.0, DT * 8.0, DT * 32.0];
    let mut means = vec![0.0; deltas.len()];
    let reps = 16;
    for r in 0..reps {
        let (x, y, noise) = run(&m, 100 + r);
        for (k, &d) in deltas.iter().enumerate() {
            let s = BlockSchedule::new(d, T, DT).unwrap();
            let aux = build_auxiliary(&x, &m, &s, &noise).unwrap();
            let v = deviation_statistic(&y, &aux, DT).unwrap();
            assert!(v > 0.0);
            means[k] += v / reps as f64;
        }
    }
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
}

#[test]
fn increment_statistic_agrees_with_running_stats() {
    let g = Grid1D::new(16).unwrap();
    let m = heat_model(g);
    let p = SchemeParams::for_model(&m, DT);
    let r = simulate_coupled(&m, T, &p, &mut RngStream::new(5, 0), &mut RngStream::new(5, 1), false).unwrap();
    for &(delta, running) in &r.stats.increment_integral {
        let s = BlockSchedule::new(delta, T, DT).unwrap();
        let direct = increment_statistic(&r.x, &s, NormKind::L2).unwrap();
        assert!((direct - running).abs() <= 1e-12 * running.max(1e-300), "{delta}: {direct} vs {running}");
    }
    let flat = vec![Field::constant(g, 0.5); r.x.len()];
    let s = BlockSchedule::new(DT * 4.0, T, DT).unwrap();
    assert_eq!(increment_statistic(&flat, &s, NormKind::L2).unwrap(), 0.0);
}

#[test]
fn reduction_is_order_independent() {
    let g = Grid1D::new(12).unwrap();
    let m = heat_model(g);
    let s = BlockSchedule::new(DT * 8.0, T, DT).unwrap();
    let values: Vec<f64> = (0..8)
        .map(|r| {
            let (x, y, noise) = run(&m, 200 + r);
            deviation_statistic(&y, &build_auxiliary(&x, &m, &s, &noise).unwrap(), DT).unwrap()
        })
        .collect();
    let mut shuffled = values.clone();
    shuffled.reverse();
    shuffled.swap(1, 5);
    let (a, sa) = mean_and_stderr(&values);
    let (b, sb) = mean_and_stderr(&shuffled);
    assert!((a - b).abs() <= 1e-14 * a);
    assert!((sa - sb).abs() <= 1e-12 * sa);
}

#[test]
fn misaligned_schedules_are_rejected() {
    let g = Grid1D::new(12).unwrap();
    let m = heat_model(g);
    let (x, y, noise) = run(&m, 6);
    assert!(BlockSchedule::new(DT * 1.5, T, DT).is_err());
    let other = BlockSchedule::new(DT * 2.0, 2.0 * T, DT).unwrap();
    assert!(build_auxiliary(&x, &m, &other, &noise).is_err());
    assert!(increment_statistic(&x, &other, NormKind::L2).is_err());
    assert!(deviation_statistic(&y, &y[1..], DT).is_err());
}
