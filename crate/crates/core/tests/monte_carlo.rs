use rand::Rng;

use dualpulse_core::gate::{gate_error, GateScenario, Propagation};
use dualpulse_core::physics::{PhysicsParams, Species, ATOMIC_MASS_UNIT, BOLTZMANN};
use dualpulse_core::scans::{
    sample_axial_velocity, scan_decay, scan_temperature, scan_velocity, RngSpec, VelocityMode,
};
use dualpulse_core::waveform::{PulseWaveform, UnitsMode};

fn scenario() -> GateScenario {
    GateScenario::new(
        PulseWaveform::paper(UnitsMode::TwoPiMegahertz),
        PhysicsParams::default(),
    )
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
}

#[test]
fn thermal_width_for_rubidium() {
    let m: f64 = 86.909 * 1.660539e-27;
    let sigma = (1.380649e-23 * 5e-6 / m).sqrt();
    assert!((sigma - 0.02187).abs() < 5e-6, "{sigma}");

    let mass = Species::Rb.mass_u().unwrap() * ATOMIC_MASS_UNIT;
    let n = 100_000;
    let mut rng = RngSpec::new(11).rng();
    let draws: Vec<f64> = (0..n)
        .map(|_| sample_axial_velocity(5e-6, mass, &mut rng).unwrap())
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let expected = (BOLTZMANN * 5e-6 / mass).sqrt();
    assert!(mean.abs() < 4.0 * expected / (n as f64).sqrt(), "{mean}");
    assert!((var.sqrt() / expected - 1.0).abs() < 0.01);
}

#[test]
fn zero_temperature_draws_nothing() {
    let mut rng = RngSpec::new(3).rng();
    let before = rng.clone().gen::<u64>();
    assert_eq!(sample_axial_velocity(0.0, 1e-25, &mut rng).unwrap(), 0.0);
    assert_eq!(rng.gen::<u64>(), before);
}

#[test]
fn standard_error_shrinks_as_inverse_root_n() {
    let base = scenario();
    let small = scan_temperature(&base, &[5e-6], 250, RngSpec::new(21)).unwrap();
    let large = scan_temperature(&base, &[5e-6], 1000, RngSpec::new(21)).unwrap();
    let ratio = small.rows[0].std_error / large.rows[0].std_error;
    assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn scans_identical_across_thread_counts() {
    let base = scenario();
    let temps = [1e-6, 4e-6];
    let gammas = [0.0, 3000.0];
    let run = |threads| {
        pool(threads).install(|| {
            let t = scan_temperature(&base, &temps, 24, RngSpec::new(5)).unwrap();
            let d = scan_decay(&base, &gammas, 2e-6, 24, RngSpec::new(5)).unwrap();
            (t.to_csv(), d.to_csv())
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}

#[test]
fn zero_temperature_row_is_rest_error() {
    let base = scenario();
    let eps0 = gate_error(&base).unwrap().error;
    let table = scan_temperature(&base, &[0.0], 50, RngSpec::new(1)).unwrap();
    assert_eq!(table.rows[0].mean_error, eps0);
    assert_eq!(table.rows[0].std_error, 0.0);
}

#[test]
fn velocity_scans_even_and_co_above_counter() {
    let base = scenario();
    let per_kvt = 1.0 / (base.physics.wave_number() * base.waveform.duration());
    let vs: Vec<f64> = [-0.3, -0.1, 0.0, 0.1, 0.3]
        .iter()
        .map(|x| x * per_kvt)
        .collect();
    let counter = scan_velocity(&base, &vs, VelocityMode::BothAtoms).unwrap();
    let co = scan_velocity(
        &base.clone().with_propagation(Propagation::CoPropagating),
        &vs,
        VelocityMode::BothAtoms,
    )
    .unwrap();
    let e = counter.errors();
    assert!((e[0] - e[4]).abs() < 1e-8 && (e[1] - e[3]).abs() < 1e-8);
    assert!(e[1] > e[2] && e[0] > e[1]);
    for (c, k) in co.errors().iter().zip(&e) {
        assert!(c >= k, "co {c:e} counter {k:e}");
    }
    let single = scan_velocity(&base, &vs[3..], VelocityMode::ControlOnly).unwrap();
    assert!(single.errors()[1] > single.errors()[0]);
}

#[test]
fn decay_grows_error() {
    let base = scenario();
    let table = scan_decay(&base, &[0.0, 2500.0, 5000.0], 0.0, 10, RngSpec::new(2)).unwrap();
    let fit = table.fit.unwrap();
    assert!(fit.slope > 0.0 && fit.r_squared > 0.99);
}
