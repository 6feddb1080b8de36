use switchnet_core::analysis::{differential_readout, energy};
use switchnet_core::device::conductance;
use switchnet_core::harness::{run_sweep, SweepConfig};
use switchnet_core::solver::{simulate, SimOptions, Waveform};
use switchnet_core::topology::{build_grid, Edge};
use switchnet_core::{BetaShape, DeviceParams, DeviceState, GenerationSpec, NetworkTopology};

/// A single frozen, effectively ohmic device from input to ground.
fn resistor(g: f64) -> (NetworkTopology, f64) {
    let delta = 1e-6;
    let params = DeviceParams { gamma: g / delta, delta, lambda: 0.0, ..DeviceParams::default() };
    let grid = build_grid(2, 0).unwrap();
    let t = NetworkTopology {
        grid,
        edges: vec![Edge { a: 0, b: 3, params, state: DeviceState { w_prime: 1.0, on: true } }],
        input_node: 0,
        ground_node: 3,
        seed: 0,
        added_edges: 0,
    };
    let total = conductance(true, 0.0, &params).unwrap() + params.g_floor;
    (t, total)
}

fn sine_energy(t: &NetworkTopology, v: f64, duration: f64, dt: f64) -> f64 {
    let opts = SimOptions { dt, duration, ..SimOptions::default() };
    energy(&simulate(t, &Waveform::sine(v, 5.0), &opts).unwrap()).unwrap().energy_joules
}

#[test]
fn constant_drive_energy_is_exact() {
    let (t, g) = resistor(1e-3);
    let opts = SimOptions { duration: 0.5, ..SimOptions::default() };
    let e = energy(&simulate(&t, &Waveform::Constant { volts: 3.0 }, &opts).unwrap()).unwrap();
    let exact = g * 9.0 * 0.5;
    assert!((e.energy_joules - exact).abs() < 1e-9 * exact);
    assert!((e.energy_joules - e.mean_power * e.duration).abs() < 1e-9 * exact);
}

#[test]
fn sine_energy_over_whole_periods() {
    let (t, g) = resistor(1e-3);
    for v in [1.0, 2.0, 8.0] {
        let exact = g * v * v * 1.0 / 2.0;
        let e = sine_energy(&t, v, 1.0, 1e-3);
        assert!((e - exact).abs() < 0.01 * exact);
    }
}

#[test]
fn quadrature_error_is_first_order() {
    let (t, g) = resistor(1e-3);
    let v: f64 = 4.0;
    let duration = 0.23;
    let w = 2.0 * std::f64::consts::PI * 5.0;
    let exact = g * v * v * (duration / 2.0 - (2.0 * w * duration).sin() / (4.0 * w));
    let errs: Vec<f64> =
        [1e-3, 5e-4, 2.5e-4].iter().map(|&dt| (sine_energy(&t, v, duration, dt) - exact).abs()).collect();
    assert!(errs[0] > 0.0);
    assert!(errs[1] <= 0.55 * errs[0] && errs[2] <= 0.55 * errs[1], "{errs:?}");
}

#[test]
fn zero_amplitude_costs_nothing() {
    let (t, _) = resistor(1e-3);
    assert_eq!(sine_energy(&t, 0.0, 1.0, 1e-3), 0.0);
}

#[test]
fn divider_readout_matches_closed_form() {
    let p = |g: f64| DeviceParams { gamma: g / 1e-6, delta: 1e-6, lambda: 0.0, ..DeviceParams::default() };
    let on = DeviceState { w_prime: 1.0, on: true };
    // 0 -(g1)- 1 -(g2)- 3 on a 2x2 lattice, node 2 hangs off node 1.
    let (g1, g2) = (1e-3, 3e-3);
    let t = NetworkTopology {
        grid: build_grid(2, 0).unwrap(),
        edges: vec![
            Edge { a: 0, b: 1, params: p(g1), state: on },
            Edge { a: 1, b: 3, params: p(g2), state: on },
            Edge { a: 1, b: 2, params: p(g1), state: on },
        ],
        input_node: 0,
        ground_node: 3,
        seed: 0,
        added_edges: 0,
    };
    let wave = Waveform::sine(2.0, 5.0);
    let trace = simulate(&t, &wave, &SimOptions::default()).unwrap();
    let readout = differential_readout(&trace, 0, 1).unwrap();
    let (ga, gb) = (g1 + 1e-9, g2 + 1e-9);
    for (k, r) in readout.iter().enumerate() {
        let v_in = trace.applied_voltage[k];
        assert!((r - v_in * gb / (ga + gb)).abs() < 1e-9);
    }
    assert!(differential_readout(&trace, 1, 2).unwrap().iter().all(|r| r.abs() < 1e-12));
}

fn sample_networks() -> Vec<NetworkTopology> {
    let grid = build_grid(4, 1).unwrap();
    [(2.0, 5.0), (10.0, 1.0), (1.0, 10.0)]
        .iter()
        .flat_map(|&(a, b)| {
            let spec = GenerationSpec::new(BetaShape::new(a, b).unwrap(), 4);
            let grid = grid.clone();
            (0..3).map(move |s| switchnet_core::generate_network(&grid, &spec, s).unwrap())
        })
        .collect()
}

#[test]
fn generated_networks_are_passive() {
    for t in sample_networks() {
        let trace = simulate(&t, &Waveform::sine(8.0, 5.0), &SimOptions::default()).unwrap();
        for (k, (v, i)) in trace.applied_voltage.iter().zip(&trace.source_current).enumerate() {
            assert!(v * i >= -1e-12 * v.abs().max(1.0), "step {k}: {v} V, {i} A");
        }
        assert!(energy(&trace).unwrap().energy_joules >= 0.0);
        let ground = trace.interface_nodes.iter().position(|&n| n == t.ground_node).unwrap();
        assert!(trace.interface_voltages.iter().all(|row| row[ground] == 0.0));
    }
}

#[test]
fn larger_drive_switches_more() {
    let opts = SimOptions::default();
    for t in sample_networks() {
        let low = simulate(&t, &Waveform::sine(1.0, 5.0), &opts).unwrap().switching_events;
        let high = simulate(&t, &Waveform::sine(8.0, 5.0), &opts).unwrap().switching_events;
        assert!(high >= low, "{high} < {low}");
        assert!(high > 0);
    }
}

#[test]
fn traces_are_bit_identical() {
    let t = &sample_networks()[0];
    let a = simulate(t, &Waveform::sine(4.0, 5.0), &SimOptions::default()).unwrap();
    let b = simulate(t, &Waveform::sine(4.0, 5.0), &SimOptions::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

/// Denser long-wire networks should be at least as rich as sparse ones.
/// With the default device constants the two densities are within sampling
/// noise of each other and the ordering does not hold for the harness's
/// default seeds; run with `--ignored` to reproduce.
#[test]
#[ignore = "does not hold with the default device constants"]
fn density_ordering_for_long_wires() {
    for center in [true, false] {
        let mut cfg = SweepConfig {
            alphas: vec![10.0],
            betas: vec![1.0],
            xis: vec![2, 6],
            amplitudes: vec![8.0],
            trials: 30,
            ..SweepConfig::default()
        };
        cfg.settings.center = center;
        let out = run_sweep(&cfg, 0).unwrap();
        let (sparse, dense) = (&out.aggregates[0], &out.aggregates[1]);
        assert!(
            dense.entropy_mean >= sparse.entropy_mean,
            "center={center}: xi=6 {} < xi=2 {}",
            dense.entropy_mean,
            sparse.entropy_mean
        );
    }
}
