use super::*;
use approx::assert_relative_eq;
use proptest::prelude::*;

fn dev() -> CtfDevice {
    CtfDevice::default()
}

#[test]
fn zero_bias_zero_charge_has_no_field() {
    let f = solve_stack_fields(&StackGeometry::default(), 0.0, 0.0);
    assert_eq!(f.e_tox, 0.0);
    assert_eq!(f.e_box, 0.0);
}

#[test]
fn uncharged_stack_is_a_capacitive_divider() {
    // Series capacitor: the same displacement D threads every layer, so
    // v_g = D/eps0 * sum(d_i/eps_i).
    let sum = 4e-9 / 3.9 + 6e-9 / 7.5 + 12e-9 / 9.0;
    let d = 12.5 * EPS0 / sum;
    let f = solve_stack_fields(&StackGeometry::default(), 12.5, 0.0);
    assert_relative_eq!(f.e_tox, d / (EPS0 * 3.9), max_relative = 1e-13);
    assert_relative_eq!(f.e_box, d / (EPS0 * 9.0), max_relative = 1e-13);
    assert_relative_eq!(f.e_tox, 1.014_61e9, max_relative = 1e-5);
}

#[test]
fn stored_electrons_shift_field_from_tunnel_to_blocking_oxide() {
    let g = StackGeometry::default();
    let neutral = solve_stack_fields(&g, 12.5, 0.0);
    let charged = solve_stack_fields(&g, 12.5, -2e-3);
    assert!(charged.e_tox < neutral.e_tox);
    assert!(charged.e_box > neutral.e_box);
}

#[test]
fn fn_current_vanishes_at_zero_field() {
    assert_eq!(fn_current_density(0.0, 1e-6, 2e10), 0.0);
}

#[test]
fn fn_current_more_than_quadruples_when_field_doubles() {
    for e in [1e8, 5e8, 1e9, 3e9] {
        let j1 = fn_current_density(e, 1e-6, 2e10);
        let j2 = fn_current_density(2.0 * e, 1e-6, 2e10);
        assert!(j2 > 4.0 * j1, "e = {e}");
    }
}

#[test]
fn elastance_matches_threshold_per_charge() {
    let d = dev();
    // One volt of V_T shift per 5.11 mC/m² for the default stack.
    assert_relative_eq!(d.charge_per_volt(), 5.11e-3, max_relative = 2e-3);
    let q = d.charge_of_v_t(-0.8);
    assert_relative_eq!(d.v_t_of_charge(q), -0.8, max_relative = 1e-14);
}

#[test]
fn zero_width_pulse_is_identity() {
    let d = dev();
    let s = d.state_at(-0.8).unwrap();
    assert_eq!(d.apply_pulse(&s, 12.5, 0.0).unwrap(), s);
    assert_eq!(d.vt_trajectory(&s, &PulseSpec::new(12.5, 1e-3, 0)).unwrap(), vec![-0.8]);
}

#[test]
fn negative_width_is_rejected() {
    let d = dev();
    let s = d.state_at(-0.8).unwrap();
    assert!(matches!(d.apply_pulse(&s, 12.5, -1.0), Err(Error::InvalidParameter { .. })));
}

#[test]
fn state_outside_window_is_rejected() {
    assert!(matches!(dev().state_at(0.2), Err(Error::OutOfWindow { .. })));
}

#[test]
fn invalid_geometry_is_rejected() {
    let mut p = DeviceParams::default();
    p.geom.charge_centroid = 1.5;
    assert!(CtfDevice::new(p).is_err());
    let mut p = DeviceParams::default();
    p.fn_params.b_box = 0.0;
    assert!(CtfDevice::new(p).is_err());
}

#[test]
fn clamping_pins_v_t_to_the_window_edge() {
    let d = dev();
    let s = d.state_at(-0.31).unwrap();
    let after = d.apply_pulse(&s, 12.5, 1.0).unwrap();
    assert_eq!(after.v_t, -0.3);
    assert_relative_eq!(d.v_t_of_charge(after.q_trap), -0.3, max_relative = 1e-12);
}

#[test]
fn saturation_fixed_point_balances_the_currents() {
    let d = dev();
    let v = d.saturation_v_t(-14.5).unwrap();
    let q = d.charge_of_v_t(v);
    let (jt, jb) = d.currents(-14.5, q);
    assert_relative_eq!(jt, jb, max_relative = 1e-6);
}

#[test]
fn threshold_of_exact_line() {
    let v = extract_write_threshold(&[(10.0, 0.2), (12.0, 0.6)]).unwrap();
    assert_relative_eq!(v, 9.0, max_relative = 1e-15);
}

#[test]
fn threshold_of_flat_data_is_singular() {
    assert!(matches!(extract_write_threshold(&[(10.0, 0.3), (12.0, 0.3)]), Err(Error::SingularFit(_))));
    assert!(matches!(extract_write_threshold(&[(10.0, 0.3), (10.0, 0.5)]), Err(Error::SingularFit(_))));
    assert!(matches!(extract_write_threshold(&[(10.0, 0.3)]), Err(Error::SingularFit(_))));
}

#[test]
fn threshold_above_the_sweep_is_rejected() {
    // Decreasing range: the line crosses zero above the sampled voltages.
    let r = extract_write_threshold(&[(10.0, 0.6), (12.0, 0.2)]);
    assert!(matches!(r, Err(Error::NonPhysicalIntercept { .. })), "{r:?}");
}

#[test]
fn erase_side_threshold_is_negative() {
    let v = extract_write_threshold(&[(-14.0, 0.6), (-12.0, 0.2)]).unwrap();
    assert_relative_eq!(v, -11.0, max_relative = 1e-14);
}

#[test]
fn conductance_endpoints_and_midpoint() {
    let w = Window::default();
    let map = ConductanceMap::new(2e-6, w).unwrap();
    assert_eq!(conductance(&map, -0.3).unwrap().g, 0.0);
    let top = conductance(&map, -1.3).unwrap();
    assert_eq!(top.g_norm, 1.0);
    assert_relative_eq!(top.g, 2e-6 * w.range(), max_relative = 1e-15);
    assert_relative_eq!(conductance(&map, -0.8).unwrap().g_norm, 0.5, max_relative = 1e-15);
    assert!(matches!(conductance(&map, -1.4), Err(Error::OutOfWindow { .. })));
    assert!(ConductanceMap::new(0.0, w).is_err());
}

#[test]
fn uniform_staircase_levels() {
    let w = Window::default();
    let traj: Vec<f64> = (0..=1000).map(|i| -1.3 + i as f64 * 1e-3).collect();
    let l = levels_and_learning_rate(&traj, w).unwrap();
    assert_eq!(l.n_levels, 1000);
    assert_relative_eq!(l.rate, 1e-3, max_relative = 1e-9);
}

#[test]
fn trajectory_that_stalls_has_no_level_count() {
    let w = Window::default();
    let traj: Vec<f64> = (0..=10).map(|i| -1.3 + i as f64 * 1e-3).collect();
    assert!(matches!(levels_and_learning_rate(&traj, w), Err(Error::IncompleteTrajectory(_))));
    assert!(matches!(levels_and_learning_rate(&[-0.8, -0.7], w), Err(Error::IncompleteTrajectory(_))));
}

#[test]
fn electron_count_of_sixteen() {
    // (200 nm)² · 2e12 cm⁻² V⁻¹ · 20 mV
    let s = electron_statistics(200e-9, 20e-3, 2e12).unwrap();
    assert_eq!(s.n, 16);
    assert_eq!(s.cv, 0.25);
}

#[test]
fn electron_count_at_hundred_nanometres() {
    // (100 nm)² = 1e-10 cm², times 2e12 cm⁻² for a 1 V window.
    let s = electron_statistics(100e-9, 1.0, 2e12).unwrap();
    assert_eq!(s.n, 200);
}

#[test]
fn sub_single_electron_is_an_error() {
    assert!(matches!(electron_statistics(10e-9, 1e-3, 2e12), Err(Error::SubSingleElectron { .. })));
    assert!(electron_statistics(0.0, 1e-3, 2e12).is_err());
}

#[test]
fn zero_noise_leaves_state_untouched() {
    let d = dev();
    let s = d.state_at(-0.8).unwrap();
    let mut rng = crate::seed::stream(1, "t", 0);
    assert_eq!(inject_vt_noise(&d, &s, 0.0, &mut rng).unwrap(), s);
    assert!(inject_vt_noise(&d, &s, -0.1, &mut rng).is_err());
}

#[test]
fn noise_spread_matches_requested_sigma() {
    let d = dev();
    let s = d.state_at(-0.8).unwrap();
    let mut rng = crate::seed::stream(11, "noise", 0);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| inject_vt_noise(&d, &s, 1e-3, &mut rng).unwrap().v_t - s.v_t).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((sd / 1e-3 - 1.0).abs() < 0.05, "sd = {sd}");
}

#[test]
fn noise_keeps_state_consistent_and_in_window() {
    let d = dev();
    let s = d.state_at(-1.299).unwrap();
    let mut rng = crate::seed::stream(3, "noise", 0);
    for _ in 0..1000 {
        let t = inject_vt_noise(&d, &s, 9e-3, &mut rng).unwrap();
        assert!(d.window().contains(t.v_t));
        assert_relative_eq!(d.v_t_of_charge(t.q_trap), t.v_t, max_relative = 1e-12);
    }
}

proptest! {
    #[test]
    fn layer_voltages_sum_to_gate_voltage(v_g in -20.0f64..20.0, q in -0.02f64..0.02, c in 0.0f64..=1.0) {
        let g = StackGeometry { charge_centroid: c, ..StackGeometry::default() };
        let f = solve_stack_fields(&g, v_g, q);
        // Displacement above and below the sheet, recovered from the oxide fields.
        let d_above = f.e_box * EPS0 * g.eps_box;
        let d_below = f.e_tox * EPS0 * g.eps_tox;
        prop_assert!((d_below - d_above - q).abs() <= 1e-12 * (q.abs() + d_above.abs()) + 1e-18);
        let v = f.e_tox * g.d_tox
            + d_below / (EPS0 * g.eps_ctl) * c * g.d_ctl
            + d_above / (EPS0 * g.eps_ctl) * (1.0 - c) * g.d_ctl
            + f.e_box * g.d_box;
        prop_assert!((v - v_g).abs() <= 1e-9 * (1.0 + v_g.abs() + q.abs() * 200.0), "{} vs {}", v, v_g);
    }

    #[test]
    fn fn_current_is_odd_and_monotone(e in 1e6f64..1e10, k in 1.0001f64..3.0, a in 1e-20f64..1e3, b in 1e8f64..1e11) {
        let j = fn_current_density(e, a, b);
        prop_assert_eq!(fn_current_density(-e, a, b), -j);
        prop_assert!(j >= 0.0);
        let j2 = fn_current_density(k * e, a, b);
        prop_assert!(j2 > j || (j == 0.0 && j2 == 0.0));
    }

    #[test]
    fn v_t_is_affine_in_charge(q1 in -0.02f64..0.02, q2 in -0.02f64..0.02) {
        let d = dev();
        let slope = (d.v_t_of_charge(q2) - d.v_t_of_charge(q1)) / (q2 - q1);
        prop_assume!((q2 - q1).abs() > 1e-6);
        prop_assert!((slope * d.charge_per_volt() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn g_norm_has_slope_minus_one_over_range(v in -1.3f64..=-0.3) {
        let w = Window::default();
        let map = ConductanceMap::new(1.0, w).unwrap();
        let g = conductance(&map, v).unwrap().g_norm;
        prop_assert!((g - (w.v_t_max - v) / w.range()).abs() <= 1e-15);
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn exact_lines_recover_their_intercept(x0 in 5.0f64..12.0, slope in 0.05f64..2.0, n in 2usize..8, dx in 0.1f64..1.0) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let v = x0 + 0.5 + i as f64 * dx;
            (v, slope * (v - x0))
        }).collect();
        let got = extract_write_threshold(&pts).unwrap();
        prop_assert!((got - x0).abs() <= 64.0 * f64::EPSILON * x0, "{} vs {}", got, x0);
    }

    #[test]
    fn program_and_erase_move_v_t_in_their_own_direction(v_t in -1.3f64..-0.3, v_g in 10.5f64..12.5, t_p in 1e-5f64..2e-3) {
        let d = dev();
        let s = d.state_at(v_t).unwrap();
        let up = d.apply_pulse(&s, v_g, t_p).unwrap();
        prop_assert!(up.v_t > s.v_t || up.v_t == s.window().v_t_max);
        // Erase only lowers V_T while the state sits above the saturation level of that voltage.
        let v_e = -v_g - 2.0;
        prop_assume!(v_t > d.saturation_v_t(v_e).unwrap());
        let down = d.apply_pulse(&s, v_e, 10.0 * t_p).unwrap();
        prop_assert!(down.v_t < s.v_t || down.v_t == s.window().v_t_min);
    }

    #[test]
    fn trajectories_are_bitwise_reproducible(v_g in prop::sample::select(vec![12.5, -14.5, 11.0]), n in 1usize..40) {
        let d = dev();
        let start = if v_g > 0.0 { -1.3 } else { -0.3 };
        let p = PulseSpec::new(v_g, 1e-3, n);
        let a = d.vt_trajectory(&d.state_at(start).unwrap(), &p).unwrap();
        let b = d.vt_trajectory(&d.state_at(start).unwrap(), &p).unwrap();
        prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
}
