use std::f64::consts::TAU;

use num_complex::Complex;
use proptest::prelude::*;

use slsim_core::config::LatticeConfig;
use slsim_core::dynamics::{absorption_spectrum, SteadyStateSolver};
use slsim_core::lattice::{build_floquet_matrix, quasienergy_bands, BlochPoint, BrillouinZone};
use slsim_core::topology::{
    chern_bessel_default, chern_dp_counting, chern_fhs, chern_small_f, fhs_chern_from_states, find_dirac_points,
};
use slsim_core::EffectiveModel;

type C64 = Complex<f64>;

fn cfg(omega: f64, f: f64, phi: [f64; 3]) -> LatticeConfig {
    LatticeConfig::new(omega, f, 80.0, phi).unwrap()
}

fn phase() -> impl Strategy<Value = f64> {
    0.0..TAU
}

fn phases() -> impl Strategy<Value = [f64; 3]> {
    [phase(), phase(), phase()]
}

fn point() -> impl Strategy<Value = BlochPoint> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y)| BlochPoint::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn floquet_matrix_hermitian(omega in 2.0..30.0f64, f in 0.0..5.0f64, phi in phases(), r in point()) {
        let fm = build_floquet_matrix(&cfg(omega, f, phi), r);
        let scale = fm.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(fm.hermiticity_defect() <= 1e-12 * scale);
    }

    #[test]
    fn common_phase_shift_preserves_quasienergies(
        omega in 2.0..30.0f64, f in 0.0..4.0f64, phi in phases(), shift in phase(), r in point()
    ) {
        let a = quasienergy_bands(&cfg(omega, f, phi), r);
        let b = quasienergy_bands(&cfg(omega, f, phi.map(|p| p + shift)), r);
        for k in 0..2 {
            prop_assert!((a.energies[k] - b.energies[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn reciprocal_translation_preserves_quasienergies(
        omega in 2.0..30.0f64, f in 0.0..4.0f64, phi in phases(), r in point(), m in -2i32..=2, n in -2i32..=2
    ) {
        let c = cfg(omega, f, phi);
        let zone = BrillouinZone::new(&c.geometry);
        let shifted = r + zone.a1 * m as f64 + zone.a2 * n as f64;
        let a = quasienergy_bands(&c, r);
        let b = quasienergy_bands(&c, shifted);
        for k in 0..2 {
            prop_assert!((a.energies[k] - b.energies[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn n_max_converged_beyond_f_plus_6(omega in 2.0..30.0f64, f in 0.0..4.0f64, phi in phases(), r in point()) {
        let c = cfg(omega, f, phi);
        let n = f.ceil() as usize + 6;
        let a = quasienergy_bands(&c.clone().with_n_max(n), r);
        let b = quasienergy_bands(&c.with_n_max(n + 2), r);
        for k in 0..2 {
            prop_assert!((a.energies[k] - b.energies[k]).abs() < 1e-6 * omega);
        }
    }

    #[test]
    fn mirror_exchange_flips_mass(omega in 2.0..30.0f64, f in 0.0..4.0f64, phi in phases(), r in point()) {
        let c = cfg(omega, f, phi);
        let swapped = cfg(omega, f, [phi[0], phi[2], phi[1]]);
        let zone = BrillouinZone::new(&c.geometry);
        let z = EffectiveModel::new(&c).h_vector(r).z;
        let model = EffectiveModel::new(&swapped);
        let mirrored = model.h_vector(zone.mirror(r)).z;
        let inverted = model.h_vector(-zone.mirror(r)).z;
        prop_assert!((z - mirrored).abs() < 1e-9 * omega);
        prop_assert!((z + inverted).abs() < 1e-9 * omega);
    }

    #[test]
    fn fhs_invariant_under_state_phases(
        omega in 5.0..30.0f64, f in 0.3..3.0f64, phi in phases(), seed in any::<u64>()
    ) {
        let c = cfg(omega, f, phi);
        let model = EffectiveModel::new(&c);
        let grid = 30;
        let states: Vec<Vec<C64>> = (0..grid * grid)
            .map(|k| {
                let h = model.h_periodic_frac((k / grid) as f64 / grid as f64, (k % grid) as f64 / grid as f64);
                h.lower_state().to_vec()
            })
            .collect();
        let mut x = seed;
        let dressed: Vec<Vec<C64>> = states
            .iter()
            .map(|s| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let theta = (x >> 11) as f64 / (1u64 << 53) as f64 * TAU;
                s.iter().map(|z| z * C64::from_polar(1.0, theta)).collect()
            })
            .collect();
        let o = model.zone().orientation();
        let a = fhs_chern_from_states(&states, grid, o).round() as i64;
        let b = fhs_chern_from_states(&dressed, grid, o).round() as i64;
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn chern_antisymmetric_under_exchange(omega in 5.0..30.0f64, f in 0.2..4.0f64, phi in phases()) {
        let a = chern_fhs(&cfg(omega, f, phi), 60);
        let b = chern_fhs(&cfg(omega, f, [phi[0], phi[2], phi[1]]), 60);
        if let (Ok(a), Ok(b)) = (a, b) {
            if a.reliable && b.reliable {
                prop_assert_eq!(a.value, -b.value);
            }
        }
    }

    #[test]
    fn small_f_sign_matches_fhs(omega in 5.0..30.0f64, f in 0.3..1.2f64, phi in phases()) {
        let p = ((phi[0] - phi[1]) / 2.0).sin() * ((phi[1] - phi[2]) / 2.0).sin() * ((phi[2] - phi[0]) / 2.0).sin();
        prop_assume!(p.abs() > 0.05);
        let r = chern_fhs(&cfg(omega, f, phi), 60).unwrap();
        prop_assert!(r.reliable);
        prop_assert_eq!(r.value, chern_small_f(phi) as i32);
    }

    #[test]
    fn methods_agree_when_reliable(omega in 5.0..30.0f64, f in 0.2..4.0f64, phi in phases()) {
        let c = cfg(omega, f, phi);
        let (Ok(fhs), Ok(dp)) = (chern_fhs(&c, 90), chern_dp_counting(&c)) else { return Ok(()) };
        prop_assume!(fhs.reliable && dp.reliable);
        prop_assert_eq!(fhs.value, dp.value);
        // the analytic sign is the mass at K, meaningful only when K and K' are Dirac points
        let zone = BrillouinZone::new(&c.geometry);
        let dps = find_dirac_points(&c).unwrap();
        let at = |k: BlochPoint| dps.points.iter().any(|p| zone.min_image_distance(p.position, k) < 1e-6);
        let analytic = chern_bessel_default(phi, f).unwrap() as i32;
        if analytic != 0 && at(zone.k_point()) && at(zone.k_prime_point()) {
            prop_assert_eq!(fhs.value.signum(), analytic);
        }
    }

    #[test]
    fn total_chirality_vanishes(omega in 5.0..30.0f64, f in 0.2..4.0f64, phi in phases()) {
        let s = find_dirac_points(&cfg(omega, f, phi)).unwrap();
        prop_assert_eq!(s.total_chirality(), 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn absorption_is_passive(omega in 5.0..30.0f64, f in 0.0..3.5f64, phi in phases(), v in -1.0..1.0f64) {
        let c = cfg(omega, f, phi).with_n_shells(4);
        let grid: Vec<f64> = (0..21).map(|k| -60.0 + 6.0 * k as f64).collect();
        for a in absorption_spectrum(&c, &grid, v).unwrap() {
            prop_assert!(a >= -1e-9);
        }
    }

    #[test]
    fn response_is_linear_in_drive(
        omega in 5.0..30.0f64, f in 0.0..3.5f64, phi in phases(), dp in -20.0..20.0f64, re in -3.0..3.0f64, im in -3.0..3.0f64
    ) {
        prop_assume!(re.hypot(im) > 0.1);
        let c = cfg(omega, f, phi).with_n_shells(4);
        let s = SteadyStateSolver::new(&c).unwrap();
        let lambda = C64::new(re, im);
        let a = s.solve_with_drive(&c, dp, 0.0, C64::new(1.0, 0.0)).unwrap();
        let b = s.solve_with_drive(&c, dp, 0.0, lambda).unwrap();
        prop_assert!(a.residual < 1e-9 && b.residual < 1e-9);
        for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
            prop_assert!((x * lambda - y).norm() <= 1e-9 * (1.0 + y.norm()));
        }
        if let (Some(ea), Some(eb)) = (a.eta, b.eta) {
            prop_assert!((ea - eb).abs() < 1e-9);
        }
    }

    #[test]
    fn eta_antisymmetric_under_exchange(omega in 5.0..30.0f64, f in 0.2..3.5f64, phi in phases()) {
        let c = cfg(omega, f, phi).with_n_shells(5);
        let s = SteadyStateSolver::new(&c).unwrap();
        let a = s.solve(&c, 0.0, 0.0).unwrap().eta;
        let swapped = c.clone().with_phi([phi[0], phi[2], phi[1]]);
        let b = s.solve(&swapped, 0.0, 0.0).unwrap().eta;
        if let (Some(a), Some(b)) = (a, b) {
            prop_assert!((a + b).abs() < 1e-6);
        }
    }

    #[test]
    fn static_lattice_has_no_sidebands(omega in 5.0..30.0f64, phi in phases(), dp in -20.0..20.0f64) {
        let c = cfg(omega, 0.0, phi).with_n_shells(4);
        let r = SteadyStateSolver::new(&c).unwrap().solve(&c, dp, 0.0).unwrap();
        let n_max = r.n_max as i32;
        for site in 0..r.amplitudes.len() / (2 * r.n_max + 1) {
            for m in -n_max..=n_max {
                if m != 0 {
                    prop_assert!(r.amplitude(site, m).norm() < 1e-12);
                }
            }
        }
    }
}
