use proptest::prelude::*;
use qths::estimates::dyadic_sequence;
use qths::lopatinski::*;
use qths::sector::{build_scan_grid, random_spectral_points, GridSpec};
use qths::symbols::SymbolFrame;
use qths::{SectorParams, C64};
use std::f64::consts::PI;

fn d_gap(lam: C64, a_norm: f64) -> f64 {
    let f = SymbolFrame::new(lam, &[a_norm], 1.0, 1.0);
    let d = lopatinski_frame(&f).unwrap().d;
    let s = d_high_a_asymptote(&f);
    (d / s - 1.0).norm()
}

#[test]
fn high_a_gap_decays_quadratically() {
    for lam in [C64::new(0.5, 0.0), C64::from_polar(1e-4, 1.7)] {
        let (g1, g2) = (d_gap(lam, 50.0), d_gap(lam, 100.0));
        assert!(g1 < 1e-3, "{g1}");
        let rate = g1 / g2;
        assert!((3.0..5.0).contains(&rate), "λ = {lam}: {g1} → {g2}");
    }
}

#[test]
fn low_a_gap_shrinks_with_a() {
    let lam = C64::from_polar(0.1, -1.0);
    let gap = |a: f64| {
        let f = SymbolFrame::new(lam, &[a], 1.0, 1.0);
        (lopatinski_frame(&f).unwrap().d / d_low_a_asymptote(&f) - 1.0).norm()
    };
    assert!(gap(1e-4) < gap(1e-3) && gap(1e-3) < gap(1e-2));
}

#[test]
fn ca_approaches_its_zero_limit() {
    let p = SectorParams::new(2, 1.0, 1.0, PI / 3.0, 0.5).unwrap();
    for a_norm in [0.1, 1.0, 10.0] {
        let rep = ca_limit_consistency(a_norm, &p, &dyadic_sequence(p.c0, 30, 0.8)).unwrap();
        assert!(rep.tail_max < 1e-3, "A = {a_norm}: {}", rep.tail_max);
        // first order in |λ| once |λ| is well below A²
        let d = &rep.deviations;
        let rate = d[29] / d[30];
        assert!((rate - 2.0).abs() < 0.05, "A = {a_norm}: {d:?}");
    }
}

#[test]
fn identity_suite_flags_tolerance() {
    let p = SectorParams::new(2, 0.2, 2.0, 1.2, 0.1).unwrap();
    let pts = random_spectral_points(&p, 500, 20, (1e-3, 1e3), 3);
    let ok = identity_suite(&pts, &p, 1e-8).unwrap();
    assert!(ok.pass);
    assert_eq!(ok.points, 500);
    let strict = identity_suite(&pts, &p, 0.0).unwrap();
    assert!(!strict.pass);
    assert!(strict.identities.iter().any(|e| e.worst.is_some()));
}

#[test]
fn lower_bounds_for_other_parameter_sets() {
    for (a, beta, eps, c0) in [(1.0, 0.5, PI / 3.0, 1.0), (1.0, 2f64.sqrt(), PI / 3.0, 0.5), (0.2, 2.0, 1.2, 0.1)] {
        let p = SectorParams::new(2, a, beta, eps, c0).unwrap();
        let spec = GridSpec { n_radial: 12, n_angle: 5, n_xi: 21, ..GridSpec::default() };
        let rep = scan_lower_bounds(&build_scan_grid(&p, &spec).unwrap(), &p).unwrap();
        assert_eq!(rep.entries.len(), BOUND_IDS.len());
        assert!(rep.pass, "(a, β) = ({a}, {beta}): {:?}", rep.entries);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn d_is_odd_in_beta(log_rho in -10.0f64..-0.5, frac in -0.99f64..0.99, log_a in -2.0f64..2.0) {
        let lam = C64::from_polar(10f64.powf(log_rho), frac * 2.0 * PI / 3.0);
        let x = 10f64.powf(log_a);
        let d = lopatinski_frame(&SymbolFrame::new(lam, &[x], 1.0, 0.9)).unwrap().d;
        let dm = lopatinski_frame(&SymbolFrame::new(lam, &[x], 1.0, -0.9)).unwrap().d;
        prop_assert!((d + dm).norm() <= 1e-12 * d.norm());
    }

    #[test]
    fn rotation_in_xi_leaves_d_unchanged(log_a in -2.0f64..2.0, angle in 0.0f64..std::f64::consts::TAU) {
        let lam = C64::from_polar(0.01, 0.5);
        let x = 10f64.powf(log_a);
        let d1 = lopatinski_frame(&SymbolFrame::new(lam, &[x, 0.0], 1.0, 0.9)).unwrap().d;
        let d2 = lopatinski_frame(&SymbolFrame::new(lam, &[x * angle.cos(), x * angle.sin()], 1.0, 0.9)).unwrap().d;
        prop_assert!((d1 - d2).norm() <= 1e-10 * d1.norm());
    }
}
