use qths::sector::*;
use qths::SectorParams;
use std::f64::consts::PI;

#[test]
fn random_points_stay_in_range() {
    let p = SectorParams::new(3, 1.0, 0.5, PI / 3.0, 1.0).unwrap();
    let pts = random_spectral_points(&p, 2000, 20, (1e-3, 1e3), 9);
    for q in &pts {
        assert!(in_sector(q.lambda, &p));
        assert!(q.lambda.norm() >= p.c0 * 2f64.powi(-20) * (1.0 - 1e-12));
        assert_eq!(q.xi.len(), 2);
        assert!((1e-3 * (1.0 - 1e-12)..=1e3 * (1.0 + 1e-12)).contains(&q.a_norm()));
    }
    assert_eq!(pts, random_spectral_points(&p, 2000, 20, (1e-3, 1e3), 9));
    assert_ne!(pts[0], random_spectral_points(&p, 1, 20, (1e-3, 1e3), 10)[0]);
}

#[test]
fn calibrated_c0_for_reference_sets() {
    for (a, beta, eps, expect) in [(1.0, 0.5, PI / 3.0, 1.0), (1.0, 2f64.sqrt(), PI / 3.0, 0.5), (0.2, 2.0, 1.2, 0.1), (1.0, 1.0, PI / 3.0, 0.5)] {
        let probe = calibration_probe_grid(2, a, beta, eps, &GridSpec::default()).unwrap();
        let cal = calibrate_c0(2, a, beta, eps, &probe).unwrap();
        assert_eq!(cal.c0, expect, "(a, β, ε) = ({a}, {beta}, {eps})");
        assert!(cal.margin > 0.0);
    }
}

#[test]
fn regions_follow_thresholds() {
    let p = SectorParams::new(2, 1.0, 1.0, PI / 3.0, 0.5).unwrap();
    let th = Thresholds::default();
    assert_eq!(classify(0.1, 1e-3, &p, &th), Region::LowA);
    assert_eq!(classify(0.1, 1.0, &p, &th), Region::Middle);
    assert_eq!(classify(0.1, 100.0, &p, &th), Region::HighA);
}

#[test]
fn scan_grid_reaches_the_bottom_of_the_sweep() {
    let p = SectorParams::new(2, 1.0, 1.0, PI / 3.0, 0.5).unwrap();
    let spec = GridSpec::default();
    let g = build_scan_grid(&p, &spec).unwrap();
    let smallest = g.points.iter().map(|q| q.lambda.norm()).fold(f64::INFINITY, f64::min);
    assert!((smallest / (p.c0 * 2f64.powi(-20)) - 1.0).abs() < 1e-9);
    assert!(g.points.iter().all(|q| in_sector(q.lambda, &p)));
    for r in [Region::LowA, Region::Middle, Region::HighA] {
        assert!(g.count(r) > 0, "{r:?}");
    }
}

#[test]
fn params_reject_bad_values_and_unknown_keys() {
    assert!(SectorParams::new(2, 1.0, 0.0, PI / 3.0, 0.5).is_err());
    assert!(SectorParams::new(4, 1.0, 1.0, PI / 3.0, 0.5).is_err());
    assert!(SectorParams::new(2, -1.0, 1.0, PI / 3.0, 0.5).is_err());
    assert!(SectorParams::new(2, 1.0, 1.0, PI / 3.0, 0.0).is_err());
    let ok: SectorParams = toml::from_str("n = 2\na = 1.0\nbeta = 1.0\nepsilon = 1.0\nc0 = 0.5").unwrap();
    assert_eq!(ok.n, 2);
    assert!(toml::from_str::<SectorParams>("n = 2\na = 1.0\nbeta = 1.0\nepsilon = 1.0\nc0 = 0.5\nextra = 1").is_err());
}
