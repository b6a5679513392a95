use qths::multiplier::*;
use qths::sector::GridSpec;
use qths::SectorParams;
use std::collections::HashSet;
use std::f64::consts::PI;

fn params() -> SectorParams {
    SectorParams::new(2, 1.0, 1.0, PI / 3.0, 0.5).unwrap()
}

fn small_spec() -> GridSpec {
    GridSpec { n_radial: 9, n_angle: 5, n_xi: 13, ..catalog_grid_spec() }
}

#[test]
fn catalog_ids_are_unique() {
    let c = catalog();
    assert!(c.len() >= 25);
    assert_eq!(c.iter().map(|cl| cl.id.as_str()).collect::<HashSet<_>>().len(), c.len());
}

#[test]
fn multi_index_counts() {
    assert_eq!(multi_indices(1, 2).len(), 3);
    assert_eq!(multi_indices(2, 2).len(), 6);
    assert_eq!(multi_indices(2, 3).len(), 10);
}

#[test]
fn order_above_three_is_rejected() {
    assert!(estimate_claims(&catalog()[..1], &params(), &small_spec(), 4).is_err());
}

#[test]
fn refinement_nests() {
    let s = small_spec();
    let r = refine(&s);
    assert_eq!((r.n_radial, r.n_angle, r.n_xi), (17, 9, 25));
    assert_eq!(r.depth, s.depth);
}

// M_{s,1} ⊂ M̃_{s,1} for s ≥ 0: the M̃ weight dominates, so its sup ratios
// cannot exceed the M ones
#[test]
fn m_class_implies_tilde_class() {
    let p = params();
    let mut claims = Vec::new();
    for cl in catalog().into_iter().filter(|c| c.spec.family == Family::M && c.spec.kind == 1 && c.spec.s >= 0.0) {
        let tilde = Claim { id: format!("{} (tilde)", cl.id), spec: ClassSpec { family: Family::MTilde, ..cl.spec }, ..cl.clone() };
        claims.push(cl);
        claims.push(tilde);
    }
    assert!(!claims.is_empty());
    let reps = estimate_claims(&claims, &p, &catalog_grid_spec(), 2).unwrap();
    for pair in reps.chunks(2) {
        assert!(pair[0].pass && pair[1].pass, "{}", pair[0].id);
        for (m, t) in pair[0].entries.iter().zip(&pair[1].entries) {
            assert!(t.sup_coarse <= m.sup_coarse * (1.0 + 1e-12), "{}: {m:?} vs {t:?}", pair[0].id);
        }
    }
}

#[test]
fn catalog_passes_in_three_dimensions() {
    let p = SectorParams::new(3, 1.0, 1.0, PI / 3.0, 0.5).unwrap();
    let claims: Vec<Claim> = catalog().into_iter().step_by(4).collect();
    let reps = estimate_claims(&claims, &p, &catalog_grid_spec(), 2).unwrap();
    let failed: Vec<&str> = reps.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert_eq!(reps[0].entries.len(), 2 * multi_indices(2, 2).len());
}
