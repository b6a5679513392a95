use proptest::prelude::*;
use qths::error::QthsError;
use qths::field::{Field, FieldKind};
use qths::halfspace::extension::{extend_profile, tensor_parity};
use qths::halfspace::kernels::resolvent_even;
use qths::halfspace::*;
use qths::numerics::kernel_m;
use qths::symbols::SymbolFrame;
use qths::wholespace::TorusGrid;
use qths::{SectorParams, C64};
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn params(n: usize) -> SectorParams {
    SectorParams::new(n, 1.0, 1.0, PI / 3.0, 1.0).unwrap()
}

fn grid2(cells: usize) -> HalfSpaceGrid {
    let tg = TorusGrid::new(vec![2.0 * PI], vec![16]).unwrap();
    HalfSpaceGrid::new(tg, NormalGrid::new(16.0, cells, 4.0).unwrap(), 512).unwrap()
}

fn sampled(grid: &HalfSpaceGrid, src: SingleMode) -> HalfSpaceData {
    HalfSpaceData::sample(grid, |k, comp, xt, x| src.value(k, comp, xt, x))
}

#[test]
fn kernel_m_reference_values() {
    let g = c(0.7, 0.3);
    let x = 1.3;
    assert!((kernel_m(g, g, x) + x * (-g * x).exp()).norm() < 1e-15);
    assert_eq!(kernel_m(c(1.0, 0.0), c(2.0, 0.0), 0.0), c(0.0, 0.0));
    // (e^{−1} − e^{−2})/(1 − 2)
    assert!((kernel_m(c(1.0, 0.0), c(2.0, 0.0), 1.0).re + 0.232544157934830).abs() < 1e-12);
}

#[test]
fn kernel_identities_hold() {
    let f = SymbolFrame::new(c(0.2, 0.3), &[0.9], 1.0, 1.0);
    let a = c(f.a_norm, 0.0);
    let one = c(1.0, 0.0);
    let m1 = ExpSum::m(one, f.l1, a);
    let m2 = ExpSum::m(one, f.l2, f.l1);
    let dm1 = m1.derivative();
    let ddm2 = m2.nth_derivative(2);
    for &x in &[0.0, 0.4, 1.5, 5.0] {
        let lhs = dm1.eval(x);
        let rhs = -(-f.l1 * x).exp() - a * kernel_m(f.l1, a, x);
        assert!((lhs - rhs).norm() < 1e-6);
        let lhs = ddm2.eval(x);
        let rhs = (f.l1 + f.l2) * (-f.l2 * x).exp() + (f.z1 + a * a) * kernel_m(f.l2, f.l1, x);
        assert!((lhs - rhs).norm() < 1e-6);
        // independent check by central differences
        let h = 1e-5;
        let fd = (m1.eval(x + h) - m1.eval((x - h).abs())) / (x + h - (x - h).abs());
        if x > 0.0 {
            assert!((fd - dm1.eval(x)).norm() < 1e-6);
        }
    }
}

#[test]
fn volevich_of_zero_is_zero() {
    let g = NormalGrid::new(16.0, 64, 4.0).unwrap();
    let z = vec![c(0.0, 0.0); 65];
    let r = volevich_form(&ExpSum::exp(c(1.0, 0.0), c(1.0, 0.0)), &z, &g).unwrap();
    assert!(r.value.eval(0.3).norm() == 0.0);
}

#[test]
fn volevich_flags_slow_decay() {
    let g = NormalGrid::new(4.0, 64, 4.0).unwrap();
    let prof: Vec<C64> = g.nodes.iter().map(|&y| c((-0.1 * y).exp(), 0.0)).collect();
    let d: Vec<C64> = prof.iter().map(|v| -0.1 * v).collect();
    let r = volevich_integral(&ExpSum::exp(c(1.0, 0.0), c(1.0, 0.0)), &prof, &d, &g).unwrap();
    assert!(r.truncated);
    assert!(r.tail > 0.0);
}

#[test]
fn extension_examples() {
    let grid = grid2(64);
    let nodes = &grid.normal.nodes;
    let one: Vec<C64> = nodes.iter().map(|_| c(1.0, 0.0)).collect();
    let zero: Vec<C64> = nodes.iter().map(|_| c(0.0, 0.0)).collect();
    let ev = extend_profile(&grid, &one, &zero, Parity::Even);
    assert!(ev.iter().all(|v| (v - 1.0).norm() < 1e-14));
    let od = extend_profile(&grid, &one, &zero, Parity::Odd);
    let nz = grid.doubled_points;
    assert!((od[1] - 1.0).norm() < 1e-14 && (od[nz - 1] + 1.0).norm() < 1e-14);
    let lin: Vec<C64> = nodes.iter().map(|&x| c(x, 0.0)).collect();
    let ones = one.clone();
    let od = extend_profile(&grid, &lin, &ones, Parity::Odd);
    let dz = 2.0 * grid.normal.x_max / nz as f64;
    for k in [1, 7, nz / 2 - 1, nz / 2 + 1, nz - 1] {
        let x = if k < nz / 2 { k as f64 * dz } else { k as f64 * dz - 2.0 * grid.normal.x_max };
        assert!((od[k].re - x).abs() < 1e-9, "{k}");
    }
    assert_eq!(tensor_parity(0, 1, 2), Parity::Odd);
    assert_eq!(tensor_parity(1, 1, 2), Parity::Even);
    assert_eq!(tensor_parity(0, 1, 3), Parity::Even);
}

#[test]
fn extended_tensor_stays_symmetric_traceless() {
    let grid = grid2(64);
    let d = sampled(&grid, SingleMode::new(2, true, false));
    let e = extend_tensor(&d.g, &grid).unwrap();
    assert!(e.s0_defect() < 1e-14);
    let v = extend_velocity(&d.f, &grid).unwrap();
    let nz = grid.doubled_points;
    // normal component odd, tangential even
    for k in 1..nz / 2 {
        assert!((v.comps[1][3 * nz + k] + v.comps[1][3 * nz + nz - k]).norm() < 1e-14);
        assert!((v.comps[0][3 * nz + k] - v.comps[0][3 * nz + nz - k]).norm() < 1e-14);
    }
    assert!(extend_even(&d.f, &grid).is_ok() && extend_odd(&d.f, &grid).is_ok());
}

#[test]
fn even_resolvent_has_zero_slope() {
    let s = ExpSum::m(c(1.0, 0.0), c(0.5, 0.2), c(1.5, 0.0));
    let w = resolvent_even(c(2.0, 0.1), &s).unwrap();
    assert!(w.derivative().eval(0.0).norm() < 1e-14);
}

#[test]
fn zero_boundary_data_gives_zero() {
    let grid = grid2(64);
    let d = HalfSpaceData::zeros(&grid);
    let sol = solve_boundary(&d.h, &d.hh, c(0.3, 0.1), &params(2), &grid).unwrap();
    assert_eq!(sol.u.max_abs(), 0.0);
    assert_eq!(sol.q.max_abs(), 0.0);
    assert_eq!(sol.p.max_abs(), 0.0);
}

#[test]
fn boundary_traces_single_mode() {
    let grid = grid2(256);
    let d = sampled(&grid, SingleMode::new(2, false, true));
    let sol = solve_boundary(&d.h, &d.hh, c(0.3, 0.2), &params(2), &grid).unwrap();
    assert!(sol.diagnostics.trace_u <= 1e-6, "{:?}", sol.diagnostics);
    assert!(sol.diagnostics.trace_dq <= 1e-4, "{:?}", sol.diagnostics);
    assert!(sol.diagnostics.trace_dq_exact <= 1e-6);
    assert!(sol.diagnostics.s0_drift <= 1e-10);
}

#[test]
fn shear_trace_alone_moves_the_fluid() {
    let grid = grid2(256);
    let mut d = HalfSpaceData::zeros(&grid);
    let m1 = grid.normal.len();
    for t in 0..grid.modes() {
        let x = tangential_coords(&grid, t)[0];
        for (i, &y) in grid.normal.nodes.iter().enumerate() {
            let v = c(x.cos() * (-y * y / 4.0).exp(), 0.0);
            d.hh.comps[1][t * m1 + i] = v;
            d.hh.comps[2][t * m1 + i] = v;
        }
    }
    let sol = solve_boundary(&d.h, &d.hh, c(0.3, 0.2), &params(2), &grid).unwrap();
    assert!(sol.u.max_abs() > 1e-3);
    assert!(sol.diagnostics.trace_dq <= 1e-4);
    assert!(sol.diagnostics.trace_dq_exact <= 1e-6);
}

#[test]
fn interior_data_keeps_homogeneous_traces() {
    let grid = grid2(256);
    let d = sampled(&grid, SingleMode::new(2, true, false));
    let sol = solve_halfspace(&d, c(0.3, 0.2), &params(2), &grid).unwrap();
    let dg = sol.diagnostics;
    assert!(dg.trace_u <= 1e-6, "{dg:?}");
    assert!(dg.trace_dq_exact <= 1e-6, "{dg:?}");
    assert!(dg.u1_normal_trace <= 1e-10);
    let un: f64 = (0..grid.modes()).map(|t| sol.u.comps[1][t * grid.normal.len()].norm()).fold(0.0, f64::max);
    assert!(un < 1e-8 * sol.u.max_abs());
}

#[test]
fn interior_residual_is_second_order() {
    let params = params(2);
    let mut res = Vec::new();
    for cells in [64, 128, 256] {
        let grid = grid2(cells);
        let d = sampled(&grid, SingleMode::new(2, true, true));
        let sol = solve_halfspace(&d, c(0.3, 0.2), &params, &grid).unwrap();
        res.push(interior_residual(&sol, &d).unwrap());
    }
    for w in res.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "{res:?}");
    }
}

#[test]
fn invalid_boundary_data_is_rejected() {
    let grid = grid2(64);
    let mut d = sampled(&grid, SingleMode::new(2, false, true));
    d.h.comps[1][5] = c(1.0, 0.0);
    assert!(matches!(solve_halfspace(&d, c(0.3, 0.2), &params(2), &grid), Err(QthsError::InvalidParameter(_))));
    let mut d = sampled(&grid, SingleMode::new(2, false, true));
    d.hh.comps[0][5] += c(1.0, 0.0);
    assert!(matches!(solve_halfspace(&d, c(0.3, 0.2), &params(2), &grid), Err(QthsError::InvalidParameter(_))));
    let d = sampled(&grid, SingleMode::new(2, false, true));
    assert!(matches!(solve_halfspace(&d, c(-0.3, 0.0), &params(2), &grid), Err(QthsError::Domain(_))));
}

#[test]
fn pressure_of_zero_and_of_a_solenoidal_field() {
    let grid = grid2(128);
    let shape = grid.shape();
    let zero = Field::zeros(FieldKind::Velocity, 2, &shape);
    assert_eq!(pressure_dn_solve(&zero, &grid).unwrap().max_abs(), 0.0);
    // r = (∂₂ψ, −∂₁ψ) with ψ = cos x₁ · x² e^{−x²}: divergence free, r₂(·,0) = 0
    let m1 = grid.normal.len();
    let mut r = zero.clone();
    for t in 0..grid.modes() {
        let x1 = tangential_coords(&grid, t)[0];
        for (i, &y) in grid.normal.nodes.iter().enumerate() {
            let e = (-y * y).exp();
            r.comps[0][t * m1 + i] = c(x1.cos() * (2.0 * y - 2.0 * y * y * y) * e, 0.0);
            r.comps[1][t * m1 + i] = c(x1.sin() * y * y * e, 0.0);
        }
    }
    let p = pressure_dn_solve(&r, &grid).unwrap();
    assert!(p.max_abs() < 1e-3, "{}", p.max_abs());
}

#[test]
fn fd_oracle_zero_data() {
    let zero = |_: DataKind, _: usize, _: &[f64], _: f64| c(0.0, 0.0);
    let fd = fd_oracle_solve(&zero, c(0.3, 0.2), &params(2), &FdGrid::new(2.0 * PI, 8, 8.0, 8).unwrap()).unwrap();
    assert!(fd.u1.iter().chain(&fd.q12).all(|v| v.norm() == 0.0));
    assert!(fd_oracle_solve(&zero, c(0.3, 0.2), &params(3), &FdGrid::new(2.0 * PI, 8, 8.0, 8).unwrap()).is_err());
}

#[test]
fn fd_oracle_converges_to_the_spectral_solution() {
    let params = params(2);
    let lam = c(0.3, 0.2);
    let src = SingleMode::new(2, true, true);
    let grid = grid2(256);
    let sol = solve_halfspace(&sampled(&grid, src), lam, &params, &grid).unwrap();
    let f = |k: DataKind, comp: usize, xt: &[f64], x: f64| src.value(k, comp, xt, x);
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let fd = fd_oracle_solve(&f, lam, &params, &FdGrid::new(2.0 * PI, n, 10.0, n).unwrap()).unwrap();
            compare_with_spectral(&fd, &sol).unwrap()
        })
        .collect();
    assert!(errs[2] <= 0.05, "{errs:?}");
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn three_dimensional_boundary_solve() {
    let tg = TorusGrid::new(vec![2.0 * PI; 2], vec![8, 8]).unwrap();
    let grid = HalfSpaceGrid::new(tg, NormalGrid::new(16.0, 128, 4.0).unwrap(), 256).unwrap();
    let d = sampled(&grid, SingleMode::new(3, true, true));
    let p = SectorParams::new(3, 1.0, 0.8, PI / 3.0, 1.0).unwrap();
    let sol = solve_halfspace(&d, c(0.2, -0.3), &p, &grid).unwrap();
    assert!(sol.diagnostics.trace_u <= 1e-6, "{:?}", sol.diagnostics);
    assert!(sol.diagnostics.trace_dq_exact <= 1e-6);
    assert!(sol.diagnostics.s0_drift <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_rule_matches_differences(
        g1 in (0.2f64..3.0, -2.0f64..2.0),
        g2 in (0.2f64..3.0, -2.0f64..2.0),
        x in 0.1f64..4.0,
    ) {
        let s = ExpSum::m(c(1.0, 0.0), c(g1.0, g1.1), c(g2.0, g2.1));
        let h = 1e-5;
        let fd = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
        prop_assert!((fd - s.derivative().eval(x)).norm() < 1e-6);
    }

    #[test]
    fn even_resolvent_solves_the_ode(
        b in (0.5f64..3.0, -1.0f64..1.0),
        g in (0.2f64..3.0, -2.0f64..2.0),
        x in 0.0f64..5.0,
    ) {
        let b = c(b.0, b.1);
        let s = ExpSum::exp(c(1.0, 0.0), c(g.0, g.1));
        let w = resolvent_even(b, &s).unwrap();
        let r = b * b * w.eval(x) - w.nth_derivative(2).eval(x) - s.eval(x);
        prop_assert!(r.norm() < 1e-9 * (1.0 + w.eval(x).norm()));
    }
}
