//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line; the process exits
//! non-zero when any criterion fails.

use qths::estimates::*;
use qths::halfspace::*;
use qths::lopatinski::{ca_zero_limit, d_high_a_asymptote, d_low_a_asymptote, identity_suite, lopatinski_frame, scan_lower_bounds, BOUND_IDS};
use qths::multiplier::{catalog, catalog_grid_spec, estimate_claims};
use qths::sector::{build_scan_grid, random_spectral_points, GridSpec, Thresholds};
use qths::symbols::SymbolFrame;
use qths::wholespace::{random_mode_deviation, random_smooth_data, solve_wholespace, wholespace_residual, TorusGrid};
use qths::{SectorParams, C64};
use std::f64::consts::PI;
use std::time::{Duration, Instant};

type Check = std::result::Result<String, String>;

fn params() -> SectorParams {
    SectorParams::new(2, 1.0, 1.0, PI / 3.0, 0.5).unwrap()
}

fn halfspace_grid(cells: usize) -> HalfSpaceGrid {
    HalfSpaceGrid::new(TorusGrid::cube(1, 2.0 * PI, 16).unwrap(), NormalGrid::new(16.0, cells, 4.0).unwrap(), 2 * cells).unwrap()
}

fn within(elapsed: Duration, limit: f64, what: String) -> Check {
    let s = elapsed.as_secs_f64();
    if s < limit {
        Ok(format!("{what}, {s:.1} s"))
    } else {
        Err(format!("{what}, {s:.1} s exceeds {limit} s"))
    }
}

fn identities() -> Check {
    let t = Instant::now();
    let sets = [(1.0, 0.5, 1.0), (1.0, 2f64.sqrt(), 0.5), (0.2, 2.0, 0.1)];
    let mut worst = 0.0f64;
    for (k, (a, beta, c0)) in sets.into_iter().enumerate() {
        let p = SectorParams::new(2, a, beta, PI / 3.0, c0).map_err(|e| e.to_string())?;
        let pts = random_spectral_points(&p, 10_000, 20, (1e-3, 1e3), k as u64);
        let suite = identity_suite(&pts, &p, 1e-8).map_err(|e| e.to_string())?;
        for e in &suite.identities {
            if e.max_residual > 1e-8 {
                return Err(format!("(a, β) = ({a}, {beta}): {} residual {:.2e}", e.name, e.max_residual));
            }
            worst = worst.max(e.max_residual);
        }
    }
    within(t.elapsed(), 10.0, format!("3 × 10⁴ points, worst residual {worst:.2e}"))
}

const SCAN_FIXTURES: [(&str, f64); 6] = [
    ("p2-normalized", 0.06340404351166902),
    ("lambda-ca", 0.8670726022884614),
    ("lambda32-ca-low", 0.9142607564198645),
    ("aa-normalized", 0.4911591800982415),
    ("d-high", 0.22275997006610776),
    ("d-low", 0.6095134048132081),
];

fn lower_bounds() -> Check {
    let t = Instant::now();
    let p = params();
    let spec = GridSpec::default();
    let grid = build_scan_grid(&p, &spec).map_err(|e| e.to_string())?;
    let smallest = grid.points.iter().map(|q| q.lambda.norm()).fold(f64::INFINITY, f64::min);
    if smallest > p.c0 * 2f64.powi(-20) * (1.0 + 1e-12) {
        return Err(format!("grid stops at |λ| = {smallest:e}"));
    }
    let rep = scan_lower_bounds(&grid, &p).map_err(|e| e.to_string())?;
    assert_eq!(BOUND_IDS.len(), SCAN_FIXTURES.len());
    let mut lowest = f64::INFINITY;
    for (id, frozen) in SCAN_FIXTURES {
        let e = rep.entries.iter().find(|e| e.id == id).ok_or(format!("{id} missing"))?;
        let v = e.infimum.ok_or(format!("{id}: no sample"))?;
        if !(v >= 1e-8) {
            return Err(format!("{id}: infimum {v:e}"));
        }
        if (v - frozen).abs() > 1e-9 * frozen {
            return Err(format!("{id}: {v} drifted from fixture {frozen}"));
        }
        lowest = lowest.min(v);
    }
    within(t.elapsed(), 60.0, format!("{} points, smallest infimum {lowest:.4}", grid.points.len()))
}

fn ca_limit() -> Check {
    let p = SectorParams::new(2, 1.0, 1.0, PI / 3.0, 0.5).unwrap();
    let r = 1e-6 * p.c0;
    let mut worst = 0.0f64;
    for a_norm in [0.1, 1.0, 10.0] {
        let limit = ca_zero_limit(a_norm, &p).map_err(|e| e.to_string())?;
        for arg in [0.0, 1.0, -2.0] {
            let f = SymbolFrame::new(C64::from_polar(r, arg), &[a_norm], p.a, p.beta);
            let lf = lopatinski_frame(&f).map_err(|e| e.to_string())?;
            let dev = (lf.lambda_ca - limit).norm();
            if dev > 1e-4 {
                return Err(format!("A = {a_norm}, arg λ = {arg}: deviation {dev:e}"));
            }
            worst = worst.max(dev);
        }
    }
    Ok(format!("worst deviation {worst:.2e} at |λ| = 10⁻⁶c0"))
}

fn d_asymptotes() -> Check {
    let p = params();
    let th = Thresholds::default();
    let mut worst = (0.0f64, 0.0f64);
    for k in [0, 5, 10, 20] {
        for arg in [0.0, 1.2, -2.0] {
            let lam = C64::from_polar(p.c0 * 2f64.powi(-k), arg);
            let high = (100.0 * (p.c0 + p.a) / th.r).sqrt();
            let f = SymbolFrame::new(lam, &[high], p.a, p.beta);
            let d = lopatinski_frame(&f).map_err(|e| e.to_string())?.d;
            let asym = d_high_a_asymptote(&f);
            let eh = (d - asym).norm() / asym.norm();
            let low = (1e-4 * lam.norm() / th.big_r).sqrt();
            let f = SymbolFrame::new(lam, &[low], p.a, p.beta);
            let d = lopatinski_frame(&f).map_err(|e| e.to_string())?.d;
            let asym = d_low_a_asymptote(&f);
            let el = (d - asym).norm() / asym.norm();
            if eh > 0.1 || el > 0.1 {
                return Err(format!("λ = {lam}: high-A {eh:.3}, low-A {el:.3}"));
            }
            worst = (worst.0.max(eh), worst.1.max(el));
        }
    }
    Ok(format!("worst relative gaps {:.2e} (high A, leading term −βz1z2(λ+a)A), {:.2e} (low A)", worst.0, worst.1))
}

fn multipliers() -> Check {
    let t = Instant::now();
    let claims = catalog();
    if claims.len() < 25 {
        return Err(format!("only {} claims", claims.len()));
    }
    let reps = estimate_claims(&claims, &params(), &catalog_grid_spec(), 2).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = reps.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
    if !failed.is_empty() {
        return Err(format!("unstable: {failed:?}"));
    }
    within(t.elapsed(), 300.0, format!("{} claims stable", reps.len()))
}

fn wholespace() -> Check {
    let p = params();
    let dev = random_mode_deviation(&p, 1000, 7).map_err(|e| e.to_string())?;
    let grid = TorusGrid::cube(2, 2.0 * PI, 32).map_err(|e| e.to_string())?;
    let (f, g) = random_smooth_data(&grid, 6, 7);
    let lam = C64::new(0.3, 0.2);
    let sol = solve_wholespace(&f, &g, lam, &p, &grid).map_err(|e| e.to_string())?;
    let res = wholespace_residual(&sol, &f, &g, lam, &p, &grid).map_err(|e| e.to_string())?;
    if dev > 1e-9 || res > 1e-9 {
        return Err(format!("oracle deviation {dev:e}, residual {res:e}"));
    }
    Ok(format!("oracle deviation {dev:.1e}, residual {res:.1e}"))
}

fn halfspace() -> Check {
    let t = Instant::now();
    let p = params();
    let lam = C64::new(0.3, 0.2);
    let src = SingleMode::new(2, true, true);
    let sample = |g: &HalfSpaceGrid| HalfSpaceData::sample(g, |k, c, xt, x| src.value(k, c, xt, x));
    let mut residuals = Vec::new();
    let mut finest = None;
    for cells in [64, 128, 256] {
        let grid = halfspace_grid(cells);
        let data = sample(&grid);
        let sol = solve_halfspace(&data, lam, &p, &grid).map_err(|e| e.to_string())?;
        residuals.push(interior_residual(&sol, &data).map_err(|e| e.to_string())?);
        finest = Some(sol);
    }
    let sol = finest.unwrap();
    let d = sol.diagnostics;
    if d.trace_u > 1e-6 || d.trace_dq > 1e-4 {
        return Err(format!("traces u {:e}, ∂_NQ {:e}", d.trace_u, d.trace_dq));
    }
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    if orders.iter().any(|o| *o < 1.8) {
        return Err(format!("interior residuals {residuals:?} not second order"));
    }
    let f = |k: DataKind, c: usize, xt: &[f64], x: f64| src.value(k, c, xt, x);
    let mut errs = Vec::new();
    for n in [16, 32, 64] {
        let fd = fd_oracle_solve(&f, lam, &p, &FdGrid::new(2.0 * PI, n, 10.0, n).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        errs.push(compare_with_spectral(&fd, &sol).map_err(|e| e.to_string())?);
    }
    if !(errs[2] <= 0.05 && errs[0] > errs[1] && errs[1] > errs[2]) {
        return Err(format!("oracle errors {errs:?}"));
    }
    within(
        t.elapsed(),
        300.0,
        format!("traces {:.1e}/{:.1e}, residual orders {orders:.2?}, oracle errors {errs:.3?}", d.trace_u, d.trace_dq),
    )
}

fn sweep() -> Check {
    let t = Instant::now();
    let p = params();
    let grid = halfspace_grid(256);
    let lams = dyadic_sequence(p.c0, 20, 0.0);
    let mut parts = Vec::new();
    for (kind, boundary) in [(Estimate::Full, true), (Estimate::Homogeneous, false)] {
        let data = SweepData::new(2, 0.0, boundary).sample(&grid);
        let r = lambda_sweep(&data, &lams, &p, &grid, &NormSpec::default(), kind).map_err(|e| e.to_string())?;
        if !(r.sup <= 3.0 * r.median) {
            return Err(format!("{kind:?}: max {} vs median {}", r.sup, r.median));
        }
        parts.push(format!("{kind:?} max/median {:.3}", r.sup / r.median));
    }
    within(t.elapsed(), 600.0, parts.join(", "))
}

fn rbound() -> Check {
    let p = params();
    let grid = halfspace_grid(256);
    let lams = dyadic_sequence(p.c0, 20, 0.0);
    let fam: Vec<(C64, HalfSpaceData)> = (0..16).map(|j| (lams[j * 20 / 15], SweepData::new(2, 0.4 * j as f64, true).sample(&grid))).collect();
    let (im, da) = sample_stacks(&fam, &p, &grid).map_err(|e| e.to_string())?;
    let mut v = Vec::new();
    for seed in 0..3 {
        v.push(rbound_from_stacks(&im, &da, &grid, &RboundOptions { trials: 1000, q: 2.0, seed }).map_err(|e| e.to_string())?.value);
    }
    let mean = v.iter().sum::<f64>() / 3.0;
    if v.iter().any(|x| !x.is_finite() || (x - mean).abs() > 0.2 * mean) {
        return Err(format!("estimates {v:?}"));
    }
    Ok(format!("estimates {v:.4?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("identity suite", identities),
        ("lower-bound scans", lower_bounds),
        ("λC_a zero limit", ca_limit),
        ("D asymptotic ratios", d_asymptotes),
        ("multiplier catalog", multipliers),
        ("whole-space solver", wholespace),
        ("half-space solver", halfspace),
        ("resolvent-ratio uniformity", sweep),
        ("empirical R-bound", rbound),
    ];
    // `cargo test -- --list` and filters are not supported; run everything
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg}", k + 1),
            Err(msg) => {
                failures += 1;
                println!("criterion {}: FAIL  {name}: {msg}", k + 1);
            }
        }
    }
    println!("acceptance: {}/9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
