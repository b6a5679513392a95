//! Full half-space solve: reflected whole-space part, boundary corrector per
//! tangential mode, weak pressure solve, and the diagnostics checked against
//! the boundary conditions and the interior equations.

use super::boundary::{solve_boundary_mode, ModeBoundary, Profile};
use super::extension::{doubled_torus, extend_tensor, extend_velocity};
use super::grid::HalfSpaceGrid;
use super::kernels::ExpSum;
use super::pressure::pressure_dn_mode;
use crate::error::{QthsError, Result};
use crate::field::{fft_nd, transform_leading, Field, FieldKind};
use crate::sector::{in_sector, SectorParams};
use crate::wholespace::solve_wholespace_modes;
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Interior data (f, G) and boundary data (h, H), all on the half-space grid.
/// h and H are decaying profiles whose traces at x_N = 0 are imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceData {
    pub f: Field,
    pub g: Field,
    pub h: Field,
    pub hh: Field,
}

impl HalfSpaceData {
    pub fn zeros(grid: &HalfSpaceGrid) -> Self {
        let (n, shape) = (grid.n(), grid.shape());
        HalfSpaceData {
            f: Field::zeros(FieldKind::Velocity, n, &shape),
            g: Field::zeros(FieldKind::Tensor, n, &shape),
            h: Field::zeros(FieldKind::Velocity, n, &shape),
            hh: Field::zeros(FieldKind::Tensor, n, &shape),
        }
    }

    /// Samples data given as functions of (tangential coordinates, x_N).
    /// Tangential coordinates are k·spacing along every axis.
    pub fn sample(grid: &HalfSpaceGrid, comp: impl Fn(DataKind, usize, &[f64], f64) -> C64) -> Self {
        let mut d = HalfSpaceData::zeros(grid);
        let m1 = grid.normal.len();
        for t in 0..grid.modes() {
            let xt = tangential_coords(grid, t);
            for (i, &x) in grid.normal.nodes.iter().enumerate() {
                let idx = t * m1 + i;
                for (kind, field) in [(DataKind::F, &mut d.f), (DataKind::G, &mut d.g), (DataKind::H, &mut d.h), (DataKind::DqBoundary, &mut d.hh)] {
                    for c in 0..field.ncomp() {
                        field.comps[c][idx] = comp(kind, c, &xt, x);
                    }
                }
            }
        }
        d
    }

    pub fn validate(&self, grid: &HalfSpaceGrid) -> Result<()> {
        let shape = grid.shape();
        for (name, fl, kind) in [("f", &self.f, FieldKind::Velocity), ("G", &self.g, FieldKind::Tensor), ("h", &self.h, FieldKind::Velocity), ("H", &self.hh, FieldKind::Tensor)] {
            if fl.kind != kind || fl.shape != shape || fl.n != grid.n() {
                return Err(QthsError::Grid(format!("{name} does not match the half-space grid")));
            }
        }
        let n = grid.n();
        let hscale = self.h.max_abs().max(1e-300);
        let hn = self.h.comps[n - 1].iter().map(|v| v.norm()).fold(0.0, f64::max);
        if hn > 1e-12 * hscale {
            return Err(QthsError::InvalidParameter("normal boundary velocity h_N must vanish".into()));
        }
        for (name, fl) in [("G", &self.g), ("H", &self.hh)] {
            if fl.s0_defect() > 1e-12 * fl.max_abs().max(1e-300) {
                return Err(QthsError::InvalidParameter(format!("{name} must be symmetric and traceless")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    F,
    G,
    H,
    DqBoundary,
}

/// Tangential coordinates of flat tangential index `t`.
pub fn tangential_coords(grid: &HalfSpaceGrid, t: usize) -> Vec<f64> {
    let tg = &grid.tangential;
    tg.multi_index(t).iter().enumerate().map(|(ax, &k)| k as f64 * tg.spacing(ax)).collect()
}

/// Solution of one tangential mode: exponential sums from the corrector
/// plus normalized Fourier coefficients of the reflected whole-space part.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRepresentation {
    pub xi: Vec<f64>,
    pub boundary: ModeBoundary,
    /// N velocity then N² tensor coefficient lines; empty when the mode is
    /// not excited
    pub whole: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SolveDiagnostics {
    /// ‖u(·,0) − h(·,0)‖₂ relative
    pub trace_u: f64,
    /// ‖∂_N Q(·,0) − H(·,0)‖₂ relative, one-sided differences on the grid
    pub trace_dq: f64,
    /// same with the exact derivative of the representation
    pub trace_dq_exact: f64,
    /// max |u₁_N(·,0)| of the reflected whole-space part
    pub u1_normal_trace: f64,
    pub s0_drift: f64,
    pub volevich_tail: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceSolution {
    pub grid: HalfSpaceGrid,
    pub lambda: C64,
    pub params: SectorParams,
    pub modes: Vec<ModeRepresentation>,
    pub u: Field,
    pub q: Field,
    pub p: Field,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    U(usize),
    Q(usize, usize),
}

fn zetas(grid: &HalfSpaceGrid) -> Vec<f64> {
    let nz = grid.doubled_points as i64;
    (0..nz)
        .map(|k| {
            let w = if k < nz / 2 { k } else { k - nz };
            PI * w as f64 / grid.normal.x_max
        })
        .collect()
}

/// Σ_k c_k (iζ_k)^d e^{iζ_k x}
fn fourier_eval(c: &[C64], zeta: &[f64], d: usize, x: f64) -> C64 {
    let mut s = ZERO;
    for (ck, &z) in c.iter().zip(zeta) {
        if *ck == ZERO {
            continue;
        }
        let f = C64::new(0.0, z).powu(d as u32);
        s += ck * f * C64::from_polar(1.0, z * x);
    }
    s
}

impl ModeRepresentation {
    fn component_index(n: usize, c: Component) -> usize {
        match c {
            Component::U(j) => j,
            Component::Q(j, k) => n + j * n + k,
        }
    }

    fn exp_sum(&self, n: usize, c: Component) -> &ExpSum {
        match c {
            Component::U(j) => &self.boundary.u[j],
            Component::Q(j, k) => &self.boundary.q[j * n + k],
        }
    }

    /// d-th normal derivative of a component at depth x.
    pub fn eval(&self, n: usize, zeta: &[f64], c: Component, d: usize, x: f64) -> C64 {
        let b = self.exp_sum(n, c).nth_derivative(d).eval(x);
        if self.whole.is_empty() {
            return b;
        }
        b + fourier_eval(&self.whole[Self::component_index(n, c)], zeta, d, x)
    }

    /// d-th normal derivative at all nodes (exponential sums are
    /// differentiated once, Fourier lines summed with a shared phase table).
    pub fn eval_nodes(&self, n: usize, zeta: &[f64], phases: &[Vec<C64>], nodes: &[f64], c: Component, d: usize) -> Vec<C64> {
        let es = self.exp_sum(n, c).nth_derivative(d);
        let mut out: Vec<C64> = nodes.iter().map(|&x| es.eval(x)).collect();
        if !self.whole.is_empty() {
            let line = &self.whole[Self::component_index(n, c)];
            if line.iter().any(|v| *v != ZERO) {
                let w: Vec<C64> = line.iter().zip(zeta).map(|(ck, &z)| ck * C64::new(0.0, z).powu(d as u32)).collect();
                for (o, ph) in out.iter_mut().zip(phases) {
                    *o += w.iter().zip(ph).map(|(a, b)| a * b).sum::<C64>();
                }
            }
        }
        out
    }
}

fn phase_table(zeta: &[f64], nodes: &[f64]) -> Vec<Vec<C64>> {
    nodes.iter().map(|&x| zeta.iter().map(|&z| C64::from_polar(1.0, z * x)).collect()).collect()
}

/// χ(y) = exp(−(5y/X)²), the cutoff applied to the whole-space part before it
/// enters the corrector data.
fn cutoff(y: f64, x_max: f64) -> f64 {
    let t = 5.0 * y / x_max;
    (-t * t).exp()
}

/// Solves the boundary problem with homogeneous interior data.
pub fn solve_boundary(h: &Field, hh: &Field, lambda: C64, params: &SectorParams, grid: &HalfSpaceGrid) -> Result<HalfSpaceSolution> {
    let mut data = HalfSpaceData::zeros(grid);
    data.h = h.clone();
    data.hh = hh.clone();
    solve_halfspace(&data, lambda, params, grid)
}

/// Full half-space resolvent solve.
pub fn solve_halfspace(data: &HalfSpaceData, lambda: C64, params: &SectorParams, grid: &HalfSpaceGrid) -> Result<HalfSpaceSolution> {
    data.validate(grid)?;
    if params.n != grid.n() {
        return Err(QthsError::Grid(format!("parameters are for N = {} but the grid has N = {}", params.n, grid.n())));
    }
    if !in_sector(lambda, params) {
        return Err(QthsError::Domain(format!("lambda = {lambda} is outside the sector")));
    }
    let n = grid.n();
    let m1 = grid.normal.len();
    let nz = grid.doubled_points;
    let zeta = zetas(grid);
    let nodes = grid.normal.nodes.clone();
    let phases = phase_table(&zeta, &nodes);

    // whole-space part of the reflected data
    let whole_present = data.f.max_abs() > 0.0 || data.g.max_abs() > 0.0;
    let whole_lines: Vec<Vec<Vec<C64>>> = if whole_present {
        let torus = doubled_torus(grid)?;
        let mut ef = extend_velocity(&data.f, grid)?;
        let mut eg = extend_tensor(&data.g, grid)?;
        for c in ef.comps.iter_mut().chain(eg.comps.iter_mut()) {
            fft_nd(c, &torus.counts, false);
        }
        let ws = solve_wholespace_modes(&ef, &eg, lambda, params, &torus)?;
        let scale = 1.0 / nz as f64;
        (0..grid.modes())
            .map(|t| ws.u.comps.iter().chain(&ws.q.comps).map(|c| c[t * nz..(t + 1) * nz].iter().map(|v| v * scale).collect()).collect())
            .collect()
    } else {
        vec![Vec::new(); grid.modes()]
    };

    let hh_hat = transform_leading(&data.hh, false);
    let h_hat = transform_leading(&data.h, false);
    let f_hat = transform_leading(&data.f, false);
    let chi: Vec<f64> = nodes.iter().map(|&y| cutoff(y, grid.normal.x_max)).collect();
    let n1 = n - 1;

    let results: Vec<(ModeRepresentation, Vec<Vec<C64>>, Vec<C64>, f64)> = (0..grid.modes())
        .into_par_iter()
        .map(|t| {
            let xi = grid.tangential.xi_at(t);
            let mut rep = ModeRepresentation { xi: xi.clone(), boundary: ModeBoundary::zero(n), whole: whole_lines[t].clone() };
            if grid.tangential.is_nyquist(t) {
                return Ok((ModeRepresentation { whole: Vec::new(), ..rep }, vec![vec![ZERO; m1]; n + n * n], vec![ZERO; m1], 0.0));
            }
            let line = |f: &Field, c: usize| f.comps[c][t * m1..(t + 1) * m1].to_vec();
            let u1n_trace = if rep.whole.is_empty() { 0.0 } else { rep.eval(n, &zeta, Component::U(n1), 0, 0.0).norm() };
            // corrector data: h − χu₁ and H − χ∂_N Q₁
            let mut hp = Vec::with_capacity(n1);
            for j in 0..n1 {
                let mut g = line(&h_hat, j);
                if !rep.whole.is_empty() {
                    let u1 = rep.eval_nodes(n, &zeta, &phases, &nodes, Component::U(j), 0);
                    g.iter_mut().zip(u1.iter().zip(&chi)).for_each(|(v, (w, c))| *v -= w * *c);
                }
                hp.push(Profile::new(g, &grid.normal));
            }
            let mut qp = Vec::with_capacity(n * n);
            for c in 0..n * n {
                let mut g = line(&hh_hat, c);
                if !rep.whole.is_empty() {
                    let dq1 = rep.eval_nodes(n, &zeta, &phases, &nodes, Component::Q(c / n, c % n), 1);
                    g.iter_mut().zip(dq1.iter().zip(&chi)).for_each(|(v, (w, c))| *v -= w * *c);
                }
                qp.push(Profile::new(g, &grid.normal));
            }
            rep.boundary = solve_boundary_mode(&xi, lambda, params, &hp, &qp, &grid.normal)?;

            // nodal values and the pressure right side
            let mut vals = Vec::with_capacity(n + n * n);
            for j in 0..n {
                vals.push(rep.eval_nodes(n, &zeta, &phases, &nodes, Component::U(j), 0));
            }
            for c in 0..n * n {
                vals.push(rep.eval_nodes(n, &zeta, &phases, &nodes, Component::Q(c / n, c % n), 0));
            }
            let a2: f64 = xi.iter().map(|v| v * v).sum();
            let s: Vec<C64> = xi.iter().map(|&v| C64::new(0.0, v)).collect();
            let ra = C64::new(a2 + params.a, 0.0);
            let mut r = Vec::with_capacity(n);
            for j in 0..n {
                let ddu = rep.eval_nodes(n, &zeta, &phases, &nodes, Component::U(j), 2);
                let mut rj: Vec<C64> = (0..m1).map(|i| f_hat.comps[j][t * m1 + i] - (lambda + a2) * vals[j][i] + ddu[i]).collect();
                for k in 0..n {
                    let comp = Component::Q(j, k);
                    let (q0, q2) = if k < n1 {
                        (vals[n + j * n + k].clone(), rep.eval_nodes(n, &zeta, &phases, &nodes, comp, 2))
                    } else {
                        (rep.eval_nodes(n, &zeta, &phases, &nodes, comp, 1), rep.eval_nodes(n, &zeta, &phases, &nodes, comp, 3))
                    };
                    let w = if k < n1 { s[k] } else { ONE };
                    for i in 0..m1 {
                        rj[i] -= params.beta * w * (q2[i] - ra * q0[i]);
                    }
                }
                r.push(rj);
            }
            let p = pressure_dn_mode(&xi, &r, &grid.normal);
            Ok((rep, vals, p, u1n_trace))
        })
        .collect::<Result<_>>()?;

    let shape = grid.shape();
    let mut u = Field::zeros(FieldKind::Velocity, n, &shape);
    let mut q = Field::zeros(FieldKind::Tensor, n, &shape);
    let mut p = Field::zeros(FieldKind::Pressure, n, &shape);
    let mut modes = Vec::with_capacity(results.len());
    let mut diag = SolveDiagnostics::default();
    for (t, (rep, vals, pm, u1n)) in results.into_iter().enumerate() {
        for j in 0..n {
            u.comps[j][t * m1..(t + 1) * m1].copy_from_slice(&vals[j]);
        }
        for c in 0..n * n {
            q.comps[c][t * m1..(t + 1) * m1].copy_from_slice(&vals[n + c]);
        }
        p.comps[0][t * m1..(t + 1) * m1].copy_from_slice(&pm);
        diag.u1_normal_trace = diag.u1_normal_trace.max(u1n / grid.modes() as f64);
        diag.volevich_tail += rep.boundary.tail;
        diag.truncated |= rep.boundary.truncated;
        modes.push(rep);
    }
    let u = transform_leading(&u, true);
    let mut q = transform_leading(&q, true);
    let p = transform_leading(&p, true);
    let before = q.s0_defect();
    q.project_s0();
    diag.s0_drift = before / q.max_abs().max(1e-300);
    let mut sol = HalfSpaceSolution { grid: grid.clone(), lambda, params: *params, modes, u, q, p, diagnostics: diag };
    sol.diagnostics = trace_diagnostics(&sol, data);
    Ok(sol)
}

impl HalfSpaceSolution {
    /// Physical value of a component's d-th normal derivative at a point,
    /// summed over the tangential modes of the representation.
    pub fn eval_point(&self, c: Component, d: usize, xt: &[f64], xn: f64) -> C64 {
        let n = self.grid.n();
        let zeta = zetas(&self.grid);
        let mut sum = ZERO;
        for (t, rep) in self.modes.iter().enumerate() {
            if self.grid.tangential.is_nyquist(t) {
                continue;
            }
            let phase: f64 = rep.xi.iter().zip(xt).map(|(k, x)| k * x).sum();
            sum += rep.eval(n, &zeta, c, d, xn) * C64::from_polar(1.0, phase);
        }
        sum / self.grid.modes() as f64
    }

    /// Per-mode values of a component's d-th normal derivative at the given
    /// depths (tangential coefficients, not yet normalized).
    pub fn mode_profiles(&self, c: Component, d: usize, depths: &[f64]) -> Vec<Vec<C64>> {
        let n = self.grid.n();
        let zeta = zetas(&self.grid);
        let phases = phase_table(&zeta, depths);
        self.modes
            .par_iter()
            .enumerate()
            .map(|(t, rep)| {
                if self.grid.tangential.is_nyquist(t) {
                    vec![ZERO; depths.len()]
                } else {
                    rep.eval_nodes(n, &zeta, &phases, depths, c, d)
                }
            })
            .collect()
    }
}

fn l2_line(v: impl Iterator<Item = C64>) -> f64 {
    v.map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Boundary-condition errors of a computed solution, keeping the solver
/// diagnostics that do not depend on the traces.
pub fn trace_diagnostics(sol: &HalfSpaceSolution, data: &HalfSpaceData) -> SolveDiagnostics {
    let grid = &sol.grid;
    let n = grid.n();
    let m1 = grid.normal.len();
    let modes = grid.modes();
    let x = &grid.normal.nodes;
    let at = |f: &Field, c: usize, i: usize| -> Vec<C64> { (0..modes).map(|t| f.comps[c][t * m1 + i]).collect() };
    // scales: boundary data or the largest depth slice of the solution
    let mut uscale = 0.0f64;
    for i in 0..m1 {
        uscale = uscale.max(l2_line((0..n).flat_map(|c| at(&sol.u, c, i))));
    }
    let hnorm = l2_line((0..n).flat_map(|c| at(&data.h, c, 0)));
    let err_u = l2_line((0..n).flat_map(|c| at(&sol.u, c, 0).into_iter().zip(at(&data.h, c, 0)).map(|(a, b)| a - b)));
    // one-sided second-order derivative on the first three nodes
    let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
    let w0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
    let w1 = (h1 + h2) / (h1 * h2);
    let w2 = -h1 / (h2 * (h1 + h2));
    let hhnorm = l2_line((0..n * n).flat_map(|c| at(&data.hh, c, 0)));
    let mut err_dq = 0.0;
    let mut dnorm = 0.0;
    for c in 0..n * n {
        let (q0, q1, q2) = (at(&sol.q, c, 0), at(&sol.q, c, 1), at(&sol.q, c, 2));
        let hc = at(&data.hh, c, 0);
        for t in 0..modes {
            let d = w0 * q0[t] + w1 * q1[t] + w2 * q2[t];
            err_dq += (d - hc[t]).norm_sqr();
            dnorm += d.norm_sqr();
        }
    }
    let mut qscale = 0.0f64;
    for i in 0..m1 {
        qscale = qscale.max(l2_line((0..n * n).flat_map(|c| at(&sol.q, c, i))));
    }
    let dqscale = hhnorm.max(dnorm.sqrt()).max(qscale);
    // exact derivative through the representation (tangential Parseval)
    let zeta = zetas(grid);
    let hh_hat = transform_leading(&data.hh, false);
    let mut err_exact = 0.0;
    for (t, rep) in sol.modes.iter().enumerate() {
        if grid.tangential.is_nyquist(t) {
            continue;
        }
        for c in 0..n * n {
            let d = rep.eval(n, &zeta, Component::Q(c / n, c % n), 1, 0.0);
            err_exact += (d - hh_hat.comps[c][t * m1]).norm_sqr();
        }
    }
    let err_exact = (err_exact / modes as f64).sqrt();
    SolveDiagnostics {
        trace_u: err_u / hnorm.max(uscale).max(1e-300),
        trace_dq: err_dq.sqrt() / dqscale.max(1e-300),
        trace_dq_exact: err_exact / dqscale.max(1e-300),
        ..sol.diagnostics
    }
}

/// Three-point first and second derivative weights on a nonuniform grid.
fn fd_weights(hm: f64, hp: f64) -> ([f64; 3], [f64; 3]) {
    let s = hm + hp;
    ([-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)], [2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)])
}

/// Interior residual of the tensor equation, the divergence and the reduced
/// momentum equation, with normal derivatives taken by three-point
/// differences on the grid values and tangential derivatives spectrally.
/// Returned relative to the largest of the data and solution magnitudes.
pub fn interior_residual(sol: &HalfSpaceSolution, data: &HalfSpaceData) -> Result<f64> {
    let grid = &sol.grid;
    let n = grid.n();
    let n1 = n - 1;
    let m1 = grid.normal.len();
    let (lambda, beta, a, kappa) = (sol.lambda, sol.params.beta, sol.params.a, sol.params.kappa());
    let (uh, qh, ph) = (transform_leading(&sol.u, false), transform_leading(&sol.q, false), transform_leading(&sol.p, false));
    let (fh, gh) = (transform_leading(&data.f, false), transform_leading(&data.g, false));
    let rows = n * n + 1 + n;
    let mut res = Field::zeros(FieldKind::Tensor, n, &grid.shape());
    res.comps = vec![vec![ZERO; grid.modes() * m1]; rows];
    let x = &grid.normal.nodes;
    for t in 0..grid.modes() {
        if grid.tangential.is_nyquist(t) {
            continue;
        }
        let xi = grid.tangential.xi_at(t);
        let s: Vec<C64> = xi.iter().map(|&v| C64::new(0.0, v)).collect();
        let a2: f64 = xi.iter().map(|v| v * v).sum();
        let at = |f: &Field, c: usize, i: usize| f.comps[c][t * m1 + i];
        for i in 1..m1 - 1 {
            let (d1, d2) = fd_weights(x[i] - x[i - 1], x[i + 1] - x[i]);
            let dn = |f: &Field, c: usize| -> C64 { (0..3).map(|k| d1[k] * at(f, c, i + k - 1)).sum() };
            let dnn = |f: &Field, c: usize| -> C64 { (0..3).map(|k| d2[k] * at(f, c, i + k - 1)).sum() };
            let grad_u = |row: usize, col: usize| if row < n1 { s[row] * at(&uh, col, i) } else { dn(&uh, col) };
            for j in 0..n {
                for k in 0..n {
                    let c = j * n + k;
                    let d = 0.5 * (grad_u(j, k) + grad_u(k, j));
                    let r = (lambda + a + a2) * at(&qh, c, i) - dnn(&qh, c) - beta * d - at(&gh, c, i);
                    res.comps[c][t * m1 + i] = r;
                }
            }
            let div: C64 = (0..n1).map(|j| s[j] * at(&uh, j, i)).sum::<C64>() + dn(&uh, n1);
            res.comps[n * n][t * m1 + i] = div;
            for j in 0..n {
                let gp = if j < n1 { s[j] * at(&ph, 0, i) } else { dn(&ph, 0) };
                let mut divq = ZERO;
                let mut divg = ZERO;
                for k in 0..n {
                    let c = j * n + k;
                    if k < n1 {
                        divq += s[k] * at(&qh, c, i);
                        divg += s[k] * at(&gh, c, i);
                    } else {
                        divq += dn(&qh, c);
                        divg += dn(&gh, c);
                    }
                }
                let r = (lambda + kappa * a2) * at(&uh, j, i) - kappa * dnn(&uh, j) + gp + beta * lambda * divq - at(&fh, j, i) - beta * divg;
                res.comps[n * n + 1 + j][t * m1 + i] = r;
            }
        }
    }
    let res = transform_leading(&res, true);
    let scale = [data.f.max_abs(), data.g.max_abs(), sol.u.max_abs(), sol.q.max_abs()].into_iter().fold(1e-300, f64::max);
    Ok(res.max_abs() / scale)
}
