//! Boundary problem of one tangential mode: homogeneous interior equations,
//! prescribed tangential velocity and normal derivative of Q at x_N = 0.
//!
//! The traces enter through Volevich integrals of decaying profiles, so the
//! solution is an exponential sum in x_N for every component.

use super::grid::NormalGrid;
use super::kernels::{resolvent_even, volevich_form_with, ExpSum};
use crate::error::{QthsError, Result};
use crate::lopatinski::lopatinski_frame;
use crate::sector::{in_sector, SectorParams};
use crate::symbols::SymbolFrame;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Exponential-sum solution of one tangential mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBoundary {
    pub u: Vec<ExpSum>,
    /// row-major N×N
    pub q: Vec<ExpSum>,
    pub tail: f64,
    pub truncated: bool,
}

impl ModeBoundary {
    pub fn zero(n: usize) -> Self {
        ModeBoundary { u: vec![ExpSum::zero(); n], q: vec![ExpSum::zero(); n * n], tail: 0.0, truncated: false }
    }
}

/// Normal profile of a boundary datum with its first two x-derivatives.
#[derive(Debug, Clone)]
pub struct Profile {
    pub g: Vec<C64>,
    pub dg: Vec<C64>,
    pub ddg: Vec<C64>,
}

impl Profile {
    pub fn new(g: Vec<C64>, grid: &NormalGrid) -> Self {
        let dg = grid.derivative(&g);
        let ddg = grid.derivative(&dg);
        Profile { g, dg, ddg }
    }

    pub fn is_zero(&self) -> bool {
        self.g.iter().all(|v| *v == ZERO)
    }
}

struct Transforms {
    e1: ExpSum,
    m1: ExpSum,
    m2: ExpSum,
}

/// Solves the boundary problem of one mode. `h` holds the N−1 tangential
/// velocity profiles, `hh` the N² profiles of ∂_N Q (row-major, symmetric,
/// traceless).
pub fn solve_boundary_mode(xi: &[f64], lambda: C64, params: &SectorParams, h: &[Profile], hh: &[Profile], grid: &NormalGrid) -> Result<ModeBoundary> {
    let n = xi.len() + 1;
    let n1 = n - 1;
    if h.len() != n1 || hh.len() != n * n {
        return Err(QthsError::Grid("boundary data has the wrong number of components".into()));
    }
    if !in_sector(lambda, params) {
        return Err(QthsError::Domain(format!("lambda = {lambda} is outside the sector")));
    }
    let f = SymbolFrame::new(lambda, xi, params.a, params.beta);
    let (a, b, l1, l2, beta) = (C64::new(f.a_norm, 0.0), f.b, f.l1, f.l2, params.beta);
    let (b2, a2) = (b * b, a * a);
    let s: Vec<C64> = xi.iter().map(|&v| C64::new(0.0, v)).collect();
    let positive = f.a_norm > 0.0;
    let lf = if positive { Some(lopatinski_frame(&f)?) } else { None };
    let aa = lf.as_ref().map_or(b * b2 * (l1 + l2), |l| l.aa);
    let ff = f.b2_minus_l1sq() * f.b2_minus_l2sq() / aa;
    let kk = l1 * (b * l1 - a2) * f.b2_minus_l2sq() / aa;

    let mut tail = 0.0;
    let mut truncated = false;
    let k_e1 = ExpSum::exp(ONE, l1);
    let k_m1 = ExpSum::m(ONE, l1, a);
    let k_m2 = ExpSum::m(ONE, l2, l1);
    let mut transform = |p: &Profile, need_m1: bool| -> Result<Transforms> {
        if p.is_zero() {
            return Ok(Transforms { e1: ExpSum::zero(), m1: ExpSum::zero(), m2: ExpSum::zero() });
        }
        let mut run = |k: &ExpSum| -> Result<ExpSum> {
            let r = volevich_form_with(k, &p.g, &p.dg, &p.ddg, grid)?;
            tail += r.tail;
            truncated |= r.truncated;
            Ok(r.value)
        };
        Ok(Transforms { e1: run(&k_e1)?, m1: if need_m1 { run(&k_m1)? } else { ExpSum::zero() }, m2: run(&k_m2)? })
    };
    let th: Vec<Transforms> = h.iter().map(|p| transform(p, positive)).collect::<Result<_>>()?;
    let tq: Vec<Transforms> = hh.iter().map(|p| transform(p, positive)).collect::<Result<_>>()?;

    let mut u = vec![ExpSum::zero(); n];
    // v_j = V_e1[h_j] + (−K h_j + 2BF/β · R_j)·M(L2, L1)
    let mut v = vec![ExpSum::zero(); n1];
    let cr = 2.0 * b * ff / beta;
    for j in 0..n1 {
        v[j].axpy(ONE, &th[j].e1);
        v[j].axpy(-kk, &th[j].m2);
        v[j].axpy(cr, &tq[j * n + n1].m2);
        for l in 0..n1 {
            v[j].axpy(-cr * s[l] / b, &tq[j * n + l].m2);
        }
    }
    if let Some(lf) = lf {
        let cl = ONE / (lf.lambda_ca * a);
        let w = a * f.l1_minus_a();
        // u_N = −A(L1−A)·Cl·M(L1, A) + (A(L1−A)·Cl + s·h)·M(L2, L1)
        let mut un = ExpSum::zero();
        let mut add = |coef_c: C64, coef_sh: C64, t: &Transforms| {
            let c = coef_c * cl;
            un.axpy(-w * c, &t.m1);
            un.axpy(w * c + coef_sh, &t.m2);
        };
        for j in 0..n1 {
            add(lf.e * s[j], s[j], &th[j]);
        }
        add(a2, ZERO, &tq[n1 * n + n1]);
        for j in 0..n1 {
            add(-(b2 + a2) / b * s[j], ZERO, &tq[j * n + n1]);
            for l in 0..n1 {
                add(s[j] * s[l], ZERO, &tq[j * n + l]);
            }
        }
        let un = un.compact();
        let dun = un.derivative();
        // u′ = s·∂u_N/A² + v + s(s·v)/A²
        let mut sv = ExpSum::zero();
        for l in 0..n1 {
            sv.axpy(s[l], &v[l]);
        }
        for j in 0..n1 {
            let mut t = v[j].clone();
            t.axpy(s[j] / a2, &dun);
            t.axpy(s[j] / a2, &sv);
            u[j] = t.compact();
        }
        u[n1] = un;
    } else {
        for j in 0..n1 {
            u[j] = v[j].clone().compact();
        }
    }

    let du: Vec<ExpSum> = u.iter().map(|c| c.derivative()).collect();
    let mut q = vec![ExpSum::zero(); n * n];
    for j in 0..n {
        for k in j..n {
            // D̂(u)_jk with ∂_N in the normal slot
            let mut d = ExpSum::zero();
            let mut grad = |row: usize, col: usize| {
                if row < n1 {
                    d.axpy(0.5 * s[row], &u[col]);
                } else {
                    d.axpy(C64::new(0.5, 0.0), &du[col]);
                }
            };
            grad(j, k);
            grad(k, j);
            let q1 = resolvent_even(b, &d.compact())?.scaled(C64::new(beta, 0.0));
            let dq1_0 = q1.derivative().eval(0.0);
            let mut qc = q1;
            let p = &hh[j * n + k];
            if !p.is_zero() {
                let r = volevich_form_with(&ExpSum::exp(ONE, b), &p.g, &p.dg, &p.ddg, grid)?;
                tail += r.tail / b.norm();
                truncated |= r.truncated;
                qc.axpy(-ONE / b, &r.value);
            }
            qc.axpy(dq1_0 / b, &ExpSum::exp(ONE, b));
            let qc = qc.compact();
            q[j * n + k] = qc.clone();
            q[k * n + j] = qc;
        }
    }
    Ok(ModeBoundary { u, q, tail, truncated })
}

/// Largest pointwise defect of the homogeneous mode equations at the given
/// depths: the tensor equation, the divergence and the pressure-free
/// combinations of the reduced momentum rows.
pub fn mode_defect(xi: &[f64], lambda: C64, params: &SectorParams, m: &ModeBoundary, depths: &[f64]) -> f64 {
    let n = xi.len() + 1;
    let n1 = n - 1;
    let s: Vec<C64> = xi.iter().map(|&v| C64::new(0.0, v)).collect();
    let a2: f64 = xi.iter().map(|v| v * v).sum();
    let kappa = params.kappa();
    let b2 = lambda + params.a + a2;
    let du: Vec<ExpSum> = m.u.iter().map(|c| c.derivative()).collect();
    let ddu: Vec<ExpSum> = du.iter().map(|c| c.derivative()).collect();
    let dq: Vec<ExpSum> = m.q.iter().map(|c| c.derivative()).collect();
    let ddq: Vec<ExpSum> = dq.iter().map(|c| c.derivative()).collect();
    // m_j without the pressure gradient, and its derivative
    let mut mom = vec![ExpSum::zero(); n];
    for j in 0..n {
        let mut t = m.u[j].scaled(lambda + kappa * a2);
        t.axpy(C64::new(-kappa, 0.0), &ddu[j]);
        for k in 0..n1 {
            t.axpy(params.beta * lambda * s[k], &m.q[j * n + k]);
        }
        t.axpy(params.beta * lambda, &dq[j * n + n1]);
        mom[j] = t.compact();
    }
    let dmom: Vec<ExpSum> = mom.iter().map(|c| c.derivative()).collect();
    let mut worst: f64 = 0.0;
    for &x in depths {
        let scale = m.u.iter().chain(&m.q).map(|c| c.eval(x).norm()).fold(1e-300, f64::max) * (1.0 + lambda.norm() + a2);
        let mut div = du[n1].eval(x);
        for j in 0..n1 {
            div += s[j] * m.u[j].eval(x);
        }
        worst = worst.max(div.norm() / scale);
        for j in 0..n {
            for k in 0..n {
                let mut d = C64::new(0.0, 0.0);
                for (r, c) in [(j, k), (k, j)] {
                    d += 0.5 * if r < n1 { s[r] * m.u[c].eval(x) } else { du[c].eval(x) };
                }
                let r = b2 * m.q[j * n + k].eval(x) - ddq[j * n + k].eval(x) - params.beta * d;
                worst = worst.max(r.norm() / scale);
            }
        }
        for j in 0..n1 {
            for k in 0..n1 {
                let r = s[k] * mom[j].eval(x) - s[j] * mom[k].eval(x);
                worst = worst.max(r.norm() / scale);
            }
            let r = s[j] * mom[n1].eval(x) - dmom[j].eval(x);
            worst = worst.max(r.norm() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn profiles(grid: &NormalGrid, traces: &[C64]) -> Vec<Profile> {
        traces
            .iter()
            .map(|&t| Profile::new(grid.nodes.iter().map(|&y| t * (-(y / 2.0) * (y / 2.0)).exp() * (1.0 + y)).collect(), grid))
            .collect()
    }

    fn check(xi: &[f64], lambda: C64, beta: f64) {
        let n = xi.len() + 1;
        let params = SectorParams::new(n, 1.0, beta, PI / 3.0, 1.0).unwrap();
        let grid = NormalGrid::new(20.0, 256, 4.0).unwrap();
        let hv: Vec<C64> = (0..n - 1).map(|j| C64::new(0.7 - 0.3 * j as f64, 0.2)).collect();
        let mut hm = vec![C64::new(0.0, 0.0); n * n];
        let vals = [C64::new(0.4, -0.1), C64::new(-0.2, 0.5), C64::new(0.3, 0.3)];
        let mut c = 0;
        for j in 0..n {
            for k in j + 1..n {
                hm[j * n + k] = vals[c % 3];
                hm[k * n + j] = vals[c % 3];
                c += 1;
            }
        }
        hm[0] = C64::new(0.6, 0.0);
        hm[n * n - 1] = C64::new(-0.6, 0.0);
        let m = solve_boundary_mode(xi, lambda, &params, &profiles(&grid, &hv), &profiles(&grid, &hm), &grid).unwrap();
        for j in 0..n - 1 {
            assert!((m.u[j].eval(0.0) - hv[j]).norm() < 1e-7, "u trace {j}: {} vs {}", m.u[j].eval(0.0), hv[j]);
        }
        assert!(m.u[n - 1].eval(0.0).norm() < 1e-7);
        for c in 0..n * n {
            assert!((m.q[c].derivative().eval(0.0) - hm[c]).norm() < 1e-7, "dQ trace {c}: {} {}", m.q[c].derivative().eval(0.0), hm[c]);
        }
        let d = mode_defect(xi, lambda, &params, &m, &[0.0, 0.3, 1.0, 3.0]);
        assert!(d < 1e-9, "defect {d}");
        let tr: C64 = (0..n).map(|j| m.q[j * n + j].eval(0.4)).sum();
        assert!(tr.norm() < 1e-12);
    }

    #[test]
    fn boundary_mode_two_d() {
        check(&[0.8], C64::new(0.3, 0.4), 1.0);
        check(&[-2.5], C64::from_polar(0.05, 1.8), 0.5);
        check(&[0.0], C64::new(0.3, 0.4), 1.0);
    }

    #[test]
    fn boundary_mode_three_d() {
        check(&[0.8, -0.4], C64::new(0.3, 0.4), 1.0);
        check(&[0.0, 0.0], C64::from_polar(0.5, -1.0), 1.5);
    }
}
