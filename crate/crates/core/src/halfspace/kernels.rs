//! Exponential sums in the normal variable and Volevich-type integrals.
//!
//! A term is `coef · D[γ1..γk](x)`, the divided difference of
//! γ ↦ e^{−γx} over k ≤ 3 nodes. Sums of such terms are closed under
//! differentiation, under the convolution integrals of the boundary solve
//! and under the even-extension resolvent in x_N.

use super::grid::{hermite_coefficients, NormalGrid};
use crate::error::{QthsError, Result};
use crate::numerics::{exp_dd2, kernel_m, psi, psi_dd};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: C64,
    pub nodes: [C64; 3],
    /// number of nodes minus one
    pub order: usize,
}

/// D[γ1..γk](x) for k = order + 1.
pub fn basis(nodes: &[C64; 3], order: usize, x: f64) -> C64 {
    match order {
        0 => (-nodes[0] * x).exp(),
        1 => kernel_m(nodes[0], nodes[1], x),
        _ => x * x * exp_dd2(-nodes[0] * x, -nodes[1] * x, -nodes[2] * x),
    }
}

impl ExpTerm {
    pub fn eval(&self, x: f64) -> C64 {
        self.coef * basis(&self.nodes, self.order, x)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpSum {
    pub terms: Vec<ExpTerm>,
}

impl ExpSum {
    pub fn zero() -> Self {
        ExpSum { terms: Vec::new() }
    }

    pub fn exp(coef: C64, g: C64) -> Self {
        ExpSum { terms: vec![ExpTerm { coef, nodes: [g, ZERO, ZERO], order: 0 }] }
    }

    pub fn m(coef: C64, g1: C64, g2: C64) -> Self {
        ExpSum { terms: vec![ExpTerm { coef, nodes: [g1, g2, ZERO], order: 1 }] }
    }

    pub fn dd2(coef: C64, g1: C64, g2: C64, g3: C64) -> Self {
        ExpSum { terms: vec![ExpTerm { coef, nodes: [g1, g2, g3], order: 2 }] }
    }

    pub fn push(&mut self, coef: C64, nodes: &[C64]) {
        let mut nd = [ZERO; 3];
        nd[..nodes.len()].copy_from_slice(nodes);
        if coef != ZERO {
            self.terms.push(ExpTerm { coef, nodes: nd, order: nodes.len() - 1 });
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// d/dx via ∂D[γ1..γk] = −γ1·D[γ1..γk] − D[γ2..γk].
    pub fn derivative(&self) -> ExpSum {
        let mut out = ExpSum::zero();
        for t in &self.terms {
            out.push(-t.coef * t.nodes[0], &t.nodes[..=t.order]);
            if t.order > 0 {
                out.push(-t.coef, &t.nodes[1..=t.order]);
            }
        }
        out.compact()
    }

    pub fn nth_derivative(&self, k: usize) -> ExpSum {
        (0..k).fold(self.clone(), |s, _| s.derivative())
    }

    pub fn scaled(&self, c: C64) -> ExpSum {
        ExpSum { terms: self.terms.iter().map(|t| ExpTerm { coef: t.coef * c, ..*t }).collect() }
    }

    /// self += c·other
    pub fn axpy(&mut self, c: C64, other: &ExpSum) {
        for t in &other.terms {
            self.terms.push(ExpTerm { coef: t.coef * c, ..*t });
        }
    }

    /// Merges terms with identical node lists.
    pub fn compact(mut self) -> ExpSum {
        let mut out: Vec<ExpTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match out.iter_mut().find(|o| o.order == t.order && o.nodes == t.nodes) {
                Some(o) => o.coef += t.coef,
                None => out.push(t),
            }
        }
        out.retain(|t| t.coef != ZERO);
        ExpSum { terms: out }
    }

    /// Smallest real part over all nodes (the decay rate of the sum).
    pub fn min_rate(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| t.nodes[..=t.order].iter().map(|g| g.re))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn coef_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.norm()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolevichResult {
    pub value: ExpSum,
    /// bound on the part of the integral beyond X
    pub tail: f64,
    /// the profile does not decay to 1e-8 of its peak at X
    pub truncated: bool,
}

fn cell_moments(coefs: &[C64; 4], w: C64) -> C64 {
    (0..4).map(|m| coefs[m] * psi(m, w)).sum()
}

fn cell_moments_dd(coefs: &[C64; 4], w1: C64, w2: C64) -> C64 {
    (0..4).map(|m| coefs[m] * psi_dd(m, w1, w2)).sum()
}

/// ∫_0^X K(x + y) g(y) dy with g the Hermite cubic through nodal values and
/// slopes. Kernel terms may have at most two nodes.
pub fn volevich_integral(kernel: &ExpSum, g: &[C64], dg: &[C64], grid: &NormalGrid) -> Result<VolevichResult> {
    if g.len() != grid.len() || dg.len() != grid.len() {
        return Err(QthsError::Grid("profile length does not match the normal grid".into()));
    }
    let cells: Vec<(f64, f64, [C64; 4])> = (0..grid.cells)
        .map(|i| {
            let h = grid.nodes[i + 1] - grid.nodes[i];
            (grid.nodes[i], h, hermite_coefficients(g[i], g[i + 1], dg[i] * h, dg[i + 1] * h))
        })
        .collect();
    let i0 = |gam: C64| -> C64 { cells.iter().map(|(y, h, c)| *h * (-gam * *y).exp() * cell_moments(c, gam * *h)).sum() };
    let i1 = |g1: C64, g2: C64| -> C64 {
        cells
            .iter()
            .map(|(y, h, c)| *h * ((-g1 * *y).exp() * *h * cell_moments_dd(c, g1 * *h, g2 * *h) + kernel_m(g1, g2, *y) * cell_moments(c, g2 * *h)))
            .sum()
    };
    let mut out = ExpSum::zero();
    for t in &kernel.terms {
        match t.order {
            0 => out.push(t.coef * i0(t.nodes[0]), &t.nodes[..1]),
            1 => {
                let (g1, g2) = (t.nodes[0], t.nodes[1]);
                out.push(t.coef * i1(g1, g2), &[g1]);
                out.push(t.coef * i0(g2), &[g1, g2]);
            }
            _ => return Err(QthsError::Numerical("convolution kernels with three nodes are not supported".into())),
        }
    }
    let peak = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let end = g[g.len() - 1].norm();
    let rate = kernel.min_rate();
    let tail = if rate > 0.0 { end * kernel.coef_norm() * (-rate * grid.x_max).exp() / rate } else { f64::INFINITY };
    Ok(VolevichResult { value: out.compact(), tail, truncated: end > 1e-8 * peak.max(1e-300) })
}

/// V_K[g](x) = −∫_0^∞ ∂_y[g(y) K(x + y)] dy, which equals g(0)K(x) for
/// decaying g, computed as −∫ g′K(x+·) − ∫ g ∂K(x+·) with the profile
/// derivatives taken on the normal grid.
pub fn volevich_form(kernel: &ExpSum, g: &[C64], grid: &NormalGrid) -> Result<VolevichResult> {
    let dg = grid.derivative(g);
    let ddg = grid.derivative(&dg);
    volevich_form_with(kernel, g, &dg, &ddg, grid)
}

pub fn volevich_form_with(kernel: &ExpSum, g: &[C64], dg: &[C64], ddg: &[C64], grid: &NormalGrid) -> Result<VolevichResult> {
    let first = volevich_integral(kernel, dg, ddg, grid)?;
    let second = volevich_integral(&kernel.derivative(), g, dg, grid)?;
    let mut value = first.value.scaled(C64::new(-1.0, 0.0));
    value.axpy(C64::new(-1.0, 0.0), &second.value);
    Ok(VolevichResult { value: value.compact(), tail: first.tail + second.tail, truncated: first.truncated || second.truncated })
}

/// Solution w of (B² − ∂²)w = s on the line for the even extension of s,
/// restricted to x ≥ 0 (so w′(0) = 0).
pub fn resolvent_even(b: C64, s: &ExpSum) -> Result<ExpSum> {
    let one = C64::new(1.0, 0.0);
    let mut out = ExpSum::zero();
    for t in &s.terms {
        let c = t.coef;
        match t.order {
            0 => {
                let g = t.nodes[0];
                out.push(-c / (b + g), &[g, b]);
                out.push(c / (b * (b + g)), &[b]);
            }
            1 => {
                let (g1, g2) = (t.nodes[0], t.nodes[1]);
                let u1 = one / (b + g1);
                let u12 = -one / ((b + g1) * (b + g2));
                out.push(-c * u1, &[g1, g2, b]);
                out.push(-c * u12, &[g2, b]);
                out.push(c * u12 / b, &[b]);
            }
            _ => return Err(QthsError::Numerical("resolvent of three-node terms is not supported".into())),
        }
    }
    Ok(out.compact())
}
