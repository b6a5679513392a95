//! Pointwise scalar symbols: the characteristic roots z1, z2, the square
//! roots B, L1, L2, the velocity characteristic polynomial P₂ and its roots.
//!
//! All square roots are principal. The roots z1, z2 are computed from their
//! symmetric functions, so no inner square-root branch has to be chosen.

use crate::error::{QthsError, Result};
use crate::sector::{in_sector, SectorParams, SpectralPoint};
use crate::C64;
use serde::{Deserialize, Serialize};

/// Roots of z² − (2λ/κ + a) z + λ(λ+a)/κ, κ = 1 + β²/2, labelled so that z1
/// is the root closest to λ/κ.
pub fn z_roots(lambda: C64, a: f64, beta: f64) -> (C64, C64) {
    let kappa = 1.0 + 0.5 * beta * beta;
    let s = 2.0 * lambda / kappa + a;
    let p = lambda * (lambda + a) / kappa;
    let disc = (s * s - 4.0 * p).sqrt();
    let q = if (s.conj() * disc).re >= 0.0 { 0.5 * (s + disc) } else { 0.5 * (s - disc) };
    let (big, small) = if q.norm() == 0.0 { (q, q) } else { (q, p / q) };
    let target = lambda / kappa;
    if (small - target).norm() <= (big - target).norm() {
        (small, big)
    } else {
        (big, small)
    }
}

/// P₂(ξ, λ) = (λ+|ξ|²)(λ+|ξ|²+a) + (β²/2)(|ξ|⁴ + a|ξ|²).
pub fn p2(xi_norm: f64, lambda: C64, a: f64, beta: f64) -> C64 {
    let x2 = xi_norm * xi_norm;
    (lambda + x2) * (lambda + x2 + a) + 0.5 * beta * beta * (x2 * x2 + a * x2)
}

/// Roots λ₊, λ₋ of P₂(ξ, ·), λ₊ being the one that vanishes at ξ = 0.
pub fn lambda_pm(xi_norm: f64, a: f64, beta: f64) -> (C64, C64) {
    let x2 = xi_norm * xi_norm;
    let b2 = 0.5 * beta * beta;
    let m = x2 + 0.5 * a;
    let disc = 0.25 * a * a - a * b2 * x2 - b2 * x2 * x2;
    if disc >= 0.0 {
        let minus = -m - disc.sqrt();
        let prod = (1.0 + b2) * (x2 * x2 + a * x2);
        let plus = if minus == 0.0 { 0.0 } else { prod / minus };
        (C64::new(plus, 0.0), C64::new(minus, 0.0))
    } else {
        let s = (-disc).sqrt();
        (C64::new(-m, s), C64::new(-m, -s))
    }
}

/// All scalar symbols at one `(λ, ξ')` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolFrame {
    pub lambda: C64,
    /// Tangential frequency; only the first `n - 1` entries are used.
    pub xi: [f64; 2],
    pub n: usize,
    pub a_norm: f64,
    pub b: C64,
    pub z1: C64,
    pub z2: C64,
    pub l1: C64,
    pub l2: C64,
    pub a: f64,
    pub beta: f64,
}

impl SymbolFrame {
    /// Evaluates the frame without any sector check.
    pub fn new(lambda: C64, xi: &[f64], a: f64, beta: f64) -> Self {
        let mut x = [0.0; 2];
        x[..xi.len()].copy_from_slice(xi);
        let a_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a2 = a_norm * a_norm;
        let (z1, z2) = z_roots(lambda, a, beta);
        SymbolFrame {
            lambda,
            xi: x,
            n: xi.len() + 1,
            a_norm,
            b: (lambda + a + a2).sqrt(),
            z1,
            z2,
            l1: (z1 + a2).sqrt(),
            l2: (z2 + a2).sqrt(),
            a,
            beta,
        }
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi[..self.n - 1]
    }

    pub fn kappa(&self) -> f64 {
        1.0 + 0.5 * self.beta * self.beta
    }

    pub fn a2(&self) -> f64 {
        self.a_norm * self.a_norm
    }

    /// λ + a = B² − A².
    pub fn b2_minus_a2(&self) -> C64 {
        self.lambda + self.a
    }

    pub fn b_minus_a(&self) -> C64 {
        self.b2_minus_a2() / (self.b + self.a_norm)
    }

    pub fn l1_minus_a(&self) -> C64 {
        self.z1 / (self.l1 + self.a_norm)
    }

    pub fn l2_minus_a(&self) -> C64 {
        self.z2 / (self.l2 + self.a_norm)
    }

    /// B² − L1² = λ + a − z1.
    pub fn b2_minus_l1sq(&self) -> C64 {
        self.lambda + self.a - self.z1
    }

    /// B² − L2², from (B²−L1²)(B²−L2²) = λ(λ+a)β²/(2κ).
    pub fn b2_minus_l2sq(&self) -> C64 {
        let num = self.lambda * (self.lambda + self.a) * (0.5 * self.beta * self.beta / self.kappa());
        let d = self.b2_minus_l1sq();
        if d.norm() == 0.0 {
            self.lambda + self.a - self.z2
        } else {
            num / d
        }
    }

    pub fn b_minus_l1(&self) -> C64 {
        self.b2_minus_l1sq() / (self.b + self.l1)
    }

    pub fn b_minus_l2(&self) -> C64 {
        self.b2_minus_l2sq() / (self.b + self.l2)
    }

    /// L2 − L1 = (z2 − z1)/(L1 + L2).
    pub fn l2_minus_l1(&self) -> C64 {
        (self.z2 - self.z1) / (self.l1 + self.l2)
    }
}

/// Checked evaluation at a sector point.
pub fn eval_frame(point: &SpectralPoint, params: &SectorParams) -> Result<SymbolFrame> {
    if !in_sector(point.lambda, params) {
        return Err(QthsError::Domain(format!("lambda = {} not in the sector", point.lambda)));
    }
    if point.xi.len() + 1 != params.n {
        return Err(QthsError::InvalidParameter(format!(
            "xi has length {} but N = {}",
            point.xi.len(),
            params.n
        )));
    }
    Ok(SymbolFrame::new(point.lambda, &point.xi, params.a, params.beta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub residuals: Vec<(String, f64)>,
    pub max_residual: f64,
    pub worst: String,
    pub pass: bool,
}

impl IdentityReport {
    pub fn from_residuals(residuals: Vec<(String, f64)>, tol: f64) -> Self {
        let (worst, max_residual) = residuals
            .iter()
            .fold((String::new(), 0.0f64), |acc, (n, r)| {
                if !(*r <= acc.1) {
                    (n.clone(), *r)
                } else {
                    acc
                }
            });
        let pass = max_residual <= tol;
        IdentityReport { residuals, max_residual, worst, pass }
    }
}

fn rel(x: C64, y: C64, scale: f64) -> f64 {
    (x - y).norm() / scale.max(f64::MIN_POSITIVE)
}

/// Residuals of the algebraic identities satisfied by a frame.
pub fn frame_identity_residuals(f: &SymbolFrame) -> Vec<(String, f64)> {
    let a2 = f.a2();
    let kappa = f.kappa();
    let l1sq = f.l1 * f.l1;
    let l2sq = f.l2 * f.l2;
    let lam = f.lambda;
    let sum_rhs = 2.0 * lam / kappa + f.a;
    let prod_lhs = kappa * f.z1 * f.z2;
    let prod_rhs = lam * (lam + f.a);
    let p = p2(f.a_norm, lam, f.a, f.beta);
    let fact = kappa * (a2 + f.z1) * (a2 + f.z2);
    let p_scale = (lam + a2).norm() * (lam + a2 + f.a).norm()
        + 0.5 * f.beta * f.beta * (a2 * a2 + f.a * a2);
    let sign = |v: f64| if v > 0.0 { 0.0 } else { 1.0 };
    vec![
        ("l1-square".into(), rel(l1sq, f.z1 + a2, l1sq.norm().max(f.z1.norm() + a2))),
        ("l2-square".into(), rel(l2sq, f.z2 + a2, l2sq.norm().max(f.z2.norm() + a2))),
        ("z-sum".into(), rel(f.z1 + f.z2, sum_rhs, (f.z1.norm() + f.z2.norm()).max(2.0 * lam.norm() / kappa + f.a))),
        ("z-product".into(), rel(prod_lhs, prod_rhs, prod_lhs.norm().max(lam.norm() * (lam.norm() + f.a)))),
        ("p2-factorization".into(), rel(p, fact, p_scale.max(fact.norm()))),
        ("re-b-positive".into(), sign(f.b.re)),
        ("re-l1-positive".into(), sign(f.l1.re)),
        ("re-l2-positive".into(), sign(f.l2.re)),
    ]
}

/// Identity report with the pass threshold 1e-10.
pub fn check_frame_identities(f: &SymbolFrame) -> IdentityReport {
    IdentityReport::from_residuals(frame_identity_residuals(f), 1e-10)
}
