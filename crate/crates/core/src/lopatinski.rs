//! Boundary (Lopatinski) symbols: I1, I2, λC_a, A_a, D and its three-term
//! split, E, script-B and the E-coefficient family, together with the
//! lower-bound scans over a [`ScanGrid`].
//!
//! Every symbol is computed in [`Tracked`] arithmetic, which carries next to
//! each value the magnitude of the monomials that produced it. Comparing two
//! algebraically equal forms relative to that magnitude separates genuine
//! disagreement from the cancellation inherent to the literal displays.

use crate::error::{QthsError, Result};
use crate::sector::{classify, in_sector, Region, ScanGrid, ScanPoint, SectorParams, SpectralPoint, Thresholds};
use crate::symbols::{frame_identity_residuals, p2, SymbolFrame};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Complex value paired with the magnitude of the terms it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tracked {
    pub v: C64,
    pub m: f64,
}

impl Tracked {
    pub fn exact(v: C64) -> Self {
        Tracked { v, m: v.norm() }
    }

    pub fn real(x: f64) -> Self {
        Tracked { v: C64::new(x, 0.0), m: x.abs() }
    }

    /// |x − y| relative to the larger monomial magnitude of the two.
    pub fn residual(x: Tracked, y: Tracked) -> f64 {
        let scale = x.m.max(y.m).max(x.v.norm()).max(y.v.norm());
        if scale == 0.0 {
            0.0
        } else {
            (x.v - y.v).norm() / scale
        }
    }
}

impl Add for Tracked {
    type Output = Tracked;
    fn add(self, o: Tracked) -> Tracked {
        Tracked { v: self.v + o.v, m: self.m + o.m }
    }
}

impl Sub for Tracked {
    type Output = Tracked;
    fn sub(self, o: Tracked) -> Tracked {
        Tracked { v: self.v - o.v, m: self.m + o.m }
    }
}

impl Mul for Tracked {
    type Output = Tracked;
    fn mul(self, o: Tracked) -> Tracked {
        Tracked { v: self.v * o.v, m: self.m * o.m }
    }
}

impl Div for Tracked {
    type Output = Tracked;
    fn div(self, o: Tracked) -> Tracked {
        Tracked { v: self.v / o.v, m: self.m / o.v.norm() }
    }
}

impl Neg for Tracked {
    type Output = Tracked;
    fn neg(self) -> Tracked {
        Tracked { v: -self.v, m: self.m }
    }
}

impl Mul<f64> for Tracked {
    type Output = Tracked;
    fn mul(self, s: f64) -> Tracked {
        Tracked { v: self.v * s, m: self.m * s.abs() }
    }
}

impl Div<f64> for Tracked {
    type Output = Tracked;
    fn div(self, s: f64) -> Tracked {
        Tracked { v: self.v / s, m: self.m / s.abs() }
    }
}

impl Add<f64> for Tracked {
    type Output = Tracked;
    fn add(self, s: f64) -> Tracked {
        Tracked { v: self.v + s, m: self.m + s.abs() }
    }
}

/// Boundary symbols at one point. Primary values use cancellation-free
/// arrangements; the literal displays are kept for cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LopatinskiFrame {
    pub i1: C64,
    pub i2: C64,
    /// λC_a
    pub lambda_ca: C64,
    pub ca: C64,
    pub aa: C64,
    pub d: C64,
    pub d1: C64,
    pub d2: C64,
    pub d3: C64,
    pub e: C64,
    pub bscript: C64,
    /// E^h_k, k < N
    pub eh: Vec<C64>,
    /// E^{H_NN}_k
    pub ehnn: Vec<C64>,
    /// E^{H_jN}_k stored at `[j * (N-1) + k]`
    pub ehjn: Vec<C64>,
    /// E^{H_jl}_k stored at `[(j * (N-1) + k) * (N-1) + l]`
    pub ehjl: Vec<C64>,
    pub forms: FormSet,
}

/// Tracked evaluations of every form that enters a consistency check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormSet {
    pub lambda_ca_i: Tracked,
    pub lambda_ca_grouped: Tracked,
    pub lambda_ca_dquot: Tracked,
    pub aa_form1: Tracked,
    pub aa_form2: Tracked,
    pub d_product: Tracked,
    pub d_sum: Tracked,
    pub e_first: Tracked,
    pub e_grouped: Tracked,
    /// true when the I-form switched to the grouped form (L1 ≈ L2)
    pub coalescent: bool,
}

struct Atoms {
    a: Tracked,
    b: Tracked,
    l1: Tracked,
    l2: Tracked,
    bma: Tracked,
    l1ma: Tracked,
    l2ma: Tracked,
    bml1: Tracked,
    bml2: Tracked,
    lpa: Tracked,
    b2ml1: Tracked,
    b2ml2: Tracked,
    beta: f64,
}

impl Atoms {
    fn new(f: &SymbolFrame) -> Self {
        let t = Tracked::exact;
        Atoms {
            a: Tracked::real(f.a_norm),
            b: t(f.b),
            l1: t(f.l1),
            l2: t(f.l2),
            bma: t(f.b_minus_a()),
            l1ma: t(f.l1_minus_a()),
            l2ma: t(f.l2_minus_a()),
            bml1: t(f.b_minus_l1()),
            bml2: t(f.b_minus_l2()),
            lpa: t(f.b2_minus_a2()),
            b2ml1: t(f.b2_minus_l1sq()),
            b2ml2: t(f.b2_minus_l2sq()),
            beta: f.beta,
        }
    }
}

fn literal_i(x: &Atoms) -> (Tracked, Tracked) {
    let (a, b, l1, l2, beta) = (x.a, x.b, x.l1, x.l2, x.beta);
    let a2 = a * a;
    let b2 = b * b;
    let i1 = a2 / (b2 - a2) * (a2 * 2.0 - a * (b2 + a2) / b) * beta;
    let t1 = l1 * (l2 - a) / (b2 - l1 * l1) * (a2 * l1 * 2.0 - (b2 + a2) * (l1 * l1 + a2) / (b * 2.0));
    let t2 = l2 * (l1 - a) / (b2 - l2 * l2) * (a2 * l2 * 2.0 - (b2 + a2) * (l2 * l2 + a2) / (b * 2.0));
    (i1, (t2 - t1) * beta)
}

fn grouped_lambda_ca(x: &Atoms) -> Tracked {
    let (a, b, l1, l2, beta) = (x.a, x.b, x.l1, x.l2, x.beta);
    let a2 = a * a;
    let b2 = b * b;
    let bpa = b + a;
    let den = x.b2ml1 * x.b2ml2;
    let g1 = -(a2 * a * x.lpa / (b * bpa * bpa)) * beta;
    // L2·A − B² = A(L2 − A) − (λ + a)
    let l2a_mb2 = a * x.l2ma - x.lpa;
    let g2 = a * x.l1ma * x.l2ma * (l2a_mb2 * x.l1ma - l2 * x.lpa) / den * beta;
    let bracket = (a2 * b2 + a2 * l1 * l2 + b2 * l1 * l2 + l2 * l2 * b2) * (-x.l1ma)
        + x.b2ml2 * a * l1 * (l1 + a);
    let g3 = x.bma * x.bma * bracket / (b * 2.0 * den) * beta;
    g1 + g2 + g3
}

fn literal_d(x: &Atoms) -> (Tracked, Tracked, Tracked) {
    let (a, b, l1, l2, beta) = (x.a, x.b, x.l1, x.l2, x.beta);
    let a2 = a * a;
    let b2 = b * b;
    let l1l2 = l1 * l2;
    let d1 = (b2 - l1 * l1) * (b2 - l2 * l2) * a2 * a * (a * b * 2.0 - (b2 + a2)) / (b2 - a2) * (2.0 * beta);
    let d2 = a2 * b * (l1l2 * (b2 + l1l2) - a * b2 * (l1 + l2)) * (4.0 * beta);
    let d3 = -((b2 + a2)
        * ((b2 + a2) * l1l2 * (l1 + l2) - a * b2 * (l1 * l1 + l1l2 + l2 * l2 + a2) + a * l1l2 * (l1l2 - a2)))
        * beta;
    (d1, d2, d3)
}

fn literal_e(x: &Atoms) -> Tracked {
    let (a, b, l1, l2, beta) = (x.a, x.b, x.l1, x.l2, x.beta);
    let a2 = a * a;
    let b2 = b * b;
    let t1 = l1 / (b2 - l1 * l1) * (a2 * l1 * 2.0 - (b2 + a2) * (l1 * l1 + a2) / (b * 2.0));
    let t2 = l2 / (b2 - l2 * l2) * (a2 * l2 * 2.0 - (b2 + a2) * (l2 * l2 + a2) / (b * 2.0));
    (t1 - t2) / (l2 - l1) * beta
}

/// The grouped E display with stable atoms. It equals −E.
fn grouped_e_display(x: &Atoms) -> Tracked {
    let (a, b, l1, l2, beta) = (x.a, x.b, x.l1, x.l2, x.beta);
    let a2 = a * a;
    let b2 = b * b;
    let den = x.b2ml1 * x.b2ml2;
    let n1 = x.bml2 * (b * l1 * (-x.l1ma) * 2.0 + l1 * l1 * x.bml2) - l1 * l2 * x.bma * x.bma - b2 * x.l2ma * x.l2ma;
    let t1 = a * n1 / den * beta;
    let n2 = -(a2 * b2) - l1 * l2 * a2 - b2 * (l1 * l1 + l1 * l2 + l2 * l2) + l1 * l1 * l2 * l2;
    let t2 = x.bma * x.bma * n2 / (b * 2.0 * den) * beta;
    t1 + t2
}

/// Shared bracket of script-B and E^h: 2[(L2B² − A²B)(L1 − A) + (AL1L2 + ABL1)(A − B)] / ((B+L1)(B+L2)(λ+a)).
fn bracket_two(x: &Atoms) -> Tracked {
    let (a, b, l1, l2) = (x.a, x.b, x.l1, x.l2);
    // L2·B − A² = (L2 − A)(B + A) + A(B − L2)
    let l2b_ma2 = x.l2ma * (b + a) + a * x.bml2;
    let num = b * l2b_ma2 * x.l1ma - (a * l1 * l2 + a * b * l1) * x.bma;
    num * 2.0 / ((b + l1) * (b + l2) * x.lpa)
}

fn bracket_three(x: &Atoms) -> Tracked {
    (x.a * x.b + x.l1 * x.l2) / ((x.b + x.l1) * (x.b + x.l2))
}

/// Evaluates the boundary symbols. Requires A > 0.
pub fn lopatinski_frame(f: &SymbolFrame) -> Result<LopatinskiFrame> {
    if !(f.a_norm > 0.0) {
        return Err(QthsError::Domain("boundary symbols need xi' != 0".into()));
    }
    let x = Atoms::new(f);
    let (a, b, l1, l2) = (x.a, x.b, x.l1, x.l2);
    let a2 = a * a;

    let (i1, i2) = literal_i(&x);
    let grouped = grouped_lambda_ca(&x);
    let coalescent = (f.l1 - f.l2).norm() < 1e-6 * (f.l1.norm() + f.l2.norm());
    let lambda_ca_i = if coalescent { grouped } else { i1 + i2 / (l2 - l1) };
    let lambda_ca = grouped.v;

    let aa_form1 = b * b * b * (l1 + l2) - a2 * b * b - a2 * l1 * l2;
    let aa_form2 = b * x.lpa * (l1 + l2) - a2 * x.bml1 * x.bml2;

    let d_product = b * x.b2ml1 * x.b2ml2 * grouped * 2.0;
    let (d1, d2, d3) = literal_d(&x);
    let d_sum = d1 + d2 + d3;
    let lambda_ca_dquot = d_product / (b * x.b2ml1 * x.b2ml2 * 2.0);

    let e_grouped = -grouped_e_display(&x);
    let e_first = if coalescent { e_grouped } else { literal_e(&x) };
    let e = e_grouped.v;

    let two = bracket_two(&x);
    let three = bracket_three(&x);
    let bpa = b + a;
    let bscript = a2 * 2.0 / (bpa * bpa) + two + three;

    let n1 = f.n - 1;
    let ixi: Vec<C64> = f.xi().iter().map(|&v| C64::new(0.0, v)).collect();
    let bv = f.b;
    let lpa = f.lambda + f.a;
    let m0p = 2.0 * f.a_norm * bv / ((bv + f.a_norm) * (bv + f.a_norm)) - two.v - three.v;
    let bl = (bv + f.l1) * (bv + f.l2);
    let m1p = -2.0 * (bv * bv * (f.l1 + f.l2) - f.a2() * bv + f.l1 * f.l2 * bv) / (lpa * bl) + bv / bl;
    let eh_scalar = e / lambda_ca * m0p + m1p;
    let eh: Vec<C64> = ixi.iter().map(|&ik| ik * eh_scalar).collect();
    let bs = bscript.v;
    let ehnn: Vec<C64> = ixi
        .iter()
        .map(|&ik| ik * bs / lambda_ca * f.a2() + 2.0 * ik * bv * bv / (f.beta * lpa))
        .collect();
    let mut ehjn = vec![C64::new(0.0, 0.0); n1 * n1];
    let mut ehjl = vec![C64::new(0.0, 0.0); n1 * n1 * n1];
    for j in 0..n1 {
        for k in 0..n1 {
            let djk = if j == k { 1.0 } else { 0.0 };
            ehjn[j * n1 + k] = -(bv * bv + f.a2()) * ixi[k] * ixi[j] * bs / (bv * lambda_ca)
                - 4.0 * ixi[j] * ixi[k] * bv / (f.beta * lpa)
                + 2.0 * bv / f.beta * djk;
            for l in 0..n1 {
                let dkl = if k == l { 1.0 } else { 0.0 };
                let t = ixi[j] * ixi[k] * ixi[l];
                ehjl[(j * n1 + k) * n1 + l] = t * bs / lambda_ca + 2.0 * t / (f.beta * lpa)
                    - 2.0 / f.beta * ixi[j] * dkl
                    - 2.0 / f.beta * ixi[l] * djk;
            }
        }
    }

    Ok(LopatinskiFrame {
        i1: i1.v,
        i2: i2.v,
        lambda_ca,
        ca: lambda_ca / f.lambda,
        aa: aa_form2.v,
        d: d_product.v,
        d1: d1.v,
        d2: d2.v,
        d3: d3.v,
        e,
        bscript: bs,
        eh,
        ehnn,
        ehjn,
        ehjl,
        forms: FormSet {
            lambda_ca_i,
            lambda_ca_grouped: grouped,
            lambda_ca_dquot,
            aa_form1,
            aa_form2,
            d_product,
            d_sum,
            e_first,
            e_grouped,
            coalescent,
        },
    })
}

/// Condition-aware residuals of the form equalities.
pub fn lopatinski_identity_residuals(lf: &LopatinskiFrame) -> Vec<(String, f64)> {
    let f = &lf.forms;
    vec![
        ("aa-two-forms".into(), Tracked::residual(f.aa_form1, f.aa_form2)),
        ("ca-i-vs-grouped".into(), Tracked::residual(f.lambda_ca_i, f.lambda_ca_grouped)),
        ("ca-dquotient-vs-grouped".into(), Tracked::residual(f.lambda_ca_dquot, f.lambda_ca_grouped)),
        ("d-product-vs-sum".into(), Tracked::residual(f.d_product, f.d_sum)),
        ("e-two-forms".into(), Tracked::residual(f.e_first, f.e_grouped)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityMax {
    pub name: String,
    pub max_residual: f64,
    pub worst: Option<PointRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySuite {
    pub points: usize,
    pub tolerance: f64,
    pub identities: Vec<IdentityMax>,
    pub pass: bool,
}

/// Frame and boundary-symbol identities at every point, reduced to the
/// maximum residual per identity.
pub fn identity_suite(points: &[SpectralPoint], params: &SectorParams, tolerance: f64) -> Result<IdentitySuite> {
    let rows: Vec<Vec<(String, f64)>> = points
        .par_iter()
        .map(|p| {
            let f = SymbolFrame::new(p.lambda, &p.xi, params.a, params.beta);
            let lf = lopatinski_frame(&f)?;
            let mut r = frame_identity_residuals(&f);
            r.extend(lopatinski_identity_residuals(&lf));
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let mut identities: Vec<IdentityMax> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (k, (name, v)) in row.iter().enumerate() {
            if identities.len() <= k {
                identities.push(IdentityMax { name: name.clone(), max_residual: 0.0, worst: None });
            }
            let e = &mut identities[k];
            if !(*v <= e.max_residual) {
                e.max_residual = if v.is_nan() { f64::INFINITY } else { *v };
                let region = classify(points[i].lambda.norm(), points[i].a_norm(), params, &Thresholds::default());
                e.worst = Some(PointRecord::from(&ScanPoint { lambda: points[i].lambda, xi: points[i].xi.clone(), region }));
            }
        }
    }
    let pass = identities.iter().all(|e| e.max_residual <= tolerance);
    Ok(IdentitySuite { points: points.len(), tolerance, identities, pass })
}

/// λC_a as |λ| → 0: −a²/(2βA(√(a+A²) − A)).
pub fn ca_zero_limit(a_norm: f64, params: &SectorParams) -> Result<f64> {
    if !(a_norm > 0.0) {
        return Err(QthsError::Domain(format!("A = {a_norm} must be positive")));
    }
    let a = params.a;
    Ok(-a * ((a + a_norm * a_norm).sqrt() + a_norm) / (2.0 * params.beta * a_norm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub limit: f64,
    pub deviations: Vec<f64>,
    /// Maximum deviation over the last third of the sequence.
    pub tail_max: f64,
    pub decreasing: bool,
}

/// Deviation of λC_a from its λ → 0 limit along a sequence of λ values.
pub fn ca_limit_consistency(a_norm: f64, params: &SectorParams, lambda_seq: &[C64]) -> Result<LimitReport> {
    let limit = ca_zero_limit(a_norm, params)?;
    let xi = crate::sector::xi_vector(a_norm, params.n, 0.0);
    let mut deviations = Vec::with_capacity(lambda_seq.len());
    for &lam in lambda_seq {
        let f = SymbolFrame::new(lam, &xi, params.a, params.beta);
        let lf = lopatinski_frame(&f)?;
        deviations.push((lf.lambda_ca - limit).norm());
    }
    let start = deviations.len() - deviations.len().div_ceil(3);
    let tail_max = deviations[start..].iter().cloned().fold(0.0, f64::max);
    let decreasing = deviations.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
    Ok(LimitReport { limit, deviations, tail_max, decreasing })
}

/// −βz1z2(λ+a)A, the leading behaviour of D for large A.
pub fn d_high_a_asymptote(f: &SymbolFrame) -> C64 {
    -f.beta * f.z1 * f.z2 * (f.lambda + f.a) * f.a_norm
}

/// −β(λ+a)²√z1√z2(√z1 + √z2), the leading behaviour of D for small A.
pub fn d_low_a_asymptote(f: &SymbolFrame) -> C64 {
    let (s1, s2) = (f.z1.sqrt(), f.z2.sqrt());
    -f.beta * (f.lambda + f.a) * (f.lambda + f.a) * s1 * s2 * (s1 + s2)
}

pub const BOUND_IDS: [&str; 6] = [
    "p2-normalized",
    "lambda-ca",
    "lambda32-ca-low",
    "aa-normalized",
    "d-high",
    "d-low",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub xi: Vec<f64>,
    pub region: Region,
}

impl From<&ScanPoint> for PointRecord {
    fn from(p: &ScanPoint) -> Self {
        PointRecord { lambda_re: p.lambda.re, lambda_im: p.lambda.im, xi: p.xi.clone(), region: p.region }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub id: String,
    pub infimum: Option<f64>,
    pub argmin: Option<PointRecord>,
    pub count: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundScanReport {
    pub entries: Vec<BoundEntry>,
    /// Per-point values in [`BOUND_IDS`] order; `None` outside the region.
    pub values: Vec<[Option<f64>; 6]>,
    pub floor: f64,
    pub pass: bool,
}

/// Normalized quantities at one point, `None` where a quantity is restricted
/// to another region.
pub fn bound_quantities(p: &ScanPoint, params: &SectorParams) -> Result<[Option<f64>; 6]> {
    let f = SymbolFrame::new(p.lambda, &p.xi, params.a, params.beta);
    let lf = lopatinski_frame(&f)?;
    let lam = p.lambda.norm();
    let sl = lam.sqrt();
    let a = f.a_norm;
    let pp = p2(a, p.lambda, params.a, params.beta).norm() / ((sl + a).powi(2) * (sl + 1.0 + a).powi(2));
    let lca = lf.lambda_ca.norm();
    let low = p.region == Region::LowA;
    let high = p.region == Region::HighA;
    Ok([
        Some(pp),
        Some(lca),
        low.then(|| sl * lca),
        Some(lf.aa.norm() / (lam + 1.0).powi(2)),
        high.then(|| lf.d.norm() / (lam * (lam + 1.0).powi(2) * a)),
        low.then(|| lf.d.norm() / sl),
    ])
}

/// Infima of the six normalized lower-bound quantities over the grid.
pub fn scan_lower_bounds(grid: &ScanGrid, params: &SectorParams) -> Result<BoundScanReport> {
    if grid.points.is_empty() {
        return Err(QthsError::Grid("empty scan grid".into()));
    }
    for p in &grid.points {
        if !in_sector(p.lambda, params) {
            return Err(QthsError::Domain(format!("lambda = {} outside the sector", p.lambda)));
        }
    }
    let values: Vec<[Option<f64>; 6]> = grid
        .points
        .par_iter()
        .map(|p| bound_quantities(p, params))
        .collect::<Result<_>>()?;
    let floor = 1e-8;
    let mut entries = Vec::with_capacity(6);
    for (q, id) in BOUND_IDS.iter().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        let mut count = 0;
        for (i, v) in values.iter().enumerate() {
            if let Some(x) = v[q] {
                count += 1;
                let x = if x.is_nan() { f64::NEG_INFINITY } else { x };
                if best.is_none_or(|(b, _)| x < b) {
                    best = Some((x, i));
                }
            }
        }
        let pass = best.is_none_or(|(b, _)| b.is_finite() && b >= floor);
        entries.push(BoundEntry {
            id: id.to_string(),
            infimum: best.map(|(b, _)| b),
            argmin: best.map(|(_, i)| PointRecord::from(&grid.points[i])),
            count,
            pass,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(BoundScanReport { entries, values, floor, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn frame(lam: C64, a: f64, al: f64, beta: f64) -> LopatinskiFrame {
        lopatinski_frame(&SymbolFrame::new(lam, &[a], al, beta)).unwrap()
    }

    #[test]
    fn forms_agree_at_moderate_point() {
        let lf = frame(C64::from_polar(0.1, 0.7), 0.9, 1.0, 0.5);
        for (name, r) in lopatinski_identity_residuals(&lf) {
            assert!(r < 1e-12, "{name}: {r}");
        }
        assert!((lf.forms.d_sum.v - lf.d).norm() < 1e-12 * lf.d.norm().max(lf.forms.d_sum.m));
    }

    #[test]
    fn grouped_e_display_is_negated() {
        let lf = frame(C64::from_polar(0.05, -1.2), 1.3, 1.0, 0.5);
        let first = lf.forms.e_first.v;
        assert!((first - lf.e).norm() < 1e-10 * first.norm());
    }

    #[test]
    fn zero_limit_value() {
        let p = SectorParams::new(2, 1.0, 1.0, PI / 3.0, 0.5).unwrap();
        let v = ca_zero_limit(1.0, &p).unwrap();
        assert!((v + (2f64.sqrt() + 1.0) / 2.0).abs() < 1e-12);
        // saturates at -a/beta for large A
        let r = ca_zero_limit(2e3, &p).unwrap() / ca_zero_limit(1e3, &p).unwrap();
        assert!((r - 1.0).abs() < 1e-3);
        assert!((ca_zero_limit(1e6, &p).unwrap() + 1.0).abs() < 1e-5);
        let pn = SectorParams { beta: -1.0, ..p };
        assert_eq!(ca_zero_limit(1.0, &pn).unwrap(), -v);
        assert!(ca_zero_limit(0.0, &p).is_err());
    }

    #[test]
    fn beta_oddness() {
        let l = C64::from_polar(0.07, 0.4);
        let p = frame(l, 0.6, 1.0, 0.8);
        let m = frame(l, 0.6, 1.0, -0.8);
        assert!((p.lambda_ca + m.lambda_ca).norm() < 1e-13 * p.lambda_ca.norm());
        assert!((p.d + m.d).norm() < 1e-13 * p.d.norm());
        assert!((p.e + m.e).norm() < 1e-13 * p.e.norm());
    }

    #[test]
    fn zero_a_rejected() {
        assert!(lopatinski_frame(&SymbolFrame::new(C64::new(0.1, 0.0), &[0.0], 1.0, 0.5)).is_err());
    }

    #[test]
    fn n2_single_entry_family() {
        let lf = frame(C64::new(0.1, 0.0), 1.0, 1.0, 0.5);
        assert_eq!(lf.ehjl.len(), 1);
        assert_eq!(lf.ehjn.len(), 1);
    }

    #[test]
    fn tracked_residual_flags_cancellation_only() {
        let big = Tracked::real(1e8);
        let x = big + Tracked::real(1.0) - big;
        let y = Tracked::real(1.0);
        assert!(Tracked::residual(x, y) < 1e-15);
        assert!(Tracked::residual(Tracked::real(1.0), Tracked::real(1.1)) > 0.05);
    }
}
