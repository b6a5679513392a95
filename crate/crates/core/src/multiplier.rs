//! Empirical membership tests for the anisotropic multiplier classes
//! M_{s,k}, M̃_{s,k} and M'_{s,1}, and the catalog of claimed memberships.
//!
//! Derivatives (τ∂_τ)^ℓ D^α_{ξ'} are estimated with central differences whose
//! steps follow the local scale max(|ξ'|, |λ|^{1/2}). A claim passes when the
//! supremum of the derivative-to-weight ratio is finite and does not grow by
//! more than a factor 2 when the grid is refined.

use crate::error::{QthsError, Result};
use crate::lopatinski::{lopatinski_frame, LopatinskiFrame};
use crate::sector::{build_scan_grid, in_open_sector, GridSpec, Region, ScanGrid, SectorParams};
use crate::symbols::SymbolFrame;
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    M,
    MTilde,
    MPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimRegion {
    Full,
    LowA,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub family: Family,
    pub s: f64,
    pub kind: u8,
    pub region: ClaimRegion,
    /// Extra factor |λ|^p multiplying the weight (inverse bounds of C_a).
    pub lambda_power: f64,
}

impl ClassSpec {
    pub const fn new(family: Family, s: f64, kind: u8) -> Self {
        ClassSpec { family, s, kind, region: ClaimRegion::Full, lambda_power: 0.0 }
    }

    pub fn weight(&self, order: usize, lambda_abs: f64, a: f64) -> f64 {
        let sl = lambda_abs.sqrt();
        let k = order as f64;
        let base = match (self.family, self.kind) {
            (Family::M, 1) => (sl + a).powf(self.s - k),
            (Family::MTilde, 1) => (sl + 1.0 + a).powf(self.s) * (sl + a).powf(-k),
            (Family::M, _) => (sl + a).powf(self.s) * a.powf(-k),
            (Family::MTilde, _) => (sl + 1.0 + a).powf(self.s) * a.powf(-k),
            (Family::MPrime, _) => (sl + 1.0 + a).powf(self.s - k),
        };
        base * lambda_abs.powf(self.lambda_power)
    }
}

/// Symbols of the catalog, evaluated jointly from one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolId {
    A1,
    A2,
    B,
    BInv,
    L1,
    L1Inv,
    L2,
    L2Inv,
    APlusBInv,
    APlusB,
    BPlusL1Inv,
    BPlusL2Inv,
    APlusL1Inv,
    APlusL2Inv,
    BMinusA,
    L2MinusA,
    L1MinusB,
    L2MinusB,
    L1MinusAOverB2L1,
    L1MinusAOverB2L2,
    L2MinusAOverB2L1,
    BMinusAOverB2L1,
    BMinusL2OverB2L1,
    WeightedL2MinusAOverB2L2,
    WeightedBMinusAOverB2L2,
    LambdaCa,
    CaInv,
    LambdaCaInv,
    AaOverLambdaPlusA,
    LambdaPlusAOverAa,
    EM0,
    EM1,
    EhM0,
    EhM1,
    Bscript,
    BscriptA2,
    BscriptM4,
    BSquaredOverBeta,
    BlOverLambdaPlusOne,
}

pub const SYMBOL_COUNT: usize = 39;

const ALL_SYMBOLS: [SymbolId; SYMBOL_COUNT] = [
    SymbolId::A1,
    SymbolId::A2,
    SymbolId::B,
    SymbolId::BInv,
    SymbolId::L1,
    SymbolId::L1Inv,
    SymbolId::L2,
    SymbolId::L2Inv,
    SymbolId::APlusBInv,
    SymbolId::APlusB,
    SymbolId::BPlusL1Inv,
    SymbolId::BPlusL2Inv,
    SymbolId::APlusL1Inv,
    SymbolId::APlusL2Inv,
    SymbolId::BMinusA,
    SymbolId::L2MinusA,
    SymbolId::L1MinusB,
    SymbolId::L2MinusB,
    SymbolId::L1MinusAOverB2L1,
    SymbolId::L1MinusAOverB2L2,
    SymbolId::L2MinusAOverB2L1,
    SymbolId::BMinusAOverB2L1,
    SymbolId::BMinusL2OverB2L1,
    SymbolId::WeightedL2MinusAOverB2L2,
    SymbolId::WeightedBMinusAOverB2L2,
    SymbolId::LambdaCa,
    SymbolId::CaInv,
    SymbolId::LambdaCaInv,
    SymbolId::AaOverLambdaPlusA,
    SymbolId::LambdaPlusAOverAa,
    SymbolId::EM0,
    SymbolId::EM1,
    SymbolId::EhM0,
    SymbolId::EhM1,
    SymbolId::Bscript,
    SymbolId::BscriptA2,
    SymbolId::BscriptM4,
    SymbolId::BSquaredOverBeta,
    SymbolId::BlOverLambdaPlusOne,
];

impl SymbolId {
    pub fn index(self) -> usize {
        ALL_SYMBOLS.iter().position(|&s| s == self).unwrap()
    }

    pub fn all() -> &'static [SymbolId] {
        &ALL_SYMBOLS
    }

    pub fn eval(self, lambda: C64, xi: &[f64], a: f64, beta: f64) -> Result<C64> {
        Ok(catalog_values(lambda, xi, a, beta)?[self.index()])
    }
}

/// Pieces of the E-family obtained from the groupings used to bound them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhPieces {
    /// m0 of the E^h decomposition
    pub m0: C64,
    /// m1 of the E^h decomposition
    pub m1: C64,
    /// script-B rebuilt from the same groupings
    pub bscript: C64,
    /// m0, m1 of the E decomposition E = (1 + 1/λ)(A m0 + m1)
    pub e_m0: C64,
    pub e_m1: C64,
}

pub fn eh_pieces(f: &SymbolFrame) -> EhPieces {
    let (a, b, l1, l2) = (C64::new(f.a_norm, 0.0), f.b, f.l1, f.l2);
    let lpa = f.lambda + f.a;
    let (z1, z2) = (f.z1, f.z2);
    let bl = (b + l1) * (b + l2);
    // second term of script-B, split as in its bound
    let s1 = z1 * z2 * b * (b + a) / (lpa * bl * (l1 + a) * (l2 + a))
        + z1 * (lpa - z2) * b * a / (lpa * bl * (b + l2) * (l1 + a));
    let s2 = -(a * l1 * l2 + a * b * l1) / (bl * (b + a));
    let two = 2.0 * (s1 + s2);
    let three = (a * b + l1 * l2) / bl;
    let m0 = 2.0 * a * b / ((b + a) * (b + a)) - two - three;
    let m1 = -(2.0 * (b * b * (l1 + l2) - a * a * b + l1 * l2 * b) / bl - lpa * b / bl);
    let bscript = 2.0 * a * a / ((b + a) * (b + a)) + two + three;

    let den = f.b2_minus_l1sq() * f.b2_minus_l2sq();
    let (bml2, bma, l1ma, l2ma) = (f.b_minus_l2(), f.b_minus_a(), f.l1_minus_a(), f.l2_minus_a());
    let t1 = a * bml2 * (-2.0 * b * l1 * l1ma + l1 * l1 * bml2) / den;
    let t2 = (-l1 * l2 * bma * bma - b * b * l2ma * l2ma) * a / den
        + bma * bma * (-a * a * b * b - l1 * l2 * a * a) / (2.0 * b * den);
    let t3 = bma * bma * (-b * b * (l1 * l1 + l1 * l2 + l2 * l2) + l1 * l1 * l2 * l2) / (2.0 * b * den);
    let w = f.lambda / (f.lambda + 1.0);
    // the grouped display equals −E
    let e_m0 = -w * f.beta * (t1 + t2) / a;
    let e_m1 = -w * f.beta * t3;
    EhPieces { m0, m1, bscript, e_m0, e_m1 }
}

/// Values of every catalog symbol at one point, in [`SymbolId::all`] order.
pub fn catalog_values(lambda: C64, xi: &[f64], a: f64, beta: f64) -> Result<Vec<C64>> {
    let f = SymbolFrame::new(lambda, xi, a, beta);
    let lf = lopatinski_frame(&f)?;
    Ok(values_from(&f, &lf))
}

fn values_from(f: &SymbolFrame, lf: &LopatinskiFrame) -> Vec<C64> {
    let am = C64::new(f.a_norm, 0.0);
    let (b, l1, l2) = (f.b, f.l1, f.l2);
    let lam = f.lambda;
    let lpa = lam + f.a;
    let w = lam / (lam + 1.0);
    let p = eh_pieces(f);
    let one = C64::new(1.0, 0.0);
    let bl1 = f.b_minus_a() * (l1 + am) - f.b_minus_l1() * am;
    let m4 = -(b * b + am * am) * p.bscript / b;
    vec![
        am,
        am * am,
        b,
        one / b,
        l1,
        one / l1,
        l2,
        one / l2,
        one / (am + b),
        am + b,
        one / (b + l1),
        one / (b + l2),
        one / (am + l1),
        one / (am + l2),
        f.b_minus_a(),
        f.l2_minus_a(),
        -f.b_minus_l1(),
        -f.b_minus_l2(),
        f.l1_minus_a() / f.b2_minus_l1sq(),
        f.l1_minus_a() / f.b2_minus_l2sq(),
        f.l2_minus_a() / f.b2_minus_l1sq(),
        f.b_minus_a() / f.b2_minus_l1sq(),
        f.b_minus_l2() / f.b2_minus_l1sq(),
        w * f.l2_minus_a() / f.b2_minus_l2sq(),
        w * f.b_minus_a() / f.b2_minus_l2sq(),
        lf.lambda_ca,
        one / lf.ca,
        one / lf.lambda_ca,
        lf.aa / lpa,
        lpa / lf.aa,
        p.e_m0,
        p.e_m1,
        p.m0,
        p.m1,
        p.bscript,
        p.bscript * am * am,
        m4,
        2.0 * b * b / f.beta,
        bl1 / (lam + 1.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub symbol: SymbolId,
    pub spec: ClassSpec,
}

/// Every membership claim checked by the lab.
pub fn catalog() -> Vec<Claim> {
    use Family::*;
    use SymbolId as S;
    let c = |id: &str, symbol: S, family: Family, s: f64, kind: u8| Claim {
        id: id.to_string(),
        symbol,
        spec: ClassSpec::new(family, s, kind),
    };
    let mut v = vec![
        c("A in M(1,2)", S::A1, M, 1.0, 2),
        c("A^2 in M(2,2)", S::A2, M, 2.0, 2),
        c("B in M~(1,1)", S::B, MTilde, 1.0, 1),
        c("B^-1 in M~(-1,1)", S::BInv, MTilde, -1.0, 1),
        c("L1 in M(1,1)", S::L1, M, 1.0, 1),
        c("L1 in M~(1,1)", S::L1, MTilde, 1.0, 1),
        c("L1^-1 in M(-1,1)", S::L1Inv, M, -1.0, 1),
        c("L2 in M~(1,1)", S::L2, MTilde, 1.0, 1),
        c("L2^-1 in M~(-1,1)", S::L2Inv, MTilde, -1.0, 1),
        c("(A+B)^-1 in M~(-1,2)", S::APlusBInv, MTilde, -1.0, 2),
        c("(A+B) in M~(1,2)", S::APlusB, MTilde, 1.0, 2),
        c("(B+L1)^-1 in M~(-1,1)", S::BPlusL1Inv, MTilde, -1.0, 1),
        c("(B+L2)^-1 in M~(-1,1)", S::BPlusL2Inv, MTilde, -1.0, 1),
        c("(A+L1)^-1 in M(-1,2)", S::APlusL1Inv, M, -1.0, 2),
        c("(A+L2)^-1 in M~(-1,2)", S::APlusL2Inv, MTilde, -1.0, 2),
        c("B-A in M~(-1,2)", S::BMinusA, MTilde, -1.0, 2),
        c("L2-A in M~(-1,2)", S::L2MinusA, MTilde, -1.0, 2),
        c("L2-A in M(0,2)", S::L2MinusA, M, 0.0, 2),
        c("L1-B in M~(-1,1)", S::L1MinusB, MTilde, -1.0, 1),
        c("L2-B in M~(-1,1)", S::L2MinusB, MTilde, -1.0, 1),
        c("L1-B in M(0,1)", S::L1MinusB, M, 0.0, 1),
        c("L2-B in M(0,1)", S::L2MinusB, M, 0.0, 1),
        c("(L1-A)/(B^2-L1^2) in M(-1,2)", S::L1MinusAOverB2L1, M, -1.0, 2),
        c("(L1-A)/(B^2-L2^2) in M(-1,2)", S::L1MinusAOverB2L2, M, -1.0, 2),
        c("(L2-A)/(B^2-L1^2) in M~(-1,2)", S::L2MinusAOverB2L1, MTilde, -1.0, 2),
        c("(B-A)/(B^2-L1^2) in M~(-1,2)", S::BMinusAOverB2L1, MTilde, -1.0, 2),
        c("(B-L2)/(B^2-L1^2) in M~(-1,1)", S::BMinusL2OverB2L1, MTilde, -1.0, 1),
        c("lambda/(lambda+1) (L2-A)/(B^2-L2^2) in M~(-1,2)", S::WeightedL2MinusAOverB2L2, MTilde, -1.0, 2),
        c("lambda/(lambda+1) (B-A)/(B^2-L2^2) in M~(-1,2)", S::WeightedBMinusAOverB2L2, MTilde, -1.0, 2),
        c("lambda Ca in M(0,2)", S::LambdaCa, M, 0.0, 2),
        c("(lambda Ca)^-1 in M(0,2)", S::LambdaCaInv, M, 0.0, 2),
        c("(lambda+a)^-1 Aa in M~(2,1)", S::AaOverLambdaPlusA, MTilde, 2.0, 1),
        c("(lambda+a) Aa^-1 in M~(-2,1)", S::LambdaPlusAOverAa, MTilde, -2.0, 1),
        c("E split m0 in M(0,2)", S::EM0, M, 0.0, 2),
        c("E split m1 in M~(1,2)", S::EM1, MTilde, 1.0, 2),
        c("E^h split m0 in M(0,2)", S::EhM0, M, 0.0, 2),
        c("E^h split m1 in M~(1,1)", S::EhM1, MTilde, 1.0, 1),
        c("script-B in M(0,2)", S::Bscript, M, 0.0, 2),
        c("script-B A^2 in M(2,2)", S::BscriptA2, M, 2.0, 2),
        c("-(B^2+A^2) script-B / B in M~(1,2)", S::BscriptM4, MTilde, 1.0, 2),
        c("2B^2/beta in M~(2,1)", S::BSquaredOverBeta, MTilde, 2.0, 1),
        c("(B L1 - A^2)/(lambda+1) in M(0,2)", S::BlOverLambdaPlusOne, M, 0.0, 2),
    ];
    v.push(Claim {
        id: "|lambda|^-1 Ca^-1 bounded by |xi'|^-|alpha|".into(),
        symbol: S::CaInv,
        spec: ClassSpec { lambda_power: 1.0, ..ClassSpec::new(M, 0.0, 2) },
    });
    v.push(Claim {
        id: "|lambda|^-3/2 Ca^-1 bounded by |xi'|^-|alpha| on low A".into(),
        symbol: S::CaInv,
        spec: ClassSpec { lambda_power: 1.5, region: ClaimRegion::LowA, ..ClassSpec::new(M, 0.0, 2) },
    });
    v
}

/// All multi-indices of length `dim` with |α| ≤ `max_order`, graded.
pub fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=max_order {
        if dim == 1 {
            out.push(vec![total]);
        } else {
            for i in (0..=total).rev() {
                out.push(vec![i, total - i]);
            }
        }
    }
    out
}

fn stencil_1d(order: usize) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        _ => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    }
}

/// Step sizes used for a derivative at `(λ, ξ')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Steps {
    pub h: f64,
    pub delta: f64,
    /// 0 for a central τ-difference, ±1 for a one-sided one towards ±iτ
    pub side: i8,
}

pub fn choose_steps(lambda: C64, xi: &[f64], alpha: &[usize], ell: usize, epsilon: f64) -> Result<Steps> {
    let a = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let reach = alpha.iter().map(|&k| if k >= 3 { 2.0 } else if k > 0 { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let reach = reach.iter().map(|r| r * r).sum::<f64>().sqrt();
    let mut h = 1e-4 * a.max(lambda.norm().sqrt());
    if reach > 0.0 && h * reach >= 0.1 * a {
        h = 0.1 * a / reach;
        if h == 0.0 {
            return Err(QthsError::Stencil(format!("xi' = {xi:?} too close to the origin")));
        }
    }
    let delta = 1e-4 * lambda.norm();
    let mut side = 0;
    if ell == 1 {
        let inside = |d: f64| in_open_sector(lambda + C64::new(0.0, d), epsilon);
        if !(inside(delta) && inside(-delta)) {
            side = if inside(delta) && inside(2.0 * delta) {
                1
            } else if inside(-delta) && inside(-2.0 * delta) {
                -1
            } else {
                return Err(QthsError::Stencil(format!("lambda = {lambda} too close to the sector edge")));
            };
        }
    }
    Ok(Steps { h, delta, side })
}

/// Central-difference estimate of (τ∂_τ)^ℓ D^α m for a vector of symbols.
pub fn d_alpha_vec<F>(m: &F, lambda: C64, xi: &[f64], alpha: &[usize], ell: usize, epsilon: f64) -> Result<Vec<C64>>
where
    F: Fn(C64, &[f64]) -> Result<Vec<C64>>,
{
    Ok(d_alpha_bounded(m, lambda, xi, alpha, ell, epsilon)?.0)
}

/// Relative accuracy assumed for each symbol evaluation.
pub const EVAL_ACCURACY: f64 = 1e-15;

/// [`d_alpha_vec`] together with a rounding bound per entry: the stencil
/// applied to |m| and scaled by [`EVAL_ACCURACY`]. Differences below the
/// bound are not resolved.
pub fn d_alpha_bounded<F>(m: &F, lambda: C64, xi: &[f64], alpha: &[usize], ell: usize, epsilon: f64) -> Result<(Vec<C64>, Vec<f64>)>
where
    F: Fn(C64, &[f64]) -> Result<Vec<C64>>,
{
    if alpha.iter().sum::<usize>() > 3 || alpha.len() != xi.len() || ell > 1 {
        return Err(QthsError::InvalidParameter(format!("alpha = {alpha:?}, ell = {ell}")));
    }
    let st = choose_steps(lambda, xi, alpha, ell, epsilon)?;
    let taus: Vec<(f64, f64)> = if ell == 0 {
        vec![(0.0, 1.0)]
    } else if st.side == 0 {
        vec![(-st.delta, -0.5 / st.delta), (st.delta, 0.5 / st.delta)]
    } else {
        let d = st.side as f64 * st.delta;
        vec![(0.0, -1.5 / d), (d, 2.0 / d), (2.0 * d, -0.5 / d)]
    };
    let mut acc: Option<Vec<C64>> = None;
    let mut bound: Vec<f64> = Vec::new();
    let mut shifted = xi.to_vec();
    let s0 = stencil_1d(alpha[0]);
    let s1: &[(i32, f64)] = if alpha.len() > 1 { stencil_1d(alpha[1]) } else { &[(0, 1.0)] };
    let scale = st.h.powi(alpha.iter().sum::<usize>() as i32);
    for &(o0, w0) in s0 {
        for &(o1, w1) in s1 {
            shifted[0] = xi[0] + o0 as f64 * st.h;
            if xi.len() > 1 {
                shifted[1] = xi[1] + o1 as f64 * st.h;
            }
            let mut local: Option<Vec<C64>> = None;
            let w = (w0 * w1 / scale).abs();
            for &(dt, wt) in &taus {
                let vals = m(lambda + C64::new(0.0, dt), &shifted)?;
                bound.resize(vals.len(), 0.0);
                bound.iter_mut().zip(&vals).for_each(|(b, v)| *b += w * wt.abs() * v.norm());
                match local.as_mut() {
                    None => local = Some(vals.iter().map(|v| v * wt).collect()),
                    Some(l) => l.iter_mut().zip(&vals).for_each(|(l, v)| *l += v * wt),
                }
            }
            let local = local.unwrap_or_default();
            let w = w0 * w1 / scale;
            match acc.as_mut() {
                None => acc = Some(local.iter().map(|v| v * w).collect()),
                Some(s) => s.iter_mut().zip(&local).for_each(|(s, v)| *s += v * w),
            }
        }
    }
    let mut out = acc.unwrap_or_default();
    bound.iter_mut().for_each(|b| *b *= EVAL_ACCURACY);
    if ell == 1 {
        out.iter_mut().for_each(|v| *v *= lambda.im);
        bound.iter_mut().for_each(|b| *b *= lambda.im.abs());
    }
    Ok((out, bound))
}

/// Scalar version of [`d_alpha_vec`].
pub fn d_alpha<F>(m: &F, lambda: C64, xi: &[f64], alpha: &[usize], ell: usize, epsilon: f64) -> Result<C64>
where
    F: Fn(C64, &[f64]) -> Result<C64>,
{
    let wrapped = |l: C64, x: &[f64]| m(l, x).map(|v| vec![v]);
    Ok(d_alpha_vec(&wrapped, lambda, xi, alpha, ell, epsilon)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEntry {
    pub ell: usize,
    pub alpha: Vec<usize>,
    pub sup_coarse: f64,
    pub sup_fine: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub id: String,
    pub spec: ClassSpec,
    pub max_order: usize,
    pub points_coarse: usize,
    pub points_fine: usize,
    pub entries: Vec<OrderEntry>,
    pub pass: bool,
}

/// Sup over the grid of every (claim, ℓ, α) ratio. Index: [claim][combo].
fn sup_table(claims: &[Claim], grid: &ScanGrid, params: &SectorParams, combos: &[(usize, Vec<usize>)]) -> Result<Vec<Vec<f64>>> {
    let eval = |l: C64, x: &[f64]| catalog_values(l, x, params.a, params.beta);
    let per_point: Vec<Vec<Vec<f64>>> = grid
        .points
        .par_iter()
        .map(|p| -> Result<Vec<Vec<f64>>> {
            let a = p.a_norm();
            let lam_abs = p.lambda.norm();
            let mut rows = vec![vec![f64::NAN; combos.len()]; claims.len()];
            for (ci, (ell, alpha)) in combos.iter().enumerate() {
                let (d, bound) = d_alpha_bounded(&eval, p.lambda, &p.xi, alpha, *ell, params.epsilon)?;
                let order = alpha.iter().sum();
                for (k, cl) in claims.iter().enumerate() {
                    if cl.spec.region == ClaimRegion::LowA && p.region != Region::LowA {
                        continue;
                    }
                    let i = cl.symbol.index();
                    let v = if d[i].norm() <= bound[i] { 0.0 } else { d[i].norm() };
                    rows[k][ci] = v / cl.spec.weight(order, lam_abs, a);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut sup = vec![vec![0.0f64; combos.len()]; claims.len()];
    for rows in &per_point {
        for (k, row) in rows.iter().enumerate() {
            for (ci, &v) in row.iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                sup[k][ci] = if v.is_finite() { sup[k][ci].max(v) } else { f64::INFINITY };
            }
        }
    }
    Ok(sup)
}

/// The 2× refined version of a grid spec (nested samples).
pub fn refine(spec: &GridSpec) -> GridSpec {
    GridSpec {
        n_radial: 2 * spec.n_radial - 1,
        n_angle: 2 * spec.n_angle - 1,
        n_xi: 2 * spec.n_xi - 1,
        ..*spec
    }
}

/// Runs the membership test for a list of claims on a grid and its refinement.
pub fn estimate_claims(claims: &[Claim], params: &SectorParams, spec: &GridSpec, max_order: usize) -> Result<Vec<MembershipReport>> {
    if max_order > 3 {
        return Err(QthsError::InvalidParameter("max_order must be at most 3".into()));
    }
    let coarse = build_scan_grid(params, spec)?;
    let fine = build_scan_grid(params, &refine(spec))?;
    let combos: Vec<(usize, Vec<usize>)> = [0usize, 1]
        .iter()
        .flat_map(|&ell| multi_indices(params.n - 1, max_order).into_iter().map(move |a| (ell, a)))
        .collect();
    // entries that vanish identically only carry rounding noise
    let noise = |row: &[f64]| 1e-6 * row.iter().cloned().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let sc = sup_table(claims, &coarse, params, &combos)?;
    let sf = sup_table(claims, &fine, params, &combos)?;
    Ok(claims
        .iter()
        .enumerate()
        .map(|(k, cl)| {
            let floor = noise(&sf[k]).max(noise(&sc[k]));
            let entries: Vec<OrderEntry> = combos
                .iter()
                .enumerate()
                .map(|(ci, (ell, alpha))| {
                    let (c, f) = (sc[k][ci], sf[k][ci]);
                    OrderEntry {
                        ell: *ell,
                        alpha: alpha.clone(),
                        sup_coarse: c,
                        sup_fine: f,
                        stable: c.is_finite() && f.is_finite() && f.max(floor) <= 2.0 * c.max(floor),
                    }
                })
                .collect();
            let pass = entries.iter().all(|e| e.stable);
            MembershipReport {
                id: cl.id.clone(),
                spec: cl.spec,
                max_order,
                points_coarse: coarse.points.len(),
                points_fine: fine.points.len(),
                entries,
                pass,
            }
        })
        .collect())
}

/// Membership test for a single catalog claim.
pub fn estimate_class(claim: &Claim, params: &SectorParams, spec: &GridSpec, max_order: usize) -> Result<MembershipReport> {
    Ok(estimate_claims(std::slice::from_ref(claim), params, spec, max_order)?.remove(0))
}

/// Grid used by the catalog run: coarse enough for the time budget, still
/// spanning |λ| ∈ [c0·2⁻²⁰, c0] and |ξ'| ∈ [1e-4, 1e4]·max(1, √a).
pub fn catalog_grid_spec() -> GridSpec {
    GridSpec { n_radial: 33, n_angle: 13, n_xi: 33, ..GridSpec::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhResiduals {
    pub eh: f64,
    pub ehnn: f64,
    pub ehjn: f64,
    pub ehjl: f64,
    pub e: f64,
}

impl EhResiduals {
    pub fn max(&self) -> f64 {
        [self.eh, self.ehnn, self.ehjn, self.ehjl, self.e].into_iter().fold(0.0, f64::max)
    }
}

/// Rebuilds the E-family from the m_i groupings and compares with the
/// displayed formulas held in the frame.
pub fn decompose_eh(f: &SymbolFrame, lf: &LopatinskiFrame) -> EhResiduals {
    let p = eh_pieces(f);
    let n1 = f.n - 1;
    let ixi: Vec<C64> = f.xi().iter().map(|&v| C64::new(0.0, v)).collect();
    let lca = lf.lambda_ca;
    let lpa = f.lambda + f.a;
    let b = f.b;
    let a2 = f.a2();
    let beta = f.beta;
    let rel = |x: C64, y: C64, scale: f64| (x - y).norm() / scale.max(x.norm()).max(y.norm()).max(1e-300);
    let mut r_eh: f64 = 0.0;
    let mut r_nn: f64 = 0.0;
    let mut r_jn: f64 = 0.0;
    let mut r_jl: f64 = 0.0;
    let (m2, m3) = (p.bscript * a2, 2.0 * b * b / beta);
    let (m4, m5, m6) = (-(b * b + a2) * p.bscript / b, -4.0 * b / beta, 2.0 * b / beta);
    let (m7, m8, m9, m10) = (p.bscript, C64::new(2.0 / beta, 0.0), -2.0 / beta, -2.0 / beta);
    for k in 0..n1 {
        let t1 = lf.e / lca * p.m0;
        let t2 = p.m1 / lpa;
        let rec = ixi[k] * (t1 + t2);
        r_eh = r_eh.max(rel(rec, lf.eh[k], ixi[k].norm() * (t1.norm() + t2.norm())));
        let (u1, u2) = (m2 / lca, m3 / lpa);
        let rec = ixi[k] * (u1 + u2);
        r_nn = r_nn.max(rel(rec, lf.ehnn[k], ixi[k].norm() * (u1.norm() + u2.norm())));
        for j in 0..n1 {
            let djk = if j == k { 1.0 } else { 0.0 };
            let (v1, v2) = (m4 / lca, m5 / lpa);
            let rec = ixi[j] * ixi[k] * (v1 + v2) + m6 * djk;
            let sc = (ixi[j] * ixi[k]).norm() * (v1.norm() + v2.norm()) + m6.norm() * djk;
            r_jn = r_jn.max(rel(rec, lf.ehjn[j * n1 + k], sc));
            for l in 0..n1 {
                let dkl = if k == l { 1.0 } else { 0.0 };
                let (w1, w2) = (m7 / lca, m8 / lpa);
                let t = ixi[j] * ixi[k] * ixi[l];
                let rec = t * (w1 + w2) + ixi[j] * m9 * dkl + ixi[l] * m10 * djk;
                let sc = t.norm() * (w1.norm() + w2.norm()) + (ixi[j].norm() * dkl + ixi[l].norm() * djk) * m9.abs();
                r_jl = r_jl.max(rel(rec, lf.ehjl[(j * n1 + k) * n1 + l], sc));
            }
        }
    }
    let am = f.a_norm;
    let factor = 1.0 + 1.0 / f.lambda;
    let rec_e = factor * (am * p.e_m0 + p.e_m1);
    let r_e = rel(rec_e, lf.e, factor.norm() * (am * p.e_m0.norm() + p.e_m1.norm()));
    EhResiduals { eh: r_eh, ehnn: r_nn, ehjn: r_jn, ehjl: r_jl, e: r_e }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn d_alpha_polynomial_and_constant() {
        let a2 = |_: C64, x: &[f64]| -> Result<C64> { Ok(C64::new(x.iter().map(|v| v * v).sum(), 0.0)) };
        let v = d_alpha(&a2, C64::new(0.1, 0.05), &[0.7, 0.2], &[2, 0], 0, PI / 3.0).unwrap();
        assert!((v - 2.0).norm() < 1e-6);
        let c = |_: C64, _: &[f64]| -> Result<C64> { Ok(C64::new(3.0, 1.0)) };
        for alpha in multi_indices(2, 3).into_iter().skip(1) {
            let v = d_alpha(&c, C64::new(0.1, 0.05), &[0.7, 0.2], &alpha, 0, PI / 3.0).unwrap();
            assert!(v.norm() < 1e-8);
        }
    }

    #[test]
    fn tau_derivative_of_b() {
        let lam = C64::new(0.05, 0.12);
        let bf = |l: C64, x: &[f64]| -> Result<C64> { Ok((l + 1.0 + x[0] * x[0]).sqrt()) };
        let v = d_alpha(&bf, lam, &[0.8], &[0], 1, PI / 3.0).unwrap();
        let b = (lam + 1.0 + 0.64).sqrt();
        let exact = lam.im * C64::new(0.0, 0.5) / b;
        assert!((v - exact).norm() < 1e-6 * exact.norm());
    }

    #[test]
    fn one_sided_tau_derivative_at_sector_edge() {
        let eps = PI / 3.0;
        let lam = C64::from_polar(0.2, -(PI - eps) * (1.0 - 1e-7));
        let st = choose_steps(lam, &[0.8], &[0], 1, eps).unwrap();
        assert_eq!(st.side, -1);
        let bf = |l: C64, x: &[f64]| -> Result<C64> { Ok((l + 1.0 + x[0] * x[0]).sqrt()) };
        let v = d_alpha(&bf, lam, &[0.8], &[0], 1, eps).unwrap();
        let exact = lam.im * C64::new(0.0, 0.5) / (lam + 1.64).sqrt();
        assert!((v - exact).norm() < 1e-6 * exact.norm());
    }

    #[test]
    fn step_halving_second_order() {
        let lam = C64::new(0.05, 0.12);
        let x0 = 0.8;
        let b = |x: f64| (lam + 1.0 + x * x).sqrt();
        let exact = {
            let bb = b(x0);
            1.0 / bb - x0 * x0 / (bb * bb * bb)
        };
        let fd = |h: f64| (b(x0 + h) - 2.0 * b(x0) + b(x0 - h)) / (h * h);
        let (e1, e2) = ((fd(2e-2) - exact).norm(), (fd(1e-2) - exact).norm());
        assert!((e1 / e2 - 4.0).abs() < 0.2);
    }

    #[test]
    fn catalog_size_is_stable() {
        let c = catalog();
        assert_eq!(c.len(), 44);
        assert!(c.iter().any(|cl| cl.symbol == SymbolId::LambdaCa && cl.spec.family == Family::M && cl.spec.s == 0.0 && cl.spec.kind == 2));
        assert!(c.iter().any(|cl| cl.spec.region == ClaimRegion::LowA && cl.spec.lambda_power == 1.5));
    }

    #[test]
    fn eh_decomposition_reconstructs() {
        for (lam, xi) in [(C64::from_polar(0.03, 1.1), vec![0.5]), (C64::from_polar(1e-4, -0.3), vec![30.0]), (C64::from_polar(0.2, 2.0), vec![0.3, -0.4])] {
            let f = SymbolFrame::new(lam, &xi, 1.0, 0.5);
            let lf = lopatinski_frame(&f).unwrap();
            let r = decompose_eh(&f, &lf);
            assert!(r.max() < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn weights_nest_for_bounded_lambda() {
        let m = ClassSpec::new(Family::M, 0.0, 1);
        let mt = ClassSpec::new(Family::MTilde, 0.0, 1);
        assert!(m.weight(1, 0.01, 0.5) <= mt.weight(1, 0.01, 0.5) * 10.0);
        assert_eq!(ClassSpec::new(Family::MPrime, 1.0, 1).weight(0, 0.0, 0.0), 1.0);
    }
}
