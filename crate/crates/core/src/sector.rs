//! Admissible parameters, sector membership and the sampling grids used by
//! every scan.

use crate::error::{QthsError, Result};
use crate::symbols::z_roots;
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Physical and analytic constants `(N, a, β, ε, c0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorParams {
    pub n: usize,
    pub a: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub c0: f64,
}

impl SectorParams {
    pub fn new(n: usize, a: f64, beta: f64, epsilon: f64, c0: f64) -> Result<Self> {
        let p = SectorParams { n, a, beta, epsilon, c0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 2 && self.n != 3 {
            return Err(QthsError::InvalidParameter(format!("N = {} (supported: 2, 3)", self.n)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(QthsError::InvalidParameter(format!("a = {} must be positive", self.a)));
        }
        let eps0 = epsilon0_of(self.beta)?;
        if !(self.epsilon > eps0 && self.epsilon < PI / 2.0) {
            return Err(QthsError::InvalidParameter(format!(
                "epsilon = {} must lie in (epsilon0, pi/2) = ({eps0}, {})",
                self.epsilon,
                PI / 2.0
            )));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(QthsError::InvalidParameter(format!("c0 = {} must be positive", self.c0)));
        }
        Ok(())
    }

    /// 1 + β²/2
    pub fn kappa(&self) -> f64 {
        1.0 + 0.5 * self.beta * self.beta
    }

    pub fn max_arg(&self) -> f64 {
        PI - self.epsilon
    }

    pub fn with_c0(&self, c0: f64) -> Self {
        SectorParams { c0, ..*self }
    }
}

/// arctan(|β|/√2), the smallest admissible sector half-opening defect.
pub fn epsilon0_of(beta: f64) -> Result<f64> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(QthsError::InvalidParameter(format!("beta = {beta} must be nonzero and finite")));
    }
    Ok((beta.abs() / 2f64.sqrt()).atan())
}

/// Membership in Σ_{ε,c0}.
pub fn in_sector(lambda: C64, params: &SectorParams) -> bool {
    lambda != C64::new(0.0, 0.0)
        && lambda.arg().abs() < params.max_arg()
        && lambda.norm() <= params.c0
}

/// Membership in the uncapped sector Σ_ε.
pub fn in_open_sector(lambda: C64, epsilon: f64) -> bool {
    lambda != C64::new(0.0, 0.0) && lambda.arg().abs() < PI - epsilon
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: C64,
    pub xi: Vec<f64>,
}

impl SpectralPoint {
    pub fn new(lambda: C64, xi: Vec<f64>) -> Self {
        SpectralPoint { lambda, xi }
    }

    pub fn a_norm(&self) -> f64 {
        self.xi.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Seeded random points of Σ_{ε,c0} × (ξ' ≠ 0): log-uniform |λ| in
/// [c0·2^{-depth}, c0], uniform arg, log-uniform |ξ'| in [xi_min, xi_max]
/// with a uniform direction.
pub fn random_spectral_points(params: &SectorParams, count: usize, depth: u32, xi_range: (f64, f64), seed: u64) -> Vec<SpectralPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_max = params.max_arg() * (1.0 - 1e-6);
    let (l0, l1) = ((params.c0 * 2f64.powi(-(depth as i32))).ln(), params.c0.ln());
    let (x0, x1) = (xi_range.0.ln(), xi_range.1.ln());
    (0..count)
        .map(|_| {
            let rho = (l0 + (l1 - l0) * rng.random::<f64>()).exp();
            let theta = theta_max * (2.0 * rng.random::<f64>() - 1.0);
            let a = (x0 + (x1 - x0) * rng.random::<f64>()).exp();
            let dir = 2.0 * PI * rng.random::<f64>();
            SpectralPoint::new(C64::from_polar(rho, theta), xi_vector(a, params.n, dir))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    LowA,
    Middle,
    HighA,
}

/// Regime thresholds: `r` small, `R` large.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub r: f64,
    pub big_r: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { r: 1.0 / 16.0, big_r: 16.0 }
    }
}

/// low-A: A² ≤ |λ|/R, high-A: A² ≥ (c0 + a)/r, middle otherwise.
pub fn classify(lambda_abs: f64, a_norm: f64, params: &SectorParams, th: &Thresholds) -> Region {
    let a2 = a_norm * a_norm;
    if a2 <= lambda_abs / th.big_r {
        Region::LowA
    } else if a2 >= (params.c0 + params.a) / th.r {
        Region::HighA
    } else {
        Region::Middle
    }
}

/// Resolution controls for [`build_scan_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_radial: usize,
    pub n_angle: usize,
    pub n_xi: usize,
    /// |λ| runs over [c0·2^{-depth}, c0].
    pub depth: u32,
    pub xi_min: f64,
    pub xi_max: f64,
    /// Direction of ξ' in the (ξ1, ξ2) plane when N = 3.
    pub xi_angle: f64,
    pub thresholds: Thresholds,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_radial: 22,
            n_angle: 9,
            n_xi: 41,
            depth: 20,
            xi_min: 1e-4,
            xi_max: 1e4,
            xi_angle: 0.6,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub lambda: C64,
    pub xi: Vec<f64>,
    pub region: Region,
}

impl ScanPoint {
    pub fn a_norm(&self) -> f64 {
        self.xi.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub lambda_samples: Vec<C64>,
    pub xi_samples: Vec<Vec<f64>>,
    pub points: Vec<ScanPoint>,
    pub thresholds: Thresholds,
}

impl ScanGrid {
    /// Tensor grid of the given samples, tagged with `params` and `th`.
    pub fn from_samples(
        lambda_samples: Vec<C64>,
        xi_samples: Vec<Vec<f64>>,
        params: &SectorParams,
        th: Thresholds,
    ) -> Result<Self> {
        let mut points = Vec::with_capacity(lambda_samples.len() * xi_samples.len());
        for &lambda in &lambda_samples {
            if !in_sector(lambda, params) {
                return Err(QthsError::Domain(format!("grid sample lambda = {lambda}")));
            }
            for xi in &xi_samples {
                if xi.len() + 1 != params.n {
                    return Err(QthsError::Grid(format!(
                        "xi sample of length {} for N = {}",
                        xi.len(),
                        params.n
                    )));
                }
                let a = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                points.push(ScanPoint {
                    lambda,
                    xi: xi.clone(),
                    region: classify(lambda.norm(), a, params, &th),
                });
            }
        }
        Ok(ScanGrid { lambda_samples, xi_samples, points, thresholds: th })
    }

    pub fn count(&self, region: Region) -> usize {
        self.points.iter().filter(|p| p.region == region).count()
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Tangential frequency vector of magnitude `a` (fixed direction for N = 3).
pub fn xi_vector(a: f64, n: usize, angle: f64) -> Vec<f64> {
    if n == 2 {
        vec![a]
    } else {
        vec![a * angle.cos(), a * angle.sin()]
    }
}

pub fn build_scan_grid(params: &SectorParams, spec: &GridSpec) -> Result<ScanGrid> {
    params.validate()?;
    if spec.n_radial < 2 || spec.n_angle < 2 || spec.n_xi < 2 {
        return Err(QthsError::Grid("every grid resolution must be at least 2".into()));
    }
    if !(spec.xi_min > 0.0 && spec.xi_max > spec.xi_min) {
        return Err(QthsError::Grid("need 0 < xi_min < xi_max".into()));
    }
    let top = params.c0 * (1.0 - 1e-12);
    let radii = logspace(top * 2f64.powi(-(spec.depth as i32)), top, spec.n_radial);
    let theta_max = params.max_arg() * (1.0 - 1e-3);
    let mut lambdas = Vec::with_capacity(radii.len() * spec.n_angle);
    for &rho in &radii {
        for j in 0..spec.n_angle {
            let t = -1.0 + 2.0 * j as f64 / (spec.n_angle - 1) as f64;
            lambdas.push(C64::from_polar(rho, theta_max * t));
        }
    }
    let scale = params.a.sqrt().max(1.0);
    let xis = logspace(spec.xi_min * scale, spec.xi_max * scale, spec.n_xi)
        .into_iter()
        .map(|a| xi_vector(a, params.n, spec.xi_angle))
        .collect();
    ScanGrid::from_samples(lambdas, xis, params, spec.thresholds)
}

/// One evaluated band of the root-localization inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCheck {
    pub name: String,
    pub margin: f64,
}

/// Relative margins of the reference bands at one point; positive means the
/// inequality holds strictly.
///
/// With κ = 1 + β²/2, s = sin(ε/2) and ρ = 5/4:
/// `|λ|/(ρκ) ≤ |z1| ≤ ρ|λ|/κ`, `(s/2)(|λ|/κ + a) ≤ |z2| ≤ ρ(|λ|/κ + a)`,
/// `Re L1 ≥ (s^{3/2}/2)(|λ|/κ + A²)^{1/2}`,
/// `Re L2 ≥ (s^{3/2}/2)(|λ|/κ + a + A²)^{1/2}`.
pub fn root_band_margins(lambda: C64, a_norm: f64, a: f64, beta: f64, epsilon: f64) -> [BandCheck; 6] {
    let kappa = 1.0 + 0.5 * beta * beta;
    let s = (0.5 * epsilon).sin();
    let lam = lambda.norm() / kappa;
    let (z1, z2) = z_roots(lambda, a, beta);
    let a2 = a_norm * a_norm;
    let l1 = (z1 + a2).sqrt();
    let l2 = (z2 + a2).sqrt();
    let lo = |v: f64, b: f64| v / b - 1.0;
    let hi = |v: f64, b: f64| b / v - 1.0;
    let c = s.powf(1.5) * 0.5;
    let rho = 1.25;
    [
        BandCheck { name: "z1-lower".into(), margin: lo(z1.norm(), lam / rho) },
        BandCheck { name: "z1-upper".into(), margin: hi(z1.norm(), rho * lam) },
        BandCheck { name: "z2-lower".into(), margin: lo(z2.norm(), 0.5 * s * (lam + a)) },
        BandCheck { name: "z2-upper".into(), margin: hi(z2.norm(), rho * (lam + a)) },
        BandCheck { name: "re-l1".into(), margin: lo(l1.re, c * (lam + a2).sqrt()) },
        BandCheck { name: "re-l2".into(), margin: lo(l2.re, c * (lam + a + a2).sqrt()) },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c0: f64,
    pub margin: f64,
    pub candidates_tried: usize,
    pub probe_points: usize,
}

/// Probe grid for [`calibrate_c0`]: the scan grid built with `c0 = a`.
pub fn calibration_probe_grid(n: usize, a: f64, beta: f64, epsilon: f64, spec: &GridSpec) -> Result<ScanGrid> {
    let params = SectorParams::new(n, a, beta, epsilon, a)?;
    build_scan_grid(&params, spec)
}

/// Margins at or below this value are treated as rounding-level ties.
pub const MARGIN_FLOOR: f64 = 1e-9;

/// Largest dyadic `c0 ∈ {a, a/2, a/4, ...}` for which the reference bands
/// hold with positive margin at every probe point with `|λ| ≤ c0`.
pub fn calibrate_c0(n: usize, a: f64, beta: f64, epsilon: f64, probe: &ScanGrid) -> Result<Calibration> {
    SectorParams::new(n, a, beta, epsilon, a)?;
    if probe.points.is_empty() {
        return Err(QthsError::Calibration("empty probe grid".into()));
    }
    let margins: Vec<(f64, f64, &ScanPoint)> = probe
        .points
        .iter()
        .map(|p| {
            let m = root_band_margins(p.lambda, p.a_norm(), a, beta, epsilon)
                .iter()
                .map(|b| b.margin)
                .fold(f64::INFINITY, f64::min);
            (p.lambda.norm(), m, p)
        })
        .collect();
    let mut worst: Option<(f64, &ScanPoint)> = None;
    for k in 0..60 {
        let cand = a * 2f64.powi(-k);
        let mut any = false;
        let mut min_margin = f64::INFINITY;
        let mut arg: Option<&ScanPoint> = None;
        for (abs, m, p) in &margins {
            if *abs <= cand && p.lambda.arg().abs() < PI - epsilon {
                any = true;
                if *m < min_margin {
                    min_margin = *m;
                    arg = Some(p);
                }
            }
        }
        if any && min_margin > MARGIN_FLOOR {
            return Ok(Calibration {
                c0: cand,
                margin: min_margin,
                candidates_tried: k as usize + 1,
                probe_points: probe.points.len(),
            });
        }
        if let Some(p) = arg {
            if worst.is_none_or(|(w, _)| min_margin < w) {
                worst = Some((min_margin, p));
            }
        }
    }
    let msg = match worst {
        Some((m, p)) => format!("no candidate passes; worst margin {m:.3e} at lambda = {}, xi = {:?}", p.lambda, p.xi),
        None => "no probe point lies inside any candidate sector".to_string(),
    };
    Err(QthsError::Calibration(msg))
}
