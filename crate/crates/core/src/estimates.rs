//! Discrete Sobolev norms on the half-space grid, the measured ratios of the
//! resolvent estimates along a dyadic λ-sequence, and a Monte-Carlo estimate
//! of the Rademacher bound of the scaled solution operators.
//!
//! Norms are taken of the pointwise Euclidean magnitude over all components.
//! Tangential derivatives are spectral, normal derivatives use the compact
//! scheme of the graded grid, and the normal quadrature is composite Simpson
//! on the graded nodes.

use crate::error::{QthsError, Result};
use crate::field::{fft_leading, Field};
use crate::halfspace::{solve_halfspace, DataKind, HalfSpaceData, HalfSpaceGrid, HalfSpaceSolution};
use crate::sector::{in_sector, SectorParams};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Space {
    Lq,
    H1,
    H2,
    H3,
    /// homogeneous: ‖∇·‖_q only
    Hdot1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub q: f64,
    pub space: Space,
}

impl NormSpec {
    pub fn new(q: f64, space: Space) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return Err(QthsError::InvalidParameter(format!("norm exponent q = {q} must exceed 1")));
        }
        Ok(NormSpec { q, space })
    }

    pub fn lq(q: f64) -> Result<Self> {
        NormSpec::new(q, Space::Lq)
    }
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec { q: 2.0, space: Space::Lq }
    }
}

/// A list of component arrays on the half-space grid.
pub type Stack = Vec<Vec<C64>>;

/// Composite Simpson weights on consecutive node pairs of the graded grid
/// (exact for quadratics in x); the last cell is trapezoidal when the cell
/// count is odd.
pub fn normal_weights(grid: &HalfSpaceGrid) -> Vec<f64> {
    let x = &grid.normal.nodes;
    let cells = grid.normal.cells;
    let mut w = vec![0.0; x.len()];
    let mut i = 0;
    while i + 2 <= cells {
        let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
        let s = h0 + h1;
        w[i] += s * (2.0 * h0 - h1) / (6.0 * h0);
        w[i + 1] += s * s * s / (6.0 * h0 * h1);
        w[i + 2] += s * (2.0 * h1 - h0) / (6.0 * h1);
        i += 2;
    }
    if i < cells {
        let h = x[i + 1] - x[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// (Σ ∫ |v|^q)^{1/q} of the pointwise magnitude of a stack.
pub fn lq_norm(stack: &[Vec<C64>], q: f64, grid: &HalfSpaceGrid) -> f64 {
    lq_power(stack, q, grid, &normal_weights(grid)).powf(1.0 / q)
}

fn lq_power(stack: &[Vec<C64>], q: f64, grid: &HalfSpaceGrid, w: &[f64]) -> f64 {
    if stack.is_empty() {
        return 0.0;
    }
    let m1 = grid.normal.len();
    let cell = grid.tangential.cell_volume();
    let len = stack[0].len();
    let s: f64 = (0..len)
        .map(|k| {
            let mag2: f64 = stack.iter().map(|c| c[k].norm_sqr()).sum();
            let v = if q == 2.0 { mag2 } else { mag2.powf(0.5 * q) };
            v * w[k % m1]
        })
        .sum();
    s * cell
}

/// All first partial derivatives: entry `c·N + axis` is ∂_axis of component c.
pub fn gradient(stack: &[Vec<C64>], grid: &HalfSpaceGrid) -> Stack {
    let n = grid.n();
    let m1 = grid.normal.len();
    let shape = grid.shape();
    let xis: Vec<Vec<f64>> = (0..grid.modes())
        .map(|t| if grid.tangential.is_nyquist(t) { vec![f64::NAN; n - 1] } else { grid.tangential.xi_at(t) })
        .collect();
    let mut out = Vec::with_capacity(stack.len() * n);
    for comp in stack {
        let mut hat = comp.clone();
        fft_leading(&mut hat, &shape, n - 1, false);
        for axis in 0..n - 1 {
            let mut d = hat.clone();
            for (t, xi) in xis.iter().enumerate() {
                let s = if xi[axis].is_nan() { ZERO } else { C64::new(0.0, xi[axis]) };
                d[t * m1..(t + 1) * m1].iter_mut().for_each(|v| *v *= s);
            }
            fft_leading(&mut d, &shape, n - 1, true);
            out.push(d);
        }
        let mut dn = vec![ZERO; comp.len()];
        for t in 0..grid.modes() {
            let line = grid.normal.derivative(&comp[t * m1..(t + 1) * m1]);
            dn[t * m1..(t + 1) * m1].copy_from_slice(&line);
        }
        out.push(dn);
    }
    out
}

fn scaled(stack: &[Vec<C64>], s: C64) -> Stack {
    stack.iter().map(|c| c.iter().map(|v| v * s).collect()).collect()
}

/// (λv, λ^{1/2}∇v, ∇²v) stacked.
pub fn resolvent_stack(stack: &[Vec<C64>], lambda: C64, grid: &HalfSpaceGrid) -> Stack {
    let g1 = gradient(stack, grid);
    let g2 = gradient(&g1, grid);
    let mut out = scaled(stack, lambda);
    out.extend(scaled(&g1, lambda.sqrt()));
    out.extend(g2);
    out
}

/// ‖v‖_{H^k} = (Σ_{m ≤ k} ‖∇^m v‖_q^q)^{1/q}; the homogeneous space keeps
/// only m = 1.
pub fn stack_norm(stack: &[Vec<C64>], spec: &NormSpec, grid: &HalfSpaceGrid) -> f64 {
    let w = normal_weights(grid);
    let (lo, hi) = match spec.space {
        Space::Lq => (0, 0),
        Space::H1 => (0, 1),
        Space::H2 => (0, 2),
        Space::H3 => (0, 3),
        Space::Hdot1 => (1, 1),
    };
    let mut total = 0.0;
    let mut cur: Stack = stack.to_vec();
    for m in 0..=hi {
        if m > 0 {
            cur = gradient(&cur, grid);
        }
        if m >= lo {
            total += lq_power(&cur, spec.q, grid, &w);
        }
    }
    total.powf(1.0 / spec.q)
}

/// Discrete norm of a field on the half-space grid.
pub fn norm(field: &Field, spec: &NormSpec, grid: &HalfSpaceGrid) -> f64 {
    stack_norm(&field.comps, spec, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimate {
    /// velocity in L_q, tensor in H¹_q, pressure gradient; all data terms
    Full,
    /// zero boundary data, tensor in Ḣ¹_q, right side ‖(f, ∇G)‖
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// both sides vanished and the ratio was set to 0
    pub zero_over_zero: bool,
}

/// Left side over right side of a resolvent estimate for a computed solution.
/// Only the exponent of `spec` is used; the spaces are those of the estimate.
pub fn resolvent_ratio(sol: &HalfSpaceSolution, data: &HalfSpaceData, lambda: C64, spec: &NormSpec, kind: Estimate) -> Result<RatioEntry> {
    let grid = &sol.grid;
    let q = spec.q;
    let la = C64::new(lambda.norm(), 0.0);
    let lq = NormSpec::new(q, Space::Lq)?;
    let su = resolvent_stack(&sol.u.comps, la, grid);
    let sq = resolvent_stack(&sol.q.comps, la, grid);
    let grad_p = gradient(&sol.p.comps, grid);
    let (lhs, rhs) = match kind {
        Estimate::Full => {
            let lhs = stack_norm(&su, &lq, grid) + stack_norm(&sq, &NormSpec::new(q, Space::H1)?, grid) + stack_norm(&grad_p, &lq, grid);
            let sh = resolvent_stack(&data.h.comps, la, grid);
            let rhs = norm(&data.f, &lq, grid)
                + norm(&data.g, &NormSpec::new(q, Space::H1)?, grid)
                + stack_norm(&sh, &lq, grid)
                + norm(&data.hh, &NormSpec::new(q, Space::H2)?, grid)
                + la.re.sqrt() * norm(&data.hh, &NormSpec::new(q, Space::H1)?, grid)
                + la.re * norm(&data.hh, &lq, grid);
            (lhs, rhs)
        }
        Estimate::Homogeneous => {
            if data.h.max_abs() > 0.0 || data.hh.max_abs() > 0.0 {
                return Err(QthsError::InvalidParameter("the homogeneous estimate needs zero boundary data".into()));
            }
            let lhs = stack_norm(&su, &lq, grid) + stack_norm(&sq, &NormSpec::new(q, Space::Hdot1)?, grid) + stack_norm(&grad_p, &lq, grid);
            let mut fg: Stack = data.f.comps.clone();
            fg.extend(gradient(&data.g.comps, grid));
            (lhs, stack_norm(&fg, &lq, grid))
        }
    };
    let base = RatioEntry { lambda_re: lambda.re, lambda_im: lambda.im, lhs, rhs, ratio: 0.0, zero_over_zero: false };
    if rhs == 0.0 {
        if lhs == 0.0 {
            return Ok(RatioEntry { zero_over_zero: true, ..base });
        }
        return Err(QthsError::Numerical(format!("nonzero solution ({lhs:e}) for zero data at lambda = {lambda}")));
    }
    if !(lhs.is_finite() && rhs.is_finite()) {
        return Err(QthsError::Numerical(format!("non-finite norms at lambda = {lambda}")));
    }
    Ok(RatioEntry { ratio: lhs / rhs, ..base })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub estimate: Estimate,
    pub q: f64,
    pub entries: Vec<RatioEntry>,
    pub sup: f64,
    pub median: f64,
    /// max ratio ≤ 3 × median
    pub pass: bool,
}

/// λ_k = c0·2^{−k}·e^{iθ}, k = 0..=depth.
pub fn dyadic_sequence(c0: f64, depth: u32, angle: f64) -> Vec<C64> {
    (0..=depth).map(|k| C64::from_polar(c0 * 0.5f64.powi(k as i32), angle)).collect()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Solves for every λ of the sequence and records the estimate ratios.
pub fn lambda_sweep(
    data: &HalfSpaceData,
    lambdas: &[C64],
    params: &SectorParams,
    grid: &HalfSpaceGrid,
    spec: &NormSpec,
    kind: Estimate,
) -> Result<RatioReport> {
    let mut entries = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !in_sector(lambda, params) {
            return Err(QthsError::Domain(format!("lambda = {lambda} is outside the sector")));
        }
        let sol = solve_halfspace(data, lambda, params, grid)?;
        entries.push(resolvent_ratio(&sol, data, lambda, spec, kind)?);
    }
    Ok(summarize(kind, spec.q, entries))
}

pub fn summarize(estimate: Estimate, q: f64, entries: Vec<RatioEntry>) -> RatioReport {
    let ratios: Vec<f64> = entries.iter().map(|e| e.ratio).collect();
    let sup = ratios.iter().copied().fold(0.0, f64::max);
    let median = median(&ratios);
    RatioReport { estimate, q, entries, sup, median, pass: sup <= 3.0 * median }
}

/// Smooth data with no tangential mean: every component carries a factor
/// cos or sin of (x₁ + phase), and of x₂ in three dimensions. Even
/// components are Gaussians in x_N, odd ones x_N times a Gaussian, so the
/// reflections stay smooth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepData {
    pub n: usize,
    pub phase: f64,
    pub amplitude: f64,
    pub boundary: bool,
}

impl SweepData {
    pub fn new(n: usize, phase: f64, boundary: bool) -> Self {
        SweepData { n, phase, amplitude: 1.0, boundary }
    }

    pub fn value(&self, kind: DataKind, c: usize, xt: &[f64], x: f64) -> C64 {
        let n = self.n;
        let th = xt[0] + self.phase;
        let (c1, s1) = (th.cos(), th.sin());
        let c2 = if n == 3 { xt[1].cos() } else { 1.0 };
        let g = (-x * x).exp();
        let b = (-x * x / 4.0).exp();
        let last = n - 1;
        let diag_last = last * n + last;
        let v = match kind {
            DataKind::F if c == 0 => c1 * c2 * g,
            DataKind::F if c == last => s1 * c2 * x * g,
            DataKind::G if c == 0 => 0.5 * c1 * c2 * g,
            DataKind::G if c == diag_last => -0.5 * c1 * c2 * g,
            DataKind::G if c == last || c == last * n => s1 * c2 * x * g,
            DataKind::H if self.boundary && c == last - 1 => c1 * c2 * b,
            DataKind::DqBoundary if self.boundary => {
                if c == (last - 1) * n + last || c == last * n + last - 1 {
                    0.5 * s1 * c2 * b
                } else if c == 0 {
                    0.3 * c1 * c2 * b
                } else if c == diag_last {
                    -0.3 * c1 * c2 * b
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        C64::new(self.amplitude * v, 0.0)
    }

    pub fn sample(&self, grid: &HalfSpaceGrid) -> HalfSpaceData {
        HalfSpaceData::sample(grid, |k, c, xt, x| self.value(k, c, xt, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RboundOptions {
    pub trials: usize,
    pub q: f64,
    pub seed: u64,
}

impl Default for RboundOptions {
    fn default() -> Self {
        RboundOptions { trials: 1000, q: 2.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RboundEstimate {
    /// (E‖Σ r_j T_j f_j‖^q)^{1/q} / (E‖Σ r_j f_j‖^q)^{1/q}
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Data side of one sample: (f, ∇G, S_λh, S_λH, λ^{1/2}H) with
/// S_λ = (λ, λ^{1/2}∇, ∇²).
pub fn data_stack(data: &HalfSpaceData, lambda: C64, grid: &HalfSpaceGrid) -> Stack {
    let mut s = data.f.comps.clone();
    s.extend(gradient(&data.g.comps, grid));
    s.extend(resolvent_stack(&data.h.comps, lambda, grid));
    s.extend(resolvent_stack(&data.hh.comps, lambda, grid));
    s.extend(scaled(&data.hh.comps, lambda.sqrt()));
    s
}

/// Image side of one sample: S_λ u for the velocity of the solution.
pub fn image_stack(sol: &HalfSpaceSolution) -> Stack {
    resolvent_stack(&sol.u.comps, sol.lambda, &sol.grid)
}

/// Rademacher signs of one trial; the stream index separates trials.
pub fn rademacher_signs(seed: u64, trial: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Monte-Carlo ratio of the randomized sums over precomputed stacks.
pub fn rbound_from_stacks(images: &[Stack], datas: &[Stack], grid: &HalfSpaceGrid, opts: &RboundOptions) -> Result<RboundEstimate> {
    let n = images.len();
    if n == 0 || n > 64 || datas.len() != n {
        return Err(QthsError::InvalidParameter(format!("R-bound needs 1..=64 samples, got {n}")));
    }
    if opts.trials < 1000 {
        return Err(QthsError::InvalidParameter(format!("R-bound needs at least 1000 trials, got {}", opts.trials)));
    }
    NormSpec::lq(opts.q)?;
    let w = normal_weights(grid);
    let q = opts.q;
    let power = |stacks: &[Stack], signs: &[f64], gram: Option<&Vec<Vec<f64>>>| -> f64 {
        if let Some(g) = gram {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += signs[j] * signs[k] * g[j][k];
                }
            }
            return s.max(0.0);
        }
        let comps = stacks[0].len();
        let sum: Stack = (0..comps)
            .map(|c| {
                let len = stacks[0][c].len();
                (0..len).map(|i| stacks.iter().zip(signs).map(|(s, r)| s[c][i] * *r).sum()).collect()
            })
            .collect();
        lq_power(&sum, q, grid, &w)
    };
    // for q = 2 the expectation only needs the Gram matrix of the samples
    let gram = |stacks: &[Stack]| -> Vec<Vec<f64>> {
        let m1 = grid.normal.len();
        let cell = grid.tangential.cell_volume();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let mut s = 0.0;
                        for (a, b) in stacks[j].iter().zip(&stacks[k]) {
                            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                                s += (x * y.conj()).re * w[i % m1];
                            }
                        }
                        s * cell
                    })
                    .collect()
            })
            .collect()
    };
    let (gy, gx) = if q == 2.0 { (Some(gram(images)), Some(gram(datas))) } else { (None, None) };
    let per_trial: Vec<(f64, f64)> = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let r = rademacher_signs(opts.seed, t as u64, n);
            (power(images, &r, gy.as_ref()), power(datas, &r, gx.as_ref()))
        })
        .collect();
    let (sy, sx) = per_trial.iter().fold((0.0, 0.0), |(a, b), (y, x)| (a + y, b + x));
    let num = (sy / opts.trials as f64).powf(1.0 / q);
    let den = (sx / opts.trials as f64).powf(1.0 / q);
    if den == 0.0 {
        return Err(QthsError::Numerical("all randomized data sums vanish".into()));
    }
    Ok(RboundEstimate { value: num / den, numerator: num, denominator: den, samples: n, trials: opts.trials, seed: opts.seed })
}

/// Empirical Rademacher bound of the family λ_j ↦ S_{λ_j}A(λ_j) over the
/// given (λ_j, data_j) samples.
pub fn rbound_estimate(
    samples: &[(C64, HalfSpaceData)],
    params: &SectorParams,
    grid: &HalfSpaceGrid,
    opts: &RboundOptions,
) -> Result<RboundEstimate> {
    let (images, datas) = sample_stacks(samples, params, grid)?;
    rbound_from_stacks(&images, &datas, grid, opts)
}

/// Solves every sample once and returns its image and data stacks.
pub fn sample_stacks(samples: &[(C64, HalfSpaceData)], params: &SectorParams, grid: &HalfSpaceGrid) -> Result<(Vec<Stack>, Vec<Stack>)> {
    let mut images = Vec::with_capacity(samples.len());
    let mut datas = Vec::with_capacity(samples.len());
    for (lambda, data) in samples {
        let sol = solve_halfspace(data, *lambda, params, grid)?;
        images.push(image_stack(&sol));
        datas.push(data_stack(data, *lambda, grid));
    }
    Ok((images, datas))
}
