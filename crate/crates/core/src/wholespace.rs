//! Whole-space resolvent solver on a periodic torus.
//!
//! Each Fourier mode is solved in closed form: Q̂ is eliminated through the
//! scalar resolvent (λ + |ξ|² + a)⁻¹, the velocity through the characteristic
//! polynomial P₂, and the pressure through the divergence constraint. An
//! independent least-norm solve of the full mode system serves as oracle.

use crate::error::{QthsError, Result};
use crate::field::{transform, Field, FieldKind};
use crate::sector::{in_sector, SectorParams};
use crate::symbols::p2;
use crate::C64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub n: usize,
    pub lengths: Vec<f64>,
    pub counts: Vec<usize>,
}

impl TorusGrid {
    pub fn new(lengths: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lengths.len() != counts.len() || lengths.is_empty() {
            return Err(QthsError::Grid("lengths and counts must have the same nonzero length".into()));
        }
        if counts.iter().any(|&c| c < 2 || c % 2 != 0) {
            return Err(QthsError::Grid(format!("mode counts must be even and at least 2, got {counts:?}")));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(QthsError::Grid(format!("periods must be positive, got {lengths:?}")));
        }
        Ok(TorusGrid { n: lengths.len(), lengths, counts })
    }

    pub fn cube(n: usize, length: f64, count: usize) -> Result<Self> {
        TorusGrid::new(vec![length; n], vec![count; n])
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.counts[axis] as f64
    }

    /// Integer wavenumber of FFT index `k` along `axis`.
    pub fn wavenumber(&self, axis: usize, k: usize) -> i64 {
        let n = self.counts[axis];
        if k < n / 2 { k as i64 } else { k as i64 - n as i64 }
    }

    pub fn frequency(&self, axis: usize, k: usize) -> f64 {
        2.0 * PI * self.wavenumber(axis, k) as f64 / self.lengths[axis]
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        let mut r = flat;
        for ax in (0..self.n).rev() {
            idx[ax] = r % self.counts[ax];
            r /= self.counts[ax];
        }
        idx
    }

    pub fn xi_at(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(ax, &k)| self.frequency(ax, k)).collect()
    }

    /// Modes containing a Nyquist index have no conjugate partner and are
    /// projected out by the solver.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        self.multi_index(flat).iter().enumerate().any(|(ax, &k)| k == self.counts[ax] / 2)
    }

    /// Physical coordinates of grid point `flat` on [-L/2, L/2)^N.
    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(ax, &k)| -0.5 * self.lengths[ax] + k as f64 * self.spacing(ax))
            .collect()
    }

    /// Quadrature weight of a grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.n).map(|ax| self.spacing(ax)).product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub u: Vec<C64>,
    /// row-major N×N
    pub q: Vec<C64>,
    pub p: C64,
}

fn check_tensor(g: &[C64], n: usize) -> Result<()> {
    let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tr: C64 = (0..n).map(|j| g[j * n + j]).sum();
    let mut asym: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            asym = asym.max((g[j * n + k] - g[k * n + j]).norm());
        }
    }
    if tr.norm().max(asym) > 1e-12 * scale.max(1e-300) {
        return Err(QthsError::InvalidParameter("tensor data must be symmetric and traceless".into()));
    }
    Ok(())
}

/// Closed-form solution of one Fourier mode.
pub fn solve_mode(xi: &[f64], lambda: C64, f_hat: &[C64], g_hat: &[C64], params: &SectorParams) -> Result<ModeSolution> {
    let n = xi.len();
    if f_hat.len() != n || g_hat.len() != n * n {
        return Err(QthsError::Grid("mode data has the wrong size".into()));
    }
    if !in_sector(lambda, params) {
        return Err(QthsError::Domain(format!("lambda = {lambda} is outside the sector")));
    }
    check_tensor(g_hat, n)?;
    let (a, beta) = (params.a, params.beta);
    let s: f64 = xi.iter().map(|v| v * v).sum();
    let rq = lambda + s + a;
    if s == 0.0 {
        return Ok(ModeSolution { u: f_hat.iter().map(|v| v / lambda).collect(), q: g_hat.iter().map(|v| v / rq).collect(), p: ZERO });
    }
    let pp = p2(s.sqrt(), lambda, a, beta);
    let scale = ((lambda + s) * rq).norm() + 0.5 * beta * beta * s * (s + a);
    if pp.norm() < 1e-14 * scale {
        return Err(QthsError::Singular(format!("P2 vanishes at |xi| = {}, lambda = {lambda}", s.sqrt())));
    }
    let ix: Vec<C64> = xi.iter().map(|&v| I * v).collect();
    let big_f: Vec<C64> = (0..n)
        .map(|j| {
            let gj: C64 = (0..n).map(|k| ix[k] * g_hat[j * n + k]).sum();
            f_hat[j] + beta * (s + a) * gj / rq
        })
        .collect();
    let div_f: C64 = (0..n).map(|j| ix[j] * big_f[j]).sum();
    let p = -div_f / s;
    let sigma = pp / rq;
    let u: Vec<C64> = (0..n).map(|j| (big_f[j] - ix[j] * p) / sigma).collect();
    let mut q = vec![ZERO; n * n];
    for j in 0..n {
        for k in 0..n {
            let d = 0.5 * (ix[j] * u[k] + ix[k] * u[j]);
            q[j * n + k] = (g_hat[j * n + k] + beta * d) / rq;
        }
    }
    Ok(ModeSolution { u, q, p })
}

/// Independent oracle: least-norm solve of the full mode system with the
/// momentum, tensor, divergence, symmetry and trace rows stacked.
pub fn oracle_mode_solve(xi: &[f64], lambda: C64, f_hat: &[C64], g_hat: &[C64], params: &SectorParams) -> Result<ModeSolution> {
    let n = xi.len();
    let s: f64 = xi.iter().map(|v| v * v).sum();
    if s == 0.0 {
        return Err(QthsError::InvalidParameter("oracle requires xi != 0".into()));
    }
    let (a, beta) = (params.a, params.beta);
    let nu = n + n * n + 1;
    let sym_rows = n * (n - 1) / 2;
    let nr = n + n * n + 1 + sym_rows + 1;
    let mut m = DMatrix::<C64>::zeros(nr, nu);
    let mut rhs = vec![ZERO; nr];
    let ix: Vec<C64> = xi.iter().map(|&v| I * v).collect();
    let qc = |j: usize, k: usize| n + j * n + k;
    let pc = n + n * n;
    // momentum: (λ+s)u_j + iξ_j p - β(s+a) Σ_k iξ_k Q_jk = f_j
    for j in 0..n {
        m[(j, j)] = lambda + s;
        m[(j, pc)] = ix[j];
        for k in 0..n {
            m[(j, qc(j, k))] = -beta * (s + a) * ix[k];
        }
        rhs[j] = f_hat[j];
    }
    // tensor: (λ+s+a)Q_jk - β(iξ_j u_k + iξ_k u_j)/2 = G_jk
    for j in 0..n {
        for k in 0..n {
            let r = n + j * n + k;
            m[(r, qc(j, k))] = lambda + s + a;
            m[(r, k)] -= 0.5 * beta * ix[j];
            m[(r, j)] -= 0.5 * beta * ix[k];
            rhs[r] = g_hat[j * n + k];
        }
    }
    let mut r = n + n * n;
    for j in 0..n {
        m[(r, j)] = ix[j];
    }
    r += 1;
    for j in 0..n {
        for k in j + 1..n {
            m[(r, qc(j, k))] = C64::new(1.0, 0.0);
            m[(r, qc(k, j))] = C64::new(-1.0, 0.0);
            r += 1;
        }
    }
    for j in 0..n {
        m[(r, qc(j, j))] = C64::new(1.0, 0.0);
    }
    // row and column equilibration
    let mut col_scale = vec![1.0; nu];
    for (c, cs) in col_scale.iter_mut().enumerate() {
        let mx = (0..nr).map(|i| m[(i, c)].norm()).fold(0.0, f64::max);
        if mx > 0.0 {
            *cs = 1.0 / mx;
        }
    }
    for i in 0..nr {
        for c in 0..nu {
            m[(i, c)] *= col_scale[c];
        }
        let mx = (0..nu).map(|c| m[(i, c)].norm()).fold(0.0, f64::max);
        if mx > 0.0 {
            for c in 0..nu {
                m[(i, c)] /= mx;
            }
            rhs[i] /= mx;
        }
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-13 * smax {
        return Err(QthsError::Singular(format!("mode system is singular at xi = {xi:?}, lambda = {lambda}")));
    }
    let b = nalgebra::DVector::from_vec(rhs);
    let mut x = svd.solve(&b, 1e-14 * smax).map_err(|e| QthsError::Numerical(e.to_string()))?;
    for _ in 0..3 {
        let r = &b - &m * &x;
        x += svd.solve(&r, 1e-14 * smax).map_err(|e| QthsError::Numerical(e.to_string()))?;
    }
    let x: Vec<C64> = x.iter().zip(&col_scale).map(|(v, s)| v * *s).collect();
    Ok(ModeSolution { u: x[..n].to_vec(), q: x[n..n + n * n].to_vec(), p: x[pc] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WholeSpaceSolution {
    pub u: Field,
    pub q: Field,
    pub p: Field,
}

fn check_data(f: &Field, g: &Field, grid: &TorusGrid) -> Result<()> {
    if f.kind != FieldKind::Velocity || g.kind != FieldKind::Tensor {
        return Err(QthsError::Grid("expected a velocity field and a tensor field".into()));
    }
    if f.shape != grid.counts || g.shape != grid.counts || f.n != grid.n || g.n != grid.n {
        return Err(QthsError::Grid(format!("field shape {:?} does not match the torus {:?}", f.shape, grid.counts)));
    }
    if g.s0_defect() > 1e-12 * g.max_abs().max(1e-300) {
        return Err(QthsError::InvalidParameter("tensor data must be symmetric and traceless".into()));
    }
    Ok(())
}

/// Solves the whole-space problem in Fourier space and returns the modal
/// coefficients (Nyquist modes set to zero).
pub fn solve_wholespace_modes(f_hat: &Field, g_hat: &Field, lambda: C64, params: &SectorParams, grid: &TorusGrid) -> Result<WholeSpaceSolution> {
    check_data(f_hat, g_hat, grid)?;
    let n = grid.n;
    let modes: Vec<ModeSolution> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if grid.is_nyquist(i) {
                return Ok(ModeSolution { u: vec![ZERO; n], q: vec![ZERO; n * n], p: ZERO });
            }
            let fh: Vec<C64> = (0..n).map(|c| f_hat.comps[c][i]).collect();
            let mut gh: Vec<C64> = (0..n * n).map(|c| g_hat.comps[c][i]).collect();
            sanitize_tensor(&mut gh, n);
            solve_mode(&grid.xi_at(i), lambda, &fh, &gh, params)
        })
        .collect::<Result<_>>()?;
    let mut u = Field::zeros(FieldKind::Velocity, n, &grid.counts);
    let mut q = Field::zeros(FieldKind::Tensor, n, &grid.counts);
    let mut p = Field::zeros(FieldKind::Pressure, n, &grid.counts);
    for (i, m) in modes.iter().enumerate() {
        for c in 0..n {
            u.comps[c][i] = m.u[c];
        }
        for c in 0..n * n {
            q.comps[c][i] = m.q[c];
        }
        p.comps[0][i] = m.p;
    }
    Ok(WholeSpaceSolution { u, q, p })
}

/// Removes rounding-level asymmetry and trace left by the forward transform.
fn sanitize_tensor(g: &mut [C64], n: usize) {
    for j in 0..n {
        for k in j + 1..n {
            let m = 0.5 * (g[j * n + k] + g[k * n + j]);
            g[j * n + k] = m;
            g[k * n + j] = m;
        }
    }
    let tr: C64 = (0..n).map(|j| g[j * n + j]).sum::<C64>() / n as f64;
    for j in 0..n {
        g[j * n + j] -= tr;
    }
}

/// Grid-to-grid whole-space solve.
pub fn solve_wholespace(f: &Field, g: &Field, lambda: C64, params: &SectorParams, grid: &TorusGrid) -> Result<WholeSpaceSolution> {
    check_data(f, g, grid)?;
    let modes = solve_wholespace_modes(&transform(f, false), &transform(g, false), lambda, params, grid)?;
    let mut q = transform(&modes.q, true);
    q.project_s0();
    Ok(WholeSpaceSolution { u: transform(&modes.u, true), q, p: transform(&modes.p, true) })
}

/// Relative spectral residual of both equations for a grid solution, measured
/// against the data with Nyquist modes removed.
pub fn wholespace_residual(sol: &WholeSpaceSolution, f: &Field, g: &Field, lambda: C64, params: &SectorParams, grid: &TorusGrid) -> Result<f64> {
    check_data(f, g, grid)?;
    let n = grid.n;
    let (uh, qh, ph) = (transform(&sol.u, false), transform(&sol.q, false), transform(&sol.p, false));
    let (fh, gh) = (transform(f, false), transform(g, false));
    let (a, beta) = (params.a, params.beta);
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..grid.len() {
        if grid.is_nyquist(i) {
            continue;
        }
        let xi = grid.xi_at(i);
        let s: f64 = xi.iter().map(|v| v * v).sum();
        let ix: Vec<C64> = xi.iter().map(|&v| I * v).collect();
        for j in 0..n {
            let divq: C64 = (0..n).map(|k| ix[k] * qh.comps[j * n + k][i]).sum();
            let lhs = (lambda + s) * uh.comps[j][i] + ix[j] * ph.comps[0][i] - beta * (s + a) * divq;
            num = num.max((lhs - fh.comps[j][i]).norm());
            den = den.max(fh.comps[j][i].norm());
            for k in 0..n {
                let d = 0.5 * (ix[j] * uh.comps[k][i] + ix[k] * uh.comps[j][i]);
                let lhs = (lambda + s + a) * qh.comps[j * n + k][i] - beta * d;
                num = num.max((lhs - gh.comps[j * n + k][i]).norm());
                den = den.max(gh.comps[j * n + k][i].norm());
            }
        }
        let div: C64 = (0..n).map(|j| ix[j] * uh.comps[j][i]).sum();
        num = num.max(div.norm() / s.sqrt().max(1.0));
    }
    Ok(num / den.max(1e-300))
}

fn random_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0)
}

fn random_tensor(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let mut g: Vec<C64> = (0..n * n).map(|_| random_c64(rng)).collect();
    sanitize_tensor(&mut g, n);
    g
}

/// Largest relative deviation between the closed-form and the oracle mode
/// solves over seeded random (λ, ξ, data); ξ has components in [−10, 10].
pub fn random_mode_deviation(params: &SectorParams, count: usize, seed: u64) -> Result<f64> {
    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_max = params.max_arg() * (1.0 - 1e-6);
    let cases: Vec<(Vec<f64>, C64, Vec<C64>, Vec<C64>)> = (0..count)
        .map(|_| {
            let xi: Vec<f64> = (0..n).map(|_| 20.0 * rng.random::<f64>() - 10.0).collect();
            let rho = params.c0 * (1e-6f64.ln() * rng.random::<f64>()).exp();
            let lam = C64::from_polar(rho, theta_max * (2.0 * rng.random::<f64>() - 1.0));
            let f: Vec<C64> = (0..n).map(|_| random_c64(&mut rng)).collect();
            (xi, lam, f, random_tensor(&mut rng, n))
        })
        .collect();
    let devs: Vec<f64> = cases
        .par_iter()
        .map(|(xi, lam, f, g)| {
            let a = solve_mode(xi, *lam, f, g, params)?;
            let b = oracle_mode_solve(xi, *lam, f, g, params)?;
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for (x, y) in a.u.iter().chain(&a.q).zip(b.u.iter().chain(&b.q)) {
                num = num.max((x - y).norm());
                den = den.max(y.norm());
            }
            Ok(num / den.max(1e-300))
        })
        .collect::<Result<_>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// Seeded smooth periodic data: random coefficients on the modes with
/// |k|_∞ ≤ `kmax`, tensor symmetric and traceless.
pub fn random_smooth_data(grid: &TorusGrid, kmax: i64, seed: u64) -> (Field, Field) {
    let n = grid.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Field::zeros(FieldKind::Velocity, n, &grid.counts);
    let mut g = Field::zeros(FieldKind::Tensor, n, &grid.counts);
    for i in 0..grid.len() {
        let k = grid.multi_index(i);
        let low = k.iter().enumerate().all(|(ax, &kk)| grid.wavenumber(ax, kk).abs() <= kmax);
        if !low || grid.is_nyquist(i) {
            continue;
        }
        for c in 0..n {
            f.comps[c][i] = random_c64(&mut rng);
        }
        for (c, v) in random_tensor(&mut rng, n).into_iter().enumerate() {
            g.comps[c][i] = v;
        }
    }
    let mut g = transform(&g, true);
    g.project_s0();
    (transform(&f, true), g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SectorParams {
        SectorParams::new(2, 1.0, 0.5, PI / 3.0, 1.0).unwrap()
    }

    #[test]
    fn gradient_forcing_goes_to_pressure() {
        let xi = [0.6, -1.1];
        let f = [C64::new(0.6, 0.2), C64::new(-1.1, -1.1 / 3.0)];
        let m = solve_mode(&xi, C64::new(0.3, 0.2), &f, &[ZERO; 4], &params()).unwrap();
        assert!(m.u.iter().chain(&m.q).all(|v| v.norm() < 1e-14));
        let s = 0.36 + 1.21;
        let exact = -I * (xi[0] * f[0] + xi[1] * f[1]) / s;
        assert!((m.p - exact).norm() < 1e-14);
    }

    #[test]
    fn transverse_forcing_uses_p2() {
        let xi = [0.6, -1.1];
        let f = [C64::new(1.1, 0.0), C64::new(0.6, 0.0)];
        let lam = C64::new(0.3, 0.2);
        let m = solve_mode(&xi, lam, &f, &[ZERO; 4], &params()).unwrap();
        let s: f64 = 1.57;
        let pp = p2(s.sqrt(), lam, 1.0, 0.5);
        for j in 0..2 {
            assert!((m.u[j] - (lam + s + 1.0) * f[j] / pp).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_mode_decouples() {
        let lam = C64::new(0.2, -0.1);
        let g = [C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(-1.0, 0.0)];
        let m = solve_mode(&[0.0, 0.0], lam, &[C64::new(1.0, 0.0), ZERO], &g, &params()).unwrap();
        assert!((m.u[0] - 1.0 / lam).norm() < 1e-14);
        assert!((m.q[1] - 0.5 / (lam + 1.0)).norm() < 1e-14);
        assert_eq!(m.p, ZERO);
    }

    #[test]
    fn outside_sector_is_rejected() {
        assert!(matches!(solve_mode(&[1.0, 0.0], C64::new(-0.5, 0.0), &[ZERO; 2], &[ZERO; 4], &params()), Err(QthsError::Domain(_))));
    }

    #[test]
    fn oracle_agrees_on_a_mode() {
        let xi = [0.7, 0.4];
        let lam = C64::from_polar(0.4, 1.9);
        let f = [C64::new(0.3, -1.0), C64::new(0.2, 0.5)];
        let g = [C64::new(1.0, 0.2), C64::new(-0.3, 0.4), C64::new(-0.3, 0.4), C64::new(-1.0, -0.2)];
        let a = solve_mode(&xi, lam, &f, &g, &params()).unwrap();
        let b = oracle_mode_solve(&xi, lam, &f, &g, &params()).unwrap();
        for (x, y) in a.u.iter().chain(&a.q).zip(b.u.iter().chain(&b.q)) {
            assert!((x - y).norm() < 1e-10 * (1.0 + x.norm()));
        }
    }
}
