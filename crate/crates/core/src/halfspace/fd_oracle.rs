//! Second-order staggered finite differences for N = 2 on
//! [0, L) × [0, X], periodic in x₁, with u = h and ∂₂Q = H at x₂ = 0 and
//! homogeneous Dirichlet conditions at x₂ = X.
//!
//! u₁, Q₁₁ and p live at half nodes (i + ½)Δ, u₂ and Q₁₂ at integer nodes
//! iΔ. The x₁ direction is diagonalized by the DFT of the periodic centred
//! differences, and each x₁ mode is one dense complex solve.

use super::solver::{Component, DataKind, HalfSpaceSolution};
use crate::error::{QthsError, Result};
use crate::field::fft_nd;
use crate::sector::{in_sector, SectorParams};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub length: f64,
    pub nx: usize,
    pub x_max: f64,
    pub ny: usize,
}

impl FdGrid {
    pub fn new(length: f64, nx: usize, x_max: f64, ny: usize) -> Result<Self> {
        if nx < 4 || nx % 2 != 0 || ny < 4 || !(length > 0.0) || !(x_max > 0.0) {
            return Err(QthsError::Grid(format!("invalid oracle grid {nx}×{ny}")));
        }
        Ok(FdGrid { length, nx, x_max, ny })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.x_max / self.ny as f64
    }

    pub fn half(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dy()
    }

    pub fn int(&self, i: usize) -> f64 {
        i as f64 * self.dy()
    }
}

/// Oracle solution; arrays are indexed `[x₁ index][x₂ index]` flattened with
/// x₂ fastest. Integer-node arrays hold nodes 0..ny−1.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub grid: FdGrid,
    pub u1: Vec<C64>,
    pub u2: Vec<C64>,
    pub q11: Vec<C64>,
    pub q12: Vec<C64>,
    pub p: Vec<C64>,
}

/// Data source: kind, component (row-major for tensors), tangential
/// coordinates, depth.
pub type DataFn<'a> = &'a (dyn Fn(DataKind, usize, &[f64], f64) -> C64 + Sync);

struct Layout {
    ny: usize,
}

impl Layout {
    fn u1(&self, i: usize) -> usize {
        i
    }
    fn q11(&self, i: usize) -> usize {
        self.ny + i
    }
    fn p(&self, i: usize) -> usize {
        2 * self.ny + i
    }
    fn q12(&self, i: usize) -> usize {
        3 * self.ny + i
    }
    /// u₂ at integer node i ∈ 1..ny
    fn u2(&self, i: usize) -> usize {
        4 * self.ny + i - 1
    }
    fn size(&self) -> usize {
        5 * self.ny - 1
    }
}

/// Transformed data lines of one x₁ mode.
struct ModeData {
    f1: Vec<C64>,
    f2: Vec<C64>,
    g11: Vec<C64>,
    g12: Vec<C64>,
    h1: C64,
    hh11: C64,
    hh12: C64,
}

fn sample_lines(data: DataFn, grid: &FdGrid) -> Vec<ModeData> {
    let nx = grid.nx;
    let ny = grid.ny;
    let xs: Vec<f64> = (0..nx).map(|j| j as f64 * grid.dx()).collect();
    let column = |kind: DataKind, c: usize, y: &dyn Fn(usize) -> f64, len: usize| -> Vec<Vec<C64>> {
        // returns [mode][depth]
        let mut out = vec![vec![ZERO; len]; nx];
        let mut line = vec![ZERO; nx];
        for i in 0..len {
            for (j, x) in xs.iter().enumerate() {
                line[j] = data(kind, c, &[*x], y(i));
            }
            fft_nd(&mut line, &[nx], false);
            for k in 0..nx {
                out[k][i] = line[k];
            }
        }
        out
    };
    let half = |i: usize| grid.half(i);
    let int = |i: usize| grid.int(i);
    let f1 = column(DataKind::F, 0, &half, ny);
    let f2 = column(DataKind::F, 1, &int, ny + 1);
    let g11 = column(DataKind::G, 0, &half, ny);
    let g12 = column(DataKind::G, 1, &int, ny + 1);
    let zero = |_: usize| 0.0;
    let h1 = column(DataKind::H, 0, &zero, 1);
    let hh11 = column(DataKind::DqBoundary, 0, &zero, 1);
    let hh12 = column(DataKind::DqBoundary, 1, &zero, 1);
    (0..nx)
        .map(|k| ModeData {
            f1: f1[k].clone(),
            f2: f2[k].clone(),
            g11: g11[k].clone(),
            g12: g12[k].clone(),
            h1: h1[k][0],
            hh11: hh11[k][0],
            hh12: hh12[k][0],
        })
        .collect()
}

fn solve_fd_mode(md: &ModeData, k: usize, grid: &FdGrid, lambda: C64, params: &SectorParams) -> Result<Vec<C64>> {
    let ny = grid.ny;
    let lay = Layout { ny };
    let (h1x, dy) = (grid.dx(), grid.dy());
    let kk = if k < grid.nx / 2 { k as f64 } else { k as f64 - grid.nx as f64 };
    let w = 2.0 * std::f64::consts::PI * kk / grid.length;
    let d1 = C64::new(0.0, (w * h1x).sin() / h1x);
    let d11 = -4.0 * (0.5 * w * h1x).sin().powi(2) / (h1x * h1x);
    let (a, beta, kappa) = (params.a, params.beta, params.kappa());
    let n = lay.size();
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut rhs = DVector::<C64>::zeros(n);
    let inv2 = 1.0 / (dy * dy);
    // ghost-aware couplings: (row, value index, coefficient)
    let add_u1 = |m: &mut DMatrix<C64>, rhs: &mut DVector<C64>, r: usize, i: isize, c: C64| {
        if i < 0 {
            // u₁(−Δ/2) = 2h₁ − u₁(Δ/2)
            m[(r, lay.u1(0))] -= c;
            rhs[r] -= c * 2.0 * md.h1;
        } else if i as usize >= ny {
            m[(r, lay.u1(ny - 1))] -= c;
        } else {
            m[(r, lay.u1(i as usize))] += c;
        }
    };
    let add_q11 = |m: &mut DMatrix<C64>, rhs: &mut DVector<C64>, r: usize, i: isize, c: C64| {
        if i < 0 {
            // Q₁₁(−Δ/2) = Q₁₁(Δ/2) − ΔH₁₁
            m[(r, lay.q11(0))] += c;
            rhs[r] += c * dy * md.hh11;
        } else if i as usize >= ny {
            m[(r, lay.q11(ny - 1))] -= c;
        } else {
            m[(r, lay.q11(i as usize))] += c;
        }
    };
    let add_q12 = |m: &mut DMatrix<C64>, rhs: &mut DVector<C64>, r: usize, i: isize, c: C64| {
        if i < 0 {
            // Q₁₂(−Δ) = Q₁₂(Δ) − 2ΔH₁₂
            m[(r, lay.q12(1))] += c;
            rhs[r] += c * 2.0 * dy * md.hh12;
        } else if (i as usize) < ny {
            m[(r, lay.q12(i as usize))] += c;
        }
    };
    let add_u2 = |m: &mut DMatrix<C64>, r: usize, i: isize, c: C64| {
        if i > 0 && (i as usize) < ny {
            m[(r, lay.u2(i as usize))] += c;
        }
    };
    let one = C64::new(1.0, 0.0);
    let gauge = d1.norm() < 1e-12;
    for i in 0..ny {
        let ii = i as isize;
        // momentum 1 at half node i
        let r = lay.u1(i);
        add_u1(&mut m, &mut rhs, r, ii, lambda - kappa * d11 + 2.0 * kappa * inv2);
        add_u1(&mut m, &mut rhs, r, ii - 1, -kappa * inv2 * one);
        add_u1(&mut m, &mut rhs, r, ii + 1, -kappa * inv2 * one);
        m[(r, lay.p(i))] += d1;
        add_q11(&mut m, &mut rhs, r, ii, beta * lambda * d1);
        add_q12(&mut m, &mut rhs, r, ii + 1, beta * lambda / dy);
        add_q12(&mut m, &mut rhs, r, ii, -beta * lambda / dy);
        rhs[r] += md.f1[i] + beta * (d1 * md.g11[i] + (md.g12[i + 1] - md.g12[i]) / dy);
        // Q₁₁ at half node i
        let r = lay.q11(i);
        add_q11(&mut m, &mut rhs, r, ii, lambda + a - d11 + 2.0 * inv2);
        add_q11(&mut m, &mut rhs, r, ii - 1, -inv2 * one);
        add_q11(&mut m, &mut rhs, r, ii + 1, -inv2 * one);
        add_u1(&mut m, &mut rhs, r, ii, -beta * d1);
        rhs[r] += md.g11[i];
        // divergence at half node i, or the pressure gauge
        let r = lay.p(i);
        if gauge && i == ny - 1 {
            m[(r, lay.p(i))] = one;
        } else {
            add_u1(&mut m, &mut rhs, r, ii, d1);
            add_u2(&mut m, r, ii + 1, one / dy);
            add_u2(&mut m, r, ii, -one / dy);
        }
        // Q₁₂ at integer node i
        let r = lay.q12(i);
        add_q12(&mut m, &mut rhs, r, ii, lambda + a - d11 + 2.0 * inv2);
        add_q12(&mut m, &mut rhs, r, ii - 1, -inv2 * one);
        add_q12(&mut m, &mut rhs, r, ii + 1, -inv2 * one);
        add_u2(&mut m, r, ii, -0.5 * beta * d1);
        add_u1(&mut m, &mut rhs, r, ii, C64::new(-0.5 * beta / dy, 0.0));
        add_u1(&mut m, &mut rhs, r, ii - 1, C64::new(0.5 * beta / dy, 0.0));
        rhs[r] += md.g12[i];
        // momentum 2 at integer node i ≥ 1
        if i >= 1 {
            let r = lay.u2(i);
            add_u2(&mut m, r, ii, lambda - kappa * d11 + 2.0 * kappa * inv2);
            add_u2(&mut m, r, ii - 1, -kappa * inv2 * one);
            add_u2(&mut m, r, ii + 1, -kappa * inv2 * one);
            m[(r, lay.p(i))] += one / dy;
            m[(r, lay.p(i - 1))] -= one / dy;
            add_q12(&mut m, &mut rhs, r, ii, beta * lambda * d1);
            add_q11(&mut m, &mut rhs, r, ii, -beta * lambda / dy);
            add_q11(&mut m, &mut rhs, r, ii - 1, beta * lambda / dy);
            rhs[r] += md.f2[i] + beta * (d1 * md.g12[i] - (md.g11[i] - md.g11[i - 1]) / dy);
        }
    }
    let lu = m.lu();
    let x = lu.solve(&rhs).ok_or_else(|| QthsError::Singular(format!("oracle system is singular for x₁ mode {k}")))?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(QthsError::Numerical(format!("oracle solve produced non-finite values for x₁ mode {k}")));
    }
    Ok(x.iter().copied().collect())
}

/// Solves the discrete problem; data are sampled from `data` at the
/// staggered points.
pub fn fd_oracle_solve(data: DataFn, lambda: C64, params: &SectorParams, grid: &FdGrid) -> Result<FdSolution> {
    if params.n != 2 {
        return Err(QthsError::InvalidParameter("the finite-difference oracle supports N = 2 only".into()));
    }
    if !in_sector(lambda, params) {
        return Err(QthsError::Domain(format!("lambda = {lambda} is outside the sector")));
    }
    let lines = sample_lines(data, grid);
    let ny = grid.ny;
    let lay = Layout { ny };
    let size = |md: &ModeData| md.f1.iter().chain(&md.f2).chain(&md.g11).chain(&md.g12).chain([&md.h1, &md.hh11, &md.hh12]).map(|v| v.norm()).fold(0.0, f64::max);
    let peak = lines.iter().map(size).fold(0.0, f64::max);
    let sols: Vec<Vec<C64>> = lines
        .par_iter()
        .enumerate()
        .map(|(k, md)| {
            // modes carrying only transform round-off are left at zero
            if size(md) <= 1e-14 * peak {
                Ok(vec![ZERO; lay.size()])
            } else {
                solve_fd_mode(md, k, grid, lambda, params)
            }
        })
        .collect::<Result<_>>()?;
    let nx = grid.nx;
    let gather = |idx: &dyn Fn(usize) -> Option<usize>| -> Vec<C64> {
        let mut out = vec![ZERO; nx * ny];
        let mut line = vec![ZERO; nx];
        for i in 0..ny {
            for k in 0..nx {
                line[k] = idx(i).map_or(ZERO, |j| sols[k][j]);
            }
            fft_nd(&mut line, &[nx], true);
            for j in 0..nx {
                out[j * ny + i] = line[j];
            }
        }
        out
    };
    Ok(FdSolution {
        grid: *grid,
        u1: gather(&|i| Some(lay.u1(i))),
        u2: gather(&|i| if i == 0 { None } else { Some(lay.u2(i)) }),
        q11: gather(&|i| Some(lay.q11(i))),
        q12: gather(&|i| Some(lay.q12(i))),
        p: gather(&|i| Some(lay.p(i))),
    })
}

/// Relative L² distance between the oracle and a spectral solution over the
/// oracle's velocity and tensor unknowns.
pub fn compare_with_spectral(fd: &FdSolution, sol: &HalfSpaceSolution) -> Result<f64> {
    if sol.grid.n() != 2 {
        return Err(QthsError::InvalidParameter("comparison needs N = 2".into()));
    }
    let g = &fd.grid;
    let half: Vec<f64> = (0..g.ny).map(|i| g.half(i)).collect();
    let int: Vec<f64> = (0..g.ny).map(|i| g.int(i)).collect();
    let modes = sol.grid.modes() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (c, depths, vals) in [
        (Component::U(0), &half, &fd.u1),
        (Component::U(1), &int, &fd.u2),
        (Component::Q(0, 0), &half, &fd.q11),
        (Component::Q(0, 1), &int, &fd.q12),
    ] {
        let prof = sol.mode_profiles(c, 0, depths);
        for j in 0..g.nx {
            let x = j as f64 * g.dx();
            for i in 0..g.ny {
                let mut s = ZERO;
                for (rep, pr) in sol.modes.iter().zip(&prof) {
                    s += pr[i] * C64::from_polar(1.0, rep.xi[0] * x);
                }
                let s = s / modes;
                num += (s - vals[j * g.ny + i]).norm_sqr();
                den += s.norm_sqr();
            }
        }
    }
    Ok((num / den.max(1e-300)).sqrt())
}
