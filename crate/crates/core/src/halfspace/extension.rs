//! Even and odd reflection of half-space data onto the doubled interval
//! [−X, X), sampled on a uniform periodic grid.

use super::grid::HalfSpaceGrid;
use crate::error::{QthsError, Result};
use crate::field::{Field, FieldKind};
use crate::wholespace::TorusGrid;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Parity of tensor component (j, k): odd iff exactly one index is normal.
pub fn tensor_parity(j: usize, k: usize, n: usize) -> Parity {
    if (j == n - 1) != (k == n - 1) { Parity::Odd } else { Parity::Even }
}

pub fn velocity_parity(j: usize, n: usize) -> Parity {
    if j == n - 1 { Parity::Odd } else { Parity::Even }
}

/// Torus of the tangential axes times the doubled normal interval.
pub fn doubled_torus(grid: &HalfSpaceGrid) -> Result<TorusGrid> {
    let mut lengths = grid.tangential.lengths.clone();
    lengths.push(2.0 * grid.normal.x_max);
    let mut counts = grid.tangential.counts.clone();
    counts.push(grid.doubled_points);
    TorusGrid::new(lengths, counts)
}

/// Uniform samples z_k = 2Xk/n_z of the reflected profile; indices past n_z/2
/// stand for negative x_N.
pub fn extend_profile(grid: &HalfSpaceGrid, g: &[C64], slopes: &[C64], parity: Parity) -> Vec<C64> {
    let nz = grid.doubled_points;
    let x_max = grid.normal.x_max;
    let dz = 2.0 * x_max / nz as f64;
    (0..nz)
        .map(|k| {
            if k == nz / 2 {
                return match parity {
                    Parity::Even => g[g.len() - 1],
                    Parity::Odd => C64::new(0.0, 0.0),
                };
            }
            let z = k as f64 * dz;
            let (x, sign) = if k < nz / 2 { (z, 1.0) } else { (2.0 * x_max - z, if parity == Parity::Odd { -1.0 } else { 1.0 }) };
            sign * grid.normal.hermite(g, slopes, x)
        })
        .collect()
}

fn extend_components(field: &Field, grid: &HalfSpaceGrid, parity: impl Fn(usize) -> Parity) -> Result<Field> {
    if field.shape != grid.shape() {
        return Err(QthsError::Grid(format!("field shape {:?} does not match the half-space grid {:?}", field.shape, grid.shape())));
    }
    let torus = doubled_torus(grid)?;
    let m1 = grid.normal.len();
    let nz = grid.doubled_points;
    let mut out = Field::zeros(field.kind, field.n, &torus.counts);
    for (c, comp) in field.comps.iter().enumerate() {
        let par = parity(c);
        for t in 0..grid.modes() {
            let line = &comp[t * m1..(t + 1) * m1];
            if line.iter().all(|v| v.norm() == 0.0) {
                continue;
            }
            let slopes = grid.normal.derivative(line);
            let ext = extend_profile(grid, line, &slopes, par);
            out.comps[c][t * nz..(t + 1) * nz].copy_from_slice(&ext);
        }
    }
    Ok(out)
}

/// Even extension of every component.
pub fn extend_even(field: &Field, grid: &HalfSpaceGrid) -> Result<Field> {
    extend_components(field, grid, |_| Parity::Even)
}

/// Odd extension of every component.
pub fn extend_odd(field: &Field, grid: &HalfSpaceGrid) -> Result<Field> {
    extend_components(field, grid, |_| Parity::Odd)
}

/// Tangential components even, normal component odd.
pub fn extend_velocity(field: &Field, grid: &HalfSpaceGrid) -> Result<Field> {
    if field.kind != FieldKind::Velocity {
        return Err(QthsError::Grid("expected a velocity field".into()));
    }
    let n = field.n;
    extend_components(field, grid, |c| velocity_parity(c, n))
}

/// Mixed tangential-normal components odd, all others even.
pub fn extend_tensor(field: &Field, grid: &HalfSpaceGrid) -> Result<Field> {
    if field.kind != FieldKind::Tensor {
        return Err(QthsError::Grid("expected a tensor field".into()));
    }
    let n = field.n;
    extend_components(field, grid, |c| tensor_parity(c / n, c % n, n))
}
