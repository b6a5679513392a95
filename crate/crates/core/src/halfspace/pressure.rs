//! Weak Dirichlet-Neumann problem (∇p, ∇φ) = (r, ∇φ) per tangential mode,
//! discretized with P1 elements on the graded normal grid.

use super::grid::{HalfSpaceGrid, NormalGrid};
use crate::error::{QthsError, Result};
use crate::field::{transform_leading, Field, FieldKind};
use crate::numerics::solve_tridiagonal;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Nodal pressure of one mode from nodal values of r̂ (N components, the
/// last one normal). The value at X is fixed to zero.
pub fn pressure_dn_mode(xi: &[f64], r: &[Vec<C64>], normal: &NormalGrid) -> Vec<C64> {
    let n1 = xi.len();
    let m = normal.cells;
    let a2: f64 = xi.iter().map(|v| v * v).sum();
    let rn = &r[n1];
    // g = iξ·r′
    let g: Vec<C64> = (0..=m).map(|i| (0..n1).map(|j| C64::new(0.0, xi[j]) * r[j][i]).sum()).collect();
    let mut lower = vec![ZERO; m];
    let mut diag = vec![ZERO; m];
    let mut upper = vec![ZERO; m];
    let mut rhs = vec![ZERO; m + 1];
    for e in 0..m {
        let h = normal.nodes[e + 1] - normal.nodes[e];
        let k = C64::new(1.0 / h + a2 * h / 3.0, 0.0);
        let off = C64::new(-1.0 / h + a2 * h / 6.0, 0.0);
        let flux = 0.5 * (rn[e] + rn[e + 1]);
        rhs[e] += -flux - h / 6.0 * (2.0 * g[e] + g[e + 1]);
        rhs[e + 1] += flux - h / 6.0 * (g[e] + 2.0 * g[e + 1]);
        diag[e] += k;
        if e + 1 < m {
            diag[e + 1] += k;
            upper[e] = off;
            lower[e + 1] = off;
        }
    }
    let mut sol = rhs[..m].to_vec();
    solve_tridiagonal(&lower, &diag, &upper, &mut sol);
    sol.push(ZERO);
    sol
}

/// Pressure field from a right-hand side given on the half-space grid.
pub fn pressure_dn_solve(rhs: &Field, grid: &HalfSpaceGrid) -> Result<Field> {
    if rhs.kind != FieldKind::Velocity || rhs.shape != grid.shape() {
        return Err(QthsError::Grid("pressure right side must be a velocity field on the half-space grid".into()));
    }
    let hat = transform_leading(rhs, false);
    let m1 = grid.normal.len();
    let mut p = Field::zeros(FieldKind::Pressure, rhs.n, &grid.shape());
    for t in 0..grid.modes() {
        let r: Vec<Vec<C64>> = hat.comps.iter().map(|c| c[t * m1..(t + 1) * m1].to_vec()).collect();
        let pm = pressure_dn_mode(&grid.tangential.xi_at(t), &r, &grid.normal);
        p.comps[0][t * m1..(t + 1) * m1].copy_from_slice(&pm);
    }
    Ok(transform_leading(&p, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manufactured(cells: usize) -> f64 {
        let g = NormalGrid::new(30.0, cells, 4.0).unwrap();
        let xi = [0.7];
        // r = ∇φ with φ = e^{−x}(1 + x); for ξ ≠ 0 the pressure is φ itself,
        // up to the Dirichlet value φ(X) ≈ 3e-12
        let phi: Vec<C64> = g.nodes.iter().map(|&x| C64::new((-x).exp() * (1.0 + x), 0.0)).collect();
        let dphi: Vec<C64> = g.nodes.iter().map(|&x| C64::new(-x * (-x).exp(), 0.0)).collect();
        let r = vec![phi.iter().map(|v| C64::new(0.0, xi[0]) * v).collect(), dphi];
        let p = pressure_dn_mode(&xi, &r, &g);
        p.iter().zip(&phi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn recovers_gradient_potential_at_second_order() {
        let e1 = manufactured(64);
        let e2 = manufactured(128);
        assert!(e2 < 1e-3, "{e2}");
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = NormalGrid::new(12.0, 32, 4.0).unwrap();
        let z = vec![vec![ZERO; 33]; 2];
        assert!(pressure_dn_mode(&[0.3], &z, &g).iter().all(|v| v.norm() == 0.0));
    }
}
