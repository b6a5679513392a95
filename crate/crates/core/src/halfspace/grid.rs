//! Graded normal grid on [0, X] and the half-space grid built on it.

use crate::error::{QthsError, Result};
use crate::numerics::compact_derivative_uniform;
use crate::wholespace::TorusGrid;
use crate::C64;
use serde::{Deserialize, Serialize};

/// Nodes x(s) = X·(e^{cs} − 1)/(e^c − 1) on a uniform s-grid of `cells` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalGrid {
    pub x_max: f64,
    pub cells: usize,
    pub stretch: f64,
    pub nodes: Vec<f64>,
    /// dx/ds at every node
    pub jacobian: Vec<f64>,
    /// trapezoidal weights in s mapped to x
    pub weights: Vec<f64>,
}

impl NormalGrid {
    pub fn new(x_max: f64, cells: usize, stretch: f64) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) || cells < 8 || !(stretch > 0.0) {
            return Err(QthsError::Grid(format!("invalid normal grid: X = {x_max}, cells = {cells}, stretch = {stretch}")));
        }
        let den = stretch.exp_m1();
        let ds = 1.0 / cells as f64;
        let nodes: Vec<f64> = (0..=cells).map(|i| x_max * (stretch * i as f64 * ds).exp_m1() / den).collect();
        let jacobian: Vec<f64> = (0..=cells).map(|i| x_max * stretch * (stretch * i as f64 * ds).exp() / den).collect();
        let weights = (0..=cells)
            .map(|i| {
                let end = if i == 0 || i == cells { 0.5 } else { 1.0 };
                end * ds * jacobian[i]
            })
            .collect();
        let g = NormalGrid { x_max, cells, stretch, nodes, jacobian, weights };
        if g.nodes[1] > 1e-2 * x_max {
            return Err(QthsError::Grid(format!("first normal cell {} exceeds X/100", g.nodes[1])));
        }
        Ok(g)
    }

    /// Default grid for a given `a`: X = 16/√a, 256 cells.
    pub fn default_for(a: f64) -> Result<Self> {
        NormalGrid::new(16.0 / a.sqrt(), 256, 4.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same map with twice as many cells; old nodes are every second new node.
    pub fn refined(&self) -> Result<Self> {
        NormalGrid::new(self.x_max, 2 * self.cells, self.stretch)
    }

    /// Fourth-order compact derivative d/dx.
    pub fn derivative(&self, f: &[C64]) -> Vec<C64> {
        let d = compact_derivative_uniform(f, 1.0 / self.cells as f64);
        d.iter().zip(&self.jacobian).map(|(v, j)| v / *j).collect()
    }

    /// Cell index and local coordinate t ∈ [0, 1] of a point in [0, X].
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let x = x.clamp(0.0, self.x_max);
        let s = (x / self.x_max * self.stretch.exp_m1()).ln_1p() / self.stretch;
        let mut i = ((s * self.cells as f64).floor() as usize).min(self.cells - 1);
        while i > 0 && self.nodes[i] > x {
            i -= 1;
        }
        while i + 1 < self.cells && self.nodes[i + 1] < x {
            i += 1;
        }
        let h = self.nodes[i + 1] - self.nodes[i];
        (i, ((x - self.nodes[i]) / h).clamp(0.0, 1.0))
    }

    /// Cubic Hermite interpolation from nodal values and x-slopes.
    pub fn hermite(&self, values: &[C64], slopes: &[C64], x: f64) -> C64 {
        let (i, t) = self.locate(x);
        let h = self.nodes[i + 1] - self.nodes[i];
        let c = hermite_coefficients(values[i], values[i + 1], slopes[i] * h, slopes[i + 1] * h);
        c[0] + t * (c[1] + t * (c[2] + t * c[3]))
    }
}

/// Monomial coefficients in t of the Hermite cubic with end values g0, g1 and
/// end slopes d0, d1 already scaled by the cell width.
pub fn hermite_coefficients(g0: C64, g1: C64, d0: C64, d1: C64) -> [C64; 4] {
    [g0, d0, -3.0 * g0 - 2.0 * d0 + 3.0 * g1 - d1, 2.0 * g0 + d0 - 2.0 * g1 + d1]
}

/// Tangential torus (N−1 axes) times the graded normal grid. Field arrays
/// are row-major with the normal index fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceGrid {
    pub tangential: TorusGrid,
    pub normal: NormalGrid,
    /// points of the uniform grid on the doubled interval [−X, X) used by
    /// the whole-space part
    pub doubled_points: usize,
}

impl HalfSpaceGrid {
    pub fn new(tangential: TorusGrid, normal: NormalGrid, doubled_points: usize) -> Result<Self> {
        if doubled_points < 8 || doubled_points % 2 != 0 {
            return Err(QthsError::Grid(format!("doubled grid needs an even count ≥ 8, got {doubled_points}")));
        }
        if tangential.n + 1 > 3 {
            return Err(QthsError::Grid("only N = 2 and N = 3 are supported".into()));
        }
        Ok(HalfSpaceGrid { tangential, normal, doubled_points })
    }

    /// Dimension N of the half-space.
    pub fn n(&self) -> usize {
        self.tangential.n + 1
    }

    pub fn shape(&self) -> Vec<usize> {
        let mut s = self.tangential.counts.clone();
        s.push(self.normal.len());
        s
    }

    pub fn modes(&self) -> usize {
        self.tangential.len()
    }

    pub fn index(&self, mode: usize, node: usize) -> usize {
        mode * self.normal.len() + node
    }

    /// Same grid with the normal grid refined.
    pub fn with_normal(&self, normal: NormalGrid) -> Self {
        HalfSpaceGrid { normal, ..self.clone() }
    }
}
