//! Smooth single-mode data compatible with the reflections: even profiles in
//! the even components, x_N·(even) in the odd ones, Gaussian decay in x_N.

use super::solver::DataKind;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleMode {
    pub n: usize,
    pub interior: bool,
    pub boundary: bool,
    /// amplitude multiplying every component
    pub amplitude: f64,
}

impl SingleMode {
    pub fn new(n: usize, interior: bool, boundary: bool) -> Self {
        SingleMode { n, interior, boundary, amplitude: 1.0 }
    }

    /// Value of one data component at tangential point `xt` and depth `x`.
    pub fn value(&self, kind: DataKind, c: usize, xt: &[f64], x: f64) -> C64 {
        let n = self.n;
        let (c1, s1) = (xt[0].cos(), xt[0].sin());
        let c2 = if n == 3 { xt[1].cos() } else { 1.0 };
        let g = (-x * x).exp();
        let b = (-x * x / 4.0).exp();
        let last = n - 1;
        let diag_last = last * n + last;
        let v = match kind {
            DataKind::F if self.interior => {
                if c == 0 {
                    c1 * c2 * g
                } else if c == last {
                    s1 * x * g
                } else {
                    0.0
                }
            }
            DataKind::G if self.interior => {
                if c == 0 {
                    c2 * g
                } else if c == diag_last {
                    -c2 * g
                } else if c == last || c == last * n {
                    s1 * x * g
                } else {
                    0.0
                }
            }
            DataKind::H if self.boundary => {
                if c == last - 1 {
                    c1 * b
                } else {
                    0.0
                }
            }
            DataKind::DqBoundary if self.boundary => {
                let off = (last - 1) * n + last;
                let off_t = last * n + last - 1;
                if c == off || c == off_t {
                    0.5 * s1 * c2 * b
                } else if c == 0 {
                    0.3 * c1 * b
                } else if c == diag_last {
                    -0.3 * c1 * b
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        C64::new(self.amplitude * v, 0.0)
    }
}
