//! Gridded complex fields and the shared field file format.
//!
//! A [`Field`] stores one complex array per component over a row-major grid.
//! Velocity fields carry N components, tensor fields N×N (row-major, kept
//! symmetric and traceless), pressure fields one.

use crate::error::{QthsError, Result};
use crate::C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Velocity,
    Tensor,
    Pressure,
}

impl FieldKind {
    pub fn components(self, n: usize) -> usize {
        match self {
            FieldKind::Velocity => n,
            FieldKind::Tensor => n * n,
            FieldKind::Pressure => 1,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            FieldKind::Velocity => "velocity",
            FieldKind::Tensor => "tensor",
            FieldKind::Pressure => "pressure",
        }
    }

    fn from_tag(s: &str) -> Result<Self> {
        match s {
            "velocity" => Ok(FieldKind::Velocity),
            "tensor" => Ok(FieldKind::Tensor),
            "pressure" => Ok(FieldKind::Pressure),
            _ => Err(QthsError::Config(format!("unknown field kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub kind: FieldKind,
    pub n: usize,
    pub shape: Vec<usize>,
    pub comps: Vec<Vec<C64>>,
}

pub type VelocityField = Field;
pub type QTensorField = Field;
pub type PressureField = Field;

impl Field {
    pub fn zeros(kind: FieldKind, n: usize, shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Field { kind, n, shape: shape.to_vec(), comps: vec![vec![C64::new(0.0, 0.0); len]; kind.components(n)] }
    }

    /// Builds a field by evaluating `f(point index, component)`.
    pub fn from_fn(kind: FieldKind, n: usize, shape: &[usize], f: impl Fn(usize, usize) -> C64) -> Self {
        let mut out = Field::zeros(kind, n, shape);
        for (c, comp) in out.comps.iter_mut().enumerate() {
            for (i, v) in comp.iter_mut().enumerate() {
                *v = f(i, c);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    /// Component index of the tensor entry (j, k).
    pub fn tidx(&self, j: usize, k: usize) -> usize {
        j * self.n + k
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.shape != other.shape || self.n != other.n {
            return Err(QthsError::Grid(format!("grid mismatch: {:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest pointwise |Q - Qᵀ| + |tr Q| relative to the field's max entry.
    pub fn s0_defect(&self) -> f64 {
        if self.kind != FieldKind::Tensor {
            return 0.0;
        }
        let scale = self.max_abs().max(1e-300);
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let mut tr = C64::new(0.0, 0.0);
            for j in 0..self.n {
                tr += self.comps[self.tidx(j, j)][i];
                for k in j + 1..self.n {
                    worst = worst.max((self.comps[self.tidx(j, k)][i] - self.comps[self.tidx(k, j)][i]).norm());
                }
            }
            worst = worst.max(tr.norm());
        }
        worst / scale
    }

    /// Projects every point onto symmetric traceless matrices.
    pub fn project_s0(&mut self) {
        if self.kind != FieldKind::Tensor {
            return;
        }
        let n = self.n;
        for i in 0..self.len() {
            for j in 0..n {
                for k in j + 1..n {
                    let m = 0.5 * (self.comps[j * n + k][i] + self.comps[k * n + j][i]);
                    self.comps[j * n + k][i] = m;
                    self.comps[k * n + j][i] = m;
                }
            }
            let tr: C64 = (0..n).map(|j| self.comps[j * n + j][i]).sum::<C64>() / n as f64;
            for j in 0..n {
                self.comps[j * n + j][i] -= tr;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Field) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn scaled(&self, s: C64) -> Field {
        let mut out = self.clone();
        out.comps.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    /// Writes the field: a text header line followed by little-endian
    /// (re, im) f64 pairs, component-major then row-major.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let dims: Vec<String> = self.shape.iter().map(|d| d.to_string()).collect();
        writeln!(w, "QTHS1 {} {} {} {} {}", self.n, self.shape.len(), dims.join(" "), self.kind.tag(), self.ncomp())?;
        for v in self.comps.iter().flatten() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Field> {
        let mut br = BufReader::new(r);
        let mut header = String::new();
        br.read_line(&mut header)?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        let bad = || QthsError::Config(format!("malformed field header {header:?}"));
        if tok.first() != Some(&"QTHS1") || tok.len() < 3 {
            return Err(bad());
        }
        let n: usize = tok[1].parse().map_err(|_| bad())?;
        let nd: usize = tok[2].parse().map_err(|_| bad())?;
        if tok.len() != 5 + nd {
            return Err(bad());
        }
        let shape = tok[3..3 + nd].iter().map(|t| t.parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
        let kind = FieldKind::from_tag(tok[3 + nd])?;
        let nc: usize = tok[4 + nd].parse().map_err(|_| bad())?;
        if nc != kind.components(n) {
            return Err(bad());
        }
        let mut f = Field::zeros(kind, n, &shape);
        let mut buf = [0u8; 16];
        for v in f.comps.iter_mut().flatten() {
            br.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            *v = C64::new(re, im);
        }
        Ok(f)
    }
}

/// In-place multidimensional FFT over a row-major array. The inverse is
/// normalized by the total number of points.
pub fn fft_nd(data: &mut [C64], shape: &[usize], inverse: bool) {
    fft_leading(data, shape, shape.len(), inverse);
}

/// FFT over the first `axes` axes only; the inverse is normalized by the
/// number of points along those axes.
pub fn fft_leading(data: &mut [C64], shape: &[usize], axes: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    let mut stride = total;
    for &len in &shape[..axes] {
        stride /= len;
        if len == 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
        let mut line = vec![C64::new(0.0, 0.0); len];
        let block = len * stride;
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + off + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[start + off + k * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let s = 1.0 / shape[..axes].iter().product::<usize>() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Applies [`fft_nd`] to every component of a field.
pub fn transform(field: &Field, inverse: bool) -> Field {
    let mut out = field.clone();
    for c in out.comps.iter_mut() {
        fft_nd(c, &field.shape, inverse);
    }
    out
}

/// Transforms every component over all axes except the last.
pub fn transform_leading(field: &Field, inverse: bool) -> Field {
    let mut out = field.clone();
    let axes = field.shape.len() - 1;
    for c in out.comps.iter_mut() {
        fft_leading(c, &field.shape, axes, inverse);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_round_trip() {
        let shape = [4, 6];
        let data: Vec<C64> = (0..24).map(|i| C64::new(i as f64, (i * i) as f64 * 0.1)).collect();
        let mut d = data.clone();
        fft_nd(&mut d, &shape, false);
        fft_nd(&mut d, &shape, true);
        for (a, b) in d.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn file_round_trip() {
        let f = Field::from_fn(FieldKind::Tensor, 2, &[3, 2], |i, c| C64::new(i as f64, c as f64));
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert!(buf.starts_with(b"QTHS1 2 2 3 2 tensor 4\n"));
        assert_eq!(Field::read_from(&buf[..]).unwrap(), f);
    }

    #[test]
    fn projection_onto_s0() {
        let mut f = Field::from_fn(FieldKind::Tensor, 3, &[5], |i, c| C64::new((i + 2 * c) as f64, 0.3 * c as f64));
        f.project_s0();
        assert!(f.s0_defect() < 1e-15);
    }
}
