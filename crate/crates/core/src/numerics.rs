//! Scalar kernels shared by the symbol and solver modules: stable complex
//! `expm1`, the φ-function, divided differences of the exponential, the
//! boundary kernel `M`, exponential moments of polynomials and a couple of
//! small banded solvers.

use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// `exp(z) - 1` without cancellation for small `|z|`.
pub fn expm1(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    let em1 = x.exp_m1();
    let s = (0.5 * y).sin();
    C64::new(em1 * y.cos() - 2.0 * s * s, x.exp() * y.sin())
}

/// φ(w) = (e^w - 1)/w with φ(0) = 1.
pub fn phi1(w: C64) -> C64 {
    if w.norm() < 1e-3 {
        ONE + w * (0.5 + w * (1.0 / 6.0 + w * (1.0 / 24.0 + w / 120.0)))
    } else {
        expm1(w) / w
    }
}

/// φ_k(z) = Σ_j z^j/(j+k)!, the entire functions of exponential integrators.
pub fn phi_k(k: usize, z: C64) -> C64 {
    if z.norm() < 1.0 {
        let mut fact = 1.0;
        for i in 2..=k {
            fact *= i as f64;
        }
        let mut term = C64::new(1.0 / fact, 0.0);
        let mut sum = term;
        for j in 1..60 {
            term = term * z / ((j + k) as f64);
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        // φ_{k+1} = (φ_k - 1/k!)/z
        let mut p = z.exp();
        let mut fact = 1.0;
        for j in 0..k {
            if j > 0 {
                fact *= j as f64;
            }
            p = (p - 1.0 / fact) / z;
        }
        p
    }
}

/// First divided difference of `exp` at `z1`, `z2`.
pub fn exp_dd1(z1: C64, z2: C64) -> C64 {
    let (lo, hi) = if z1.re <= z2.re { (z1, z2) } else { (z2, z1) };
    hi.exp() * phi1(lo - hi)
}

/// Second divided difference of `exp` at three (possibly coalescing) points.
pub fn exp_dd2(z1: C64, z2: C64, z3: C64) -> C64 {
    let pts = [z1, z2, z3];
    let pairs = [(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)];
    let mut best = pairs[0];
    let mut sep = -1.0;
    for &(i, j, k) in &pairs {
        let d = (pts[i] - pts[j]).norm();
        if d > sep {
            sep = d;
            best = (i, j, k);
        }
    }
    if sep < 0.5 {
        let c = (z1 + z2 + z3) / 3.0;
        let w = [z1 - c, z2 - c, z3 - c];
        // complete homogeneous polynomials h_k(w1, w2, w3)
        let mut h1 = ONE;
        let mut h2 = ONE;
        let mut h3 = ONE;
        let mut sum = C64::new(0.5, 0.0);
        let mut inv_fact = 0.5;
        for n in 3..40 {
            h1 *= w[0];
            h2 = h1 + w[1] * h2;
            h3 = h2 + w[2] * h3;
            inv_fact /= n as f64;
            let term = h3 * inv_fact;
            sum += term;
            // h_1 of centred points vanishes, so never stop on the first term
            if n > 6 && term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        c.exp() * sum
    } else {
        let (i, j, k) = best;
        (exp_dd1(pts[i], pts[k]) - exp_dd1(pts[j], pts[k])) / (pts[i] - pts[j])
    }
}

/// M(γ1, γ2, x) = (e^{-γ1 x} - e^{-γ2 x})/(γ1 - γ2), symmetric in (γ1, γ2).
pub fn kernel_m(g1: C64, g2: C64, x: f64) -> C64 {
    if x == 0.0 {
        return ZERO;
    }
    -x * exp_dd1(-g1 * x, -g2 * x)
}

/// ψ_m(w) = ∫_0^1 e^{-ws} s^m ds for Re w ≥ 0.
pub fn psi(m: usize, w: C64) -> C64 {
    let r = w.norm();
    if r <= 1.0 {
        let mut sum = ZERO;
        let mut pw = ONE;
        let mut fact = 1.0;
        for j in 0..40 {
            if j > 0 {
                pw *= -w;
                fact *= j as f64;
            }
            let term = pw / (fact * (j + m + 1) as f64);
            sum += term;
            if j > 2 && term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else if r > (m + 1) as f64 {
        let e = (-w).exp();
        let mut p = -expm1(-w) / w;
        for k in 1..=m {
            p = (p * k as f64 - e) / w;
        }
        p
    } else {
        let mut term = C64::new(1.0 / (m + 1) as f64, 0.0);
        let mut sum = term;
        for j in 1..400 {
            term = term * w / (m + j + 1) as f64;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        (-w).exp() * sum
    }
}

/// Divided difference (ψ_m(w1) - ψ_m(w2))/(w1 - w2), stable near w1 = w2.
pub fn psi_dd(m: usize, w1: C64, w2: C64) -> C64 {
    let d = w1 - w2;
    if d.norm() >= 1.0 {
        return (psi(m, w1) - psi(m, w2)) / d;
    }
    let c = 0.5 * (w1 + w2);
    let half = 0.5 * d;
    let h2 = half * half;
    let mut sum = ZERO;
    let mut pw = ONE;
    let mut fact = 1.0;
    for j in 0..12 {
        if j > 0 {
            pw *= h2;
            fact *= ((2 * j) * (2 * j + 1)) as f64;
        }
        let term = psi(m + 2 * j + 1, c) * pw / fact;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    -sum
}

/// Solves a tridiagonal system in place (Thomas algorithm, no pivoting).
/// `lower[i]` couples row i to i-1, `upper[i]` couples row i to i+1.
pub fn solve_tridiagonal(lower: &[C64], diag: &[C64], upper: &[C64], rhs: &mut [C64]) {
    let n = diag.len();
    let mut c = vec![ZERO; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= c[i + 1] * next;
    }
}

/// Fourth-order compact derivative with respect to the uniform computational
/// coordinate (unit spacing `ds`), third-order closures at both ends.
pub fn compact_derivative_uniform(f: &[C64], ds: f64) -> Vec<C64> {
    let n = f.len();
    assert!(n >= 3, "compact derivative needs at least three samples");
    let mut lower = vec![C64::new(0.25, 0.0); n];
    let diag = vec![ONE; n];
    let mut upper = vec![C64::new(0.25, 0.0); n];
    let mut rhs = vec![ZERO; n];
    lower[0] = ZERO;
    upper[0] = C64::new(2.0, 0.0);
    rhs[0] = (-5.0 * f[0] + 4.0 * f[1] + f[2]) / (2.0 * ds);
    for i in 1..n - 1 {
        rhs[i] = 0.75 * (f[i + 1] - f[i - 1]) / ds;
    }
    lower[n - 1] = C64::new(2.0, 0.0);
    upper[n - 1] = ZERO;
    rhs[n - 1] = (5.0 * f[n - 1] - 4.0 * f[n - 2] - f[n - 3]) / (2.0 * ds);
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
    rhs
}

/// Relative difference `|x - y| / max(|x|, |y|, floor)`.
pub fn rel_diff(x: C64, y: C64, floor: f64) -> f64 {
    (x - y).norm() / x.norm().max(y.norm()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm1_small_argument() {
        let z = c(1e-9, -2e-9);
        let v = expm1(z);
        let exact = z + z * z / 2.0;
        assert!((v - exact).norm() < 1e-24);
    }

    #[test]
    fn phi1_crosses_series_threshold_smoothly() {
        for &r in &[0.99e-3, 1.01e-3] {
            let w = c(r * 0.6, -r * 0.8);
            let series = ONE + w / 2.0 + w * w / 6.0 + w * w * w / 24.0;
            assert!((phi1(w) - series).norm() < 1e-13);
        }
    }

    #[test]
    fn phi_k_matches_recurrence_both_sides() {
        for &z in &[c(0.3, 0.2), c(-3.0, 1.0), c(0.999, 0.0), c(1.001, 0.0)] {
            let p1 = phi_k(1, z);
            assert!((p1 - expm1(z) / z).norm() < 1e-14);
            let p2 = phi_k(2, z);
            assert!((p2 - (p1 - 1.0) / z).norm() < 1e-13);
        }
        assert!((phi_k(0, c(0.5, 0.0)) - c(0.5f64.exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn kernel_m_confluent_limit() {
        let g = c(1.3, 0.4);
        let x = 0.7;
        let limit = -x * (-g * x).exp();
        let v = kernel_m(g, g + c(1e-13, 0.0), x);
        assert!((v - limit).norm() < 1e-12 * limit.norm());
        let (g1, g2) = (c(1.0, 0.0), c(3.0, 0.0));
        let direct = ((-g1 * x).exp() - (-g2 * x).exp()) / (g1 - g2);
        assert!((kernel_m(g1, g2, x) - direct).norm() < 1e-15);
        assert!((kernel_m(g2, g1, x) - direct).norm() < 1e-15);
    }

    #[test]
    fn kernel_m_large_separation_no_overflow() {
        let v = kernel_m(c(1.0, 0.0), c(2000.0, 0.0), 1.0);
        assert!(v.re.is_finite());
        assert!((v + c((-1.0f64).exp() / 1999.0, 0.0)).norm() < 1e-17);
    }

    #[test]
    fn exp_dd2_agrees_across_regimes() {
        let z = [c(-0.3, 0.1), c(-0.9, -0.2), c(-2.0, 0.5)];
        let direct = |a: C64, b: C64, cc: C64| {
            ((a.exp() - b.exp()) / (a - b) - (b.exp() - cc.exp()) / (b - cc)) / (a - cc)
        };
        let v = exp_dd2(z[0], z[1], z[2]);
        assert!((v - direct(z[0], z[1], z[2])).norm() < 1e-14);
        // nearly coalescing: compare against the second derivative / 2
        let p = c(-0.4, 0.3);
        let v = exp_dd2(p, p + c(1e-9, 0.0), p - c(0.0, 1e-9));
        assert!((v - p.exp() / 2.0).norm() < 1e-9);
        // one close pair, third far
        let a = c(-1.0, 0.0);
        let v = exp_dd2(a, a + c(1e-12, 0.0), c(-3.0, 0.0));
        let exact = (a.exp() - (a.exp() - c(-3.0, 0.0).exp()) / (a - c(-3.0, 0.0))) / (a - c(-3.0, 0.0));
        assert!((v - exact).norm() < 1e-12);
        // distinct points inside the series radius
        let w = [c(-0.06, 0.02), c(-0.025, -0.005), c(-0.1, -0.015)];
        assert!((exp_dd2(w[0], w[1], w[2]) - direct(w[0], w[1], w[2])).norm() < 1e-9);
    }

    fn psi_quad(m: usize, w: C64) -> C64 {
        // composite Simpson reference
        let n = 20000;
        let h = 1.0 / n as f64;
        let mut s = ZERO;
        for i in 0..=n {
            let t = i as f64 * h;
            let wt = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += wt * (-w * t).exp() * t.powi(m as i32);
        }
        s * h / 3.0
    }

    #[test]
    fn psi_moments_all_branches() {
        for m in 0..4 {
            for &w in &[c(0.3, 0.4), c(2.0, 1.0), c(3.5, -0.5), c(12.0, 7.0), c(0.0, 0.0)] {
                let v = psi(m, w);
                let r = psi_quad(m, w);
                assert!((v - r).norm() < 1e-12, "m={m} w={w} {v} {r}");
            }
        }
    }

    #[test]
    fn psi_divided_difference_confluent() {
        for m in 0..4 {
            let w = c(2.5, 0.7);
            let d = psi_dd(m, w + c(1e-7, 0.0), w - c(1e-7, 0.0));
            let deriv = -psi(m + 1, w);
            assert!((d - deriv).norm() < 1e-12);
            let far = psi_dd(m, c(0.5, 0.0), c(3.0, 1.0));
            let direct = (psi(m, c(0.5, 0.0)) - psi(m, c(3.0, 1.0))) / c(-2.5, -1.0);
            assert!((far - direct).norm() < 1e-14);
            let mid = psi_dd(m, c(1.0, 0.0), c(1.6, 0.2));
            let direct = (psi(m, c(1.0, 0.0)) - psi(m, c(1.6, 0.2))) / c(-0.6, -0.2);
            assert!((mid - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn compact_derivative_fourth_order() {
        let err = |n: usize| {
            let ds = 1.0 / (n - 1) as f64;
            let f: Vec<C64> = (0..n).map(|i| c((2.0 * i as f64 * ds).sin(), 0.0)).collect();
            let d = compact_derivative_uniform(&f, ds);
            (0..n)
                .map(|i| (d[i].re - 2.0 * (2.0 * i as f64 * ds).cos()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(33), err(65));
        assert!(e2 < 1e-4);
        assert!(e1 / e2 > 6.0);
    }

    #[test]
    fn tridiagonal_solves() {
        let lower = vec![ZERO, c(1.0, 0.0), c(1.0, 0.0)];
        let diag = vec![c(4.0, 0.0), c(4.0, 1.0), c(4.0, 0.0)];
        let upper = vec![c(1.0, 0.0), c(1.0, 0.0), ZERO];
        let x = [c(1.0, 2.0), c(-1.0, 0.5), c(0.3, 0.0)];
        let mut b = vec![
            diag[0] * x[0] + upper[0] * x[1],
            lower[1] * x[0] + diag[1] * x[1] + upper[1] * x[2],
            lower[2] * x[1] + diag[2] * x[2],
        ];
        solve_tridiagonal(&lower, &diag, &upper, &mut b);
        for i in 0..3 {
            assert!((b[i] - x[i]).norm() < 1e-14);
        }
    }
}
