//! Small dense helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// e^{iπ/4}, the branch of i^{1/2} used throughout.
pub fn sqrt_i() -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn hermitian_residual(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// `exp(z·h)` for Hermitian `h` and complex `z`.
///
/// 1×1 and 2×2 use closed forms; larger blocks go through the
/// Hermitian eigendecomposition.
pub fn hermitian_exp(h: &CMat, z: Complex64) -> CMat {
    let n = h.nrows();
    match n {
        0 => CMat::zeros(0, 0),
        1 => CMat::from_element(1, 1, (z * h[(0, 0)].re).exp()),
        2 => {
            // h = a0·I + b·σ
            let a0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
            let bz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
            let bx = h[(1, 0)].re;
            let by = h[(1, 0)].im;
            let r = (bx * bx + by * by + bz * bz).sqrt();
            let pre = (z * a0).exp();
            let zr = z * r;
            let c = zr.cosh();
            // sinh(zr)/r, continuous at r = 0
            let s = if r > 1e-8 {
                zr.sinh() / r
            } else {
                z * (1.0 + zr * zr / 6.0)
            };
            let mut out = CMat::zeros(2, 2);
            out[(0, 0)] = pre * (c + s * bz);
            out[(1, 1)] = pre * (c - s * bz);
            out[(0, 1)] = pre * s * Complex64::new(bx, -by);
            out[(1, 0)] = pre * s * Complex64::new(bx, by);
            out
        }
        _ => {
            let eig = h.clone().symmetric_eigen();
            let v = &eig.eigenvectors;
            let d = eig.eigenvalues.map(|l| (z * l).exp());
            let mut scaled = v.clone();
            for (j, mut col) in scaled.column_iter_mut().enumerate() {
                col *= d[j];
            }
            scaled * v.adjoint()
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `m^n`, squaring when `n` is a power of two and multiplying left to right otherwise.
pub fn matrix_power(m: &CMat, n: usize) -> CMat {
    let dim = m.nrows();
    if n == 0 {
        return CMat::identity(dim, dim);
    }
    if n.is_power_of_two() {
        let mut acc = m.clone();
        let mut k = n;
        while k > 1 {
            acc = &acc * &acc;
            k /= 2;
        }
        acc
    } else {
        let mut acc = m.clone();
        for _ in 1..n {
            acc = &acc * m;
        }
        acc
    }
}
