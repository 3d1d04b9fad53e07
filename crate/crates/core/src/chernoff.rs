//! Chernoff functions for the free Schrödinger group on a finite-energy space,
//! their Haar-measure variants, the Chernoff hypothesis certificates and the
//! exact free propagator.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::algebra::{exp_jacobian_complex, scalar_curvature};
use crate::error::{Error, Result};
use crate::linalg::{fit_slope, matrix_power, op_norm, sqrt_i, CMat};
use crate::oscillatory::{adaptive, orthonormal_generators, weighted_gaussian_step, HermitePolicy};
use crate::representation::FiniteEnergySpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Gaussian average against Lebesgue measure on the algebra.
    Lebesgue,
    /// Same average weighted by the exponential-map Jacobian.
    Haar,
    /// `Haar` with the scalar-curvature phase removed.
    HaarCorrected,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lebesgue" => Ok(Variant::Lebesgue),
            "haar" => Ok(Variant::Haar),
            "haar_corrected" => Ok(Variant::HaarCorrected),
            _ => Err(Error::Domain(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChernoffStep {
    pub space: Arc<FiniteEnergySpace>,
    pub variant: Variant,
    pub t_step: f64,
    pub hbar: f64,
    pub matrix: CMat,
    pub quad_order: usize,
}

fn check_hbar(hbar: f64) -> Result<()> {
    if hbar > 0.0 && hbar.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("hbar must be positive, got {hbar}")))
    }
}

/// One Chernoff step `S(t)`, `S̃(t)` or `S̃_R(t)`.
///
/// The Haar weight is the Jacobian at the rotated algebra point
/// `e^{iπ/4} √(ħt) x`, the same substitution that turns the oscillatory
/// integral into the Gaussian one. Negative `t_step` returns `S(|t|)†`.
pub fn build_step(
    space: &Arc<FiniteEnergySpace>,
    variant: Variant,
    t_step: f64,
    hbar: f64,
    policy: &HermitePolicy,
) -> Result<ChernoffStep> {
    check_hbar(hbar)?;
    if !t_step.is_finite() {
        return Err(Error::Domain("t_step must be finite".into()));
    }
    if t_step < 0.0 {
        let mut s = build_step(space, variant, -t_step, hbar, policy)?;
        s.matrix = s.matrix.adjoint();
        s.t_step = t_step;
        return Ok(s);
    }
    let dim = space.total_dim;
    let tau = hbar * t_step;
    let algebra = space.algebra().clone();
    let weighted = variant != Variant::Lebesgue && !algebra.is_abelian();
    let (mut matrix, quad_order) = if tau == 0.0 {
        (CMat::identity(dim, dim), 0)
    } else if weighted {
        scalar_curvature(&algebra)?;
        let frame = algebra.orthonormal_frame();
        let scale = sqrt_i() * tau.sqrt();
        let weight = move |x: &[f64]| -> Complex64 {
            let y = &frame * DVector::from_row_slice(x);
            exp_jacobian_complex(&algebra, &y.map(|v| scale * v))
        };
        adaptive(policy, |rule| weighted_gaussian_step(space, tau, rule, Some(&weight)))?
    } else {
        adaptive(policy, |rule| weighted_gaussian_step(space, tau, rule, None))?
    };
    if variant == Variant::HaarCorrected {
        let r = scalar_curvature(space.algebra())?;
        matrix *= Complex64::from_polar(1.0, hbar * r * t_step / 6.0);
    }
    Ok(ChernoffStep { space: space.clone(), variant, t_step, hbar, matrix, quad_order })
}

/// `S(total_t / n)^n`.
pub fn compose(
    space: &Arc<FiniteEnergySpace>,
    variant: Variant,
    total_t: f64,
    n: usize,
    hbar: f64,
    policy: &HermitePolicy,
) -> Result<CMat> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let step = build_step(space, variant, total_t / n as f64, hbar, policy)?;
    Ok(matrix_power(&step.matrix, n))
}

/// `U(t) = e^{-iħtλ/2}` on each block.
pub fn free_propagator(space: &FiniteEnergySpace, t: f64, hbar: f64) -> CMat {
    let mut u = CMat::zeros(space.total_dim, space.total_dim);
    for (b, rep) in space.blocks.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -hbar * t * rep.lambda / 2.0);
        for i in space.block_range(b) {
            u[(i, i)] = phase;
        }
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBound {
    pub bound: f64,
    pub measured: f64,
    pub ok: bool,
}

/// `∫_0^∞ r^n e^{-r²/2 + k r} dr` via Hermite polynomials.
///
/// With `F(k) = e^{k²/2} √(2π) Φ(k)`, Leibniz gives
/// `F^{(n)} = P_n(k) F(k) + Σ_{j<n} C(n,j) P_j(k) (−1)^{n−j−1} He_{n−j−1}(k)`,
/// where `P_j(k) = (−i)^j He_j(ik)` obeys `P_{j+1} = k P_j + j P_{j−1}`.
pub fn radial_gaussian_moment(n: usize, k: f64) -> f64 {
    let mut p = vec![1.0, k];
    let mut he = vec![1.0, k];
    for j in 1..n.max(1) {
        p.push(k * p[j] + j as f64 * p[j - 1]);
        he.push(k * he[j] - j as f64 * he[j - 1]);
    }
    let normal = Normal::standard();
    let f = (k * k / 2.0).exp() * (2.0 * PI).sqrt() * normal.cdf(k);
    let mut binom = 1.0;
    let mut sum = 0.0;
    for j in 0..n {
        let sign = if (n - j - 1) % 2 == 0 { 1.0 } else { -1.0 };
        sum += binom * p[j] * sign * he[n - j - 1];
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    p[n] * f + sum
}

/// Certifies `‖S(t)‖ ≤ (2π)^{-d/2} |S^{d−1}| ∫_0^∞ r^{d−1} e^{-r²/2} e^{r l √(ħt/2)} dr`,
/// with `l = d · max_a ‖E_a‖` over g-orthonormal generators.
pub fn norm_bound_certificate(space: &Arc<FiniteEnergySpace>, t: f64, hbar: f64, policy: &HermitePolicy) -> Result<NormBound> {
    check_hbar(hbar)?;
    let d = space.algebra().dim;
    let l = d as f64
        * orthonormal_generators(space)
            .iter()
            .flatten()
            .map(op_norm)
            .fold(0.0, f64::max);
    let k = l * (hbar * t.abs() / 2.0).sqrt();
    let sphere = 2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0);
    let bound = (2.0 * PI).powf(-(d as f64) / 2.0) * sphere * radial_gaussian_moment(d - 1, k);
    let measured = op_norm(&build_step(space, Variant::Lebesgue, t, hbar, policy)?.matrix);
    Ok(NormBound { bound, measured, ok: measured <= bound * (1.0 + 1e-10) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorFit {
    pub ts: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Log-log slope over the nonzero residuals; `None` if fewer than two.
    pub slope: Option<f64>,
}

/// `r(t) = ‖S(t) − I + (iħt/2)·Casimir‖` along `t_ladder`, with the log-log slope.
pub fn taylor_remainder_certificate(
    space: &Arc<FiniteEnergySpace>,
    t_ladder: &[f64],
    hbar: f64,
    policy: &HermitePolicy,
) -> Result<TaylorFit> {
    let dim = space.total_dim;
    let cas = space.casimir_matrix();
    let mut residuals = Vec::with_capacity(t_ladder.len());
    for &t in t_ladder {
        let s = build_step(space, Variant::Lebesgue, t, hbar, policy)?.matrix;
        let linear = CMat::identity(dim, dim) - &cas * Complex64::new(0.0, hbar * t / 2.0);
        residuals.push(op_norm(&(s - linear)));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = t_ladder
        .iter()
        .zip(&residuals)
        .filter(|(_, r)| **r > 1e-300)
        .map(|(t, r)| (t.ln(), r.ln()))
        .unzip();
    let slope = (lx.len() >= 2).then(|| fit_slope(&lx, &ly));
    Ok(TaylorFit { ts: t_ladder.to_vec(), residuals, slope })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftRow {
    pub n: usize,
    pub block_lambda: f64,
    /// Unwrapped `arg tr(block of S̃(t/n)^n U(t)†)`.
    pub phase_drift: f64,
    /// `‖S̃_R(t/n)^n − U(t)‖` on the block.
    pub corrected_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub expected: f64,
    pub rows: Vec<DriftRow>,
}

fn block(m: &CMat, r: std::ops::Range<usize>) -> CMat {
    m.view((r.start, r.start), (r.len(), r.len())).into_owned()
}

/// Phase left by the Haar-weighted Chernoff product against the free propagator.
pub fn curvature_drift(
    space: &Arc<FiniteEnergySpace>,
    total_t: f64,
    n_ladder: &[usize],
    hbar: f64,
    policy: &HermitePolicy,
) -> Result<DriftReport> {
    let r = scalar_curvature(space.algebra())?;
    let u = free_propagator(space, total_t, hbar);
    let nb = space.blocks.len();
    let mut last_phase: Vec<Option<f64>> = vec![None; nb];
    let mut rows = Vec::new();
    for &n in n_ladder {
        let haar = compose(space, Variant::Haar, total_t, n, hbar, policy)?;
        let corrected = compose(space, Variant::HaarCorrected, total_t, n, hbar, policy)?;
        let ratio = &haar * u.adjoint();
        for b in 0..nb {
            let range = space.block_range(b);
            let raw = block(&ratio, range.clone()).trace().arg();
            let phase = match last_phase[b] {
                None => raw,
                Some(prev) => raw + (2.0 * PI) * ((prev - raw) / (2.0 * PI)).round(),
            };
            last_phase[b] = Some(phase);
            rows.push(DriftRow {
                n,
                block_lambda: space.blocks[b].lambda,
                phase_drift: phase,
                corrected_error: op_norm(&(block(&corrected, range.clone()) - block(&u, range))),
            });
        }
    }
    Ok(DriftReport { expected: -hbar * total_t * r / 6.0, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn radial_by_quadrature(n: usize, k: f64) -> f64 {
        // composite Simpson on [0, 40]
        let m = 40_000;
        let h = 40.0 / m as f64;
        let f = |r: f64| r.powi(n as i32) * (-r * r / 2.0 + k * r).exp();
        let mut s = f(0.0) + f(40.0);
        for i in 1..m {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn radial_formula_matches_quadrature() {
        for n in 0..5 {
            for k in [0.0, 0.3, 1.0, 2.5] {
                let a = radial_gaussian_moment(n, k);
                let b = radial_by_quadrature(n, k);
                assert!((a - b).abs() <= 1e-10 * b.max(1.0), "n = {n}, k = {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn u1_variants_coincide() {
        let space = Arc::new(FiniteEnergySpace::u1_band(3));
        let p = HermitePolicy::default();
        let base = build_step(&space, Variant::Lebesgue, 0.4, 1.0, &p).unwrap().matrix;
        for v in [Variant::Haar, Variant::HaarCorrected] {
            assert!(max_abs_diff(&build_step(&space, v, 0.4, 1.0, &p).unwrap().matrix, &base) < 1e-15);
        }
        assert!(max_abs_diff(&base, &free_propagator(&space, 0.4, 1.0)) < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let space = Arc::new(FiniteEnergySpace::su2_spins(&[1, 2]).unwrap());
        for v in [Variant::Lebesgue, Variant::Haar, Variant::HaarCorrected] {
            let s = build_step(&space, v, 0.0, 1.0, &HermitePolicy::default()).unwrap();
            assert_eq!(s.matrix, CMat::identity(5, 5));
        }
    }

    #[test]
    fn negative_time_by_adjoint() {
        let space = Arc::new(FiniteEnergySpace::u1_band(2));
        let p = HermitePolicy::default();
        let s = build_step(&space, Variant::Lebesgue, -0.3, 1.0, &p).unwrap().matrix;
        assert!(max_abs_diff(&s, &free_propagator(&space, -0.3, 1.0)) < 1e-12);
    }

    #[test]
    fn free_propagator_examples() {
        let space = FiniteEnergySpace::u1_band(2);
        let u = free_propagator(&space, PI, 1.0);
        let i = space.index_of(&crate::representation::BasisFunction::Character(vec![2])).unwrap();
        assert!((u[(i, i)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let z = space.index_of(&crate::representation::BasisFunction::Character(vec![0])).unwrap();
        assert_eq!(u[(z, z)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn norm_bound_examples() {
        let p = HermitePolicy::default();
        let space = Arc::new(FiniteEnergySpace::su2_spins(&[1]).unwrap());
        let nb = norm_bound_certificate(&space, 0.0, 1.0, &p).unwrap();
        assert!(nb.bound >= 1.0 - 1e-14 && (nb.measured - 1.0).abs() < 1e-15 && nb.ok, "{nb:?}");
        assert!(norm_bound_certificate(&space, 0.5, 1.0, &p).unwrap().ok);
        // d = 1: 2 e^{k²/2} Φ(k)
        let u1 = Arc::new(FiniteEnergySpace::u1_band(3));
        let nb = norm_bound_certificate(&u1, 0.5, 1.0, &p).unwrap();
        let k = 3.0 * 0.25f64.sqrt();
        let want = 2.0 * (k * k / 2.0).exp() * Normal::standard().cdf(k);
        assert!((nb.bound - want).abs() < 1e-13 && nb.ok, "{nb:?} {want}");
    }

    #[test]
    fn taylor_u1_slope() {
        let space = Arc::new(FiniteEnergySpace::u1_band(3));
        let fit = taylor_remainder_certificate(&space, &[1e-1, 3e-2, 1e-2, 3e-3], 1.0, &HermitePolicy::default()).unwrap();
        assert!((fit.slope.unwrap() - 2.0).abs() < 0.05, "{fit:?}");
        let trivial = Arc::new(FiniteEnergySpace::u1_band(0));
        let fit = taylor_remainder_certificate(&trivial, &[1e-1, 1e-2], 1.0, &HermitePolicy::default()).unwrap();
        assert!(fit.residuals.iter().all(|r| *r == 0.0) && fit.slope.is_none());
    }
}
