//! Group elements, piecewise geodesics, left-trivialized parallel transport and
//! the development of piecewise geodesics into piecewise straight lines.

use std::f64::consts::TAU;

use nalgebra::{DVector, Matrix2};
use num_complex::Complex64;

use crate::algebra::{ad_matrix, check_bi_invariance, LieAlgebraSpec};
use crate::error::{Error, Result};
use crate::linalg::RMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupFamily {
    U1,
    Torus(usize),
    Su2,
}

impl GroupFamily {
    pub fn dim(&self) -> usize {
        match self {
            GroupFamily::U1 => 1,
            GroupFamily::Torus(d) => *d,
            GroupFamily::Su2 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    U1(f64),
    Torus(Vec<f64>),
    /// Special unitary 2×2 matrix.
    Su2(Matrix2<Complex64>),
}

fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn pauli() -> [Matrix2<Complex64>; 3] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
    ]
}

impl GroupElement {
    pub fn identity(family: GroupFamily) -> Self {
        match family {
            GroupFamily::U1 => GroupElement::U1(0.0),
            GroupFamily::Torus(d) => GroupElement::Torus(vec![0.0; d]),
            GroupFamily::Su2 => GroupElement::Su2(Matrix2::identity()),
        }
    }

    pub fn family(&self) -> GroupFamily {
        match self {
            GroupElement::U1(_) => GroupFamily::U1,
            GroupElement::Torus(t) => GroupFamily::Torus(t.len()),
            GroupElement::Su2(_) => GroupFamily::Su2,
        }
    }

    /// Angles of an abelian element (U(1) gives a single angle).
    pub fn angles(&self) -> Option<Vec<f64>> {
        match self {
            GroupElement::U1(t) => Some(vec![*t]),
            GroupElement::Torus(t) => Some(t.clone()),
            GroupElement::Su2(_) => None,
        }
    }

    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        match (self, other) {
            (GroupElement::U1(a), GroupElement::U1(b)) => Ok(GroupElement::U1(reduce_angle(a + b))),
            (GroupElement::Torus(a), GroupElement::Torus(b)) if a.len() == b.len() => Ok(GroupElement::Torus(
                a.iter().zip(b).map(|(x, y)| reduce_angle(x + y)).collect(),
            )),
            (GroupElement::Su2(a), GroupElement::Su2(b)) => Ok(GroupElement::Su2(a * b)),
            _ => Err(Error::Domain("cannot multiply elements of different groups".into())),
        }
    }

    /// exp(α e3) exp(β e2) exp(γ e3) in SU(2).
    pub fn su2_from_euler(alpha: f64, beta: f64, gamma: f64) -> GroupElement {
        let z = |a: f64| group_exp_su2(&[0.0, 0.0, a]);
        let y = group_exp_su2(&[0.0, beta, 0.0]);
        GroupElement::Su2(z(alpha) * y * z(gamma))
    }

    /// Algebra vector `w` with `exp(w·e) = self` for SU(2), rotation angle in [0, 2π].
    pub fn su2_log(&self) -> Option<[f64; 3]> {
        let GroupElement::Su2(g) = self else { return None };
        let a = 0.5 * (g[(0, 0)].re + g[(1, 1)].re);
        let b = [-g[(0, 1)].im, -g[(0, 1)].re, -g[(0, 0)].im];
        let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        if nb == 0.0 {
            // ±I
            return Some(if a > 0.0 { [0.0; 3] } else { [0.0, 0.0, TAU] });
        }
        let theta = 2.0 * nb.atan2(a);
        Some([theta * b[0] / nb, theta * b[1] / nb, theta * b[2] / nb])
    }

    /// Distance from unitarity and unit determinant (zero for abelian elements).
    pub fn su2_residual(&self) -> f64 {
        match self {
            GroupElement::Su2(g) => {
                let u = (g.adjoint() * g - Matrix2::identity()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
                u.max((g.determinant() - Complex64::new(1.0, 0.0)).norm())
            }
            _ => 0.0,
        }
    }
}

fn group_exp_su2(w: &[f64]) -> Matrix2<Complex64> {
    let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let (s, c) = (theta / 2.0).sin_cos();
    let mut out = Matrix2::identity() * Complex64::new(c, 0.0);
    if theta > 0.0 {
        let sig = pauli();
        for a in 0..3 {
            out -= sig[a] * Complex64::new(0.0, s * w[a] / theta);
        }
    }
    out
}

/// `exp(s·v)` with `v` in the left-trivialized algebra coordinates of `family`.
pub fn group_exp(family: GroupFamily, v: &DVector<f64>, s: f64) -> Result<GroupElement> {
    if v.len() != family.dim() {
        return Err(Error::Structural(format!(
            "velocity has {} components, group has dimension {}",
            v.len(),
            family.dim()
        )));
    }
    Ok(match family {
        GroupFamily::U1 => GroupElement::U1(reduce_angle(s * v[0])),
        GroupFamily::Torus(_) => GroupElement::Torus(v.iter().map(|x| reduce_angle(s * x)).collect()),
        GroupFamily::Su2 => GroupElement::Su2(group_exp_su2(&[s * v[0], s * v[1], s * v[2]])),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub start: GroupElement,
    pub velocities: Vec<DVector<f64>>,
    pub t_total: f64,
}

impl PathSpec {
    pub fn new(start: GroupElement, velocities: Vec<DVector<f64>>, t_total: f64) -> Result<Self> {
        if velocities.is_empty() {
            return Err(Error::Domain("a path needs at least one segment".into()));
        }
        if !(t_total > 0.0 && t_total.is_finite()) {
            return Err(Error::Domain(format!("t_total must be positive, got {t_total}")));
        }
        let d = start.family().dim();
        for v in &velocities {
            if v.len() != d || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain("velocities must be finite vectors of the group dimension".into()));
            }
        }
        Ok(PathSpec { start, velocities, t_total })
    }

    pub fn segments(&self) -> usize {
        self.velocities.len()
    }

    pub fn step(&self) -> f64 {
        self.t_total / self.segments() as f64
    }
}

/// Point at time `s` of the piecewise geodesic with constant left velocity on each segment.
pub fn piecewise_geodesic(path: &PathSpec, s: f64) -> Result<GroupElement> {
    if !(0.0..=path.t_total).contains(&s) {
        return Err(Error::Domain(format!("s = {s} outside [0, {}]", path.t_total)));
    }
    let family = path.start.family();
    let delta = path.step();
    let j = ((s / delta).floor() as usize).min(path.segments() - 1);
    let mut x = path.start.clone();
    for v in &path.velocities[..j] {
        x = x.mul(&group_exp(family, v, delta)?)?;
    }
    x.mul(&group_exp(family, &path.velocities[j], s - j as f64 * delta)?)
}

fn require_bi_invariant(algebra: &LieAlgebraSpec) -> Result<()> {
    let r = check_bi_invariance(algebra, 1e-10);
    if r.passed {
        Ok(())
    } else {
        Err(Error::NotBiInvariant(r.max_residual))
    }
}

fn transport_matrix(algebra: &LieAlgebraSpec, v: &DVector<f64>, s: f64) -> RMat {
    (ad_matrix(algebra, v) * (-0.5 * s)).exp()
}

/// `Y(s) = exp(-(s/2) ad v) Y0`, transport along the geodesic with left velocity `v`.
pub fn parallel_transport_along_geodesic(
    algebra: &LieAlgebraSpec,
    v: &DVector<f64>,
    y0: &DVector<f64>,
    s: f64,
) -> Result<DVector<f64>> {
    require_bi_invariant(algebra)?;
    Ok(transport_matrix(algebra, v, s) * y0)
}

/// Developed velocities: `v̂_1 = v_1`, `v̂_j = P_1 ∘ … ∘ P_{j-1} (v_j)`.
pub fn develop(algebra: &LieAlgebraSpec, path: &PathSpec) -> Result<Vec<DVector<f64>>> {
    require_bi_invariant(algebra)?;
    develop_velocities(algebra, &path.velocities, path.step())
}

fn develop_velocities(algebra: &LieAlgebraSpec, vs: &[DVector<f64>], delta: f64) -> Result<Vec<DVector<f64>>> {
    let d = algebra.dim;
    if vs.iter().any(|v| v.len() != d) {
        return Err(Error::Structural("velocity dimension does not match the algebra".into()));
    }
    let mut acc = RMat::identity(d, d);
    let mut out = Vec::with_capacity(vs.len());
    for v in vs {
        out.push(&acc * v);
        acc = acc * transport_matrix(algebra, v, delta);
    }
    Ok(out)
}

/// `|Σ δ‖v̂_j‖² − Σ δ‖v_j‖²|`.
pub fn development_isometry_residual(algebra: &LieAlgebraSpec, path: &PathSpec) -> Result<f64> {
    let hat = develop(algebra, path)?;
    let delta = path.step();
    let energy = |vs: &[DVector<f64>]| vs.iter().map(|v| delta * algebra.inner(v, v)).sum::<f64>();
    Ok((energy(&hat) - energy(&path.velocities)).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianCertificate {
    /// |det(∂v̂/∂v) − 1| at `fd_step`.
    pub det_deviation: f64,
    /// Largest |∂v̂_j/∂v_k| over blocks with k > j.
    pub triangularity_residual: f64,
    /// |det(h) − det(h/2)|, the finite-difference stability check.
    pub stability_gap: f64,
}

fn fd_jacobian(algebra: &LieAlgebraSpec, path: &PathSpec, h: f64) -> Result<RMat> {
    let d = algebra.dim;
    let n = path.segments();
    let delta = path.step();
    let flat = |vs: &[DVector<f64>]| DVector::from_iterator(n * d, vs.iter().flat_map(|v| v.iter().copied()));
    let mut jac = RMat::zeros(n * d, n * d);
    for col in 0..n * d {
        let (seg, comp) = (col / d, col % d);
        let mut plus = path.velocities.clone();
        let mut minus = path.velocities.clone();
        plus[seg][comp] += h;
        minus[seg][comp] -= h;
        let diff = (flat(&develop_velocities(algebra, &plus, delta)?)
            - flat(&develop_velocities(algebra, &minus, delta)?))
            / (2.0 * h);
        jac.set_column(col, &diff);
    }
    Ok(jac)
}

/// Central-difference Jacobian of `v ↦ v̂`, its determinant and block structure.
pub fn development_jacobian_certificate(
    algebra: &LieAlgebraSpec,
    path: &PathSpec,
    fd_step: f64,
) -> Result<JacobianCertificate> {
    require_bi_invariant(algebra)?;
    let d = algebra.dim;
    let jac = fd_jacobian(algebra, path, fd_step)?;
    let det = jac.determinant();
    let det_half = fd_jacobian(algebra, path, fd_step / 2.0)?.determinant();
    let mut tri = 0.0f64;
    for r in 0..jac.nrows() {
        for c in 0..jac.ncols() {
            if c / d > r / d {
                tri = tri.max(jac[(r, c)].abs());
            }
        }
    }
    Ok(JacobianCertificate {
        det_deviation: (det - 1.0).abs(),
        triangularity_residual: tri,
        stability_gap: (det - det_half).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn e3(i: usize) -> DVector<f64> {
        DVector::from_fn(3, |a, _| if a == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn exp_basics() {
        let fam = GroupFamily::Su2;
        assert_eq!(group_exp(fam, &e3(0), 0.0).unwrap(), GroupElement::identity(fam));
        assert_eq!(
            group_exp(GroupFamily::U1, &DVector::from_element(1, 1.0), PI).unwrap(),
            GroupElement::U1(PI)
        );
        let GroupElement::Su2(g) = group_exp(fam, &e3(0), 2.0 * PI).unwrap() else { unreachable!() };
        assert!((g + Matrix2::identity()).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn exp_matches_matrix_series() {
        let v = DVector::from_vec(vec![0.3, -1.2, 0.7]);
        let GroupElement::Su2(g) = group_exp(GroupFamily::Su2, &v, 1.3).unwrap() else { unreachable!() };
        let sig = pauli();
        let a: Matrix2<Complex64> = (0..3).fold(Matrix2::zeros(), |acc, k| {
            acc + sig[k] * Complex64::new(0.0, -0.5 * 1.3 * v[k])
        });
        assert!((a.exp() - g).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn log_inverts_exp() {
        for w in [[0.1, 0.2, -0.3], [2.0, -1.0, 1.5], [0.0, 0.0, 0.0]] {
            let v = DVector::from_row_slice(&w);
            let g = group_exp(GroupFamily::Su2, &v, 1.0).unwrap();
            let back = g.su2_log().unwrap();
            for k in 0..3 {
                assert!((back[k] - w[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn u1_path_returns() {
        let path = PathSpec::new(
            GroupElement::U1(0.0),
            vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
            2.0,
        )
        .unwrap();
        let GroupElement::U1(theta) = piecewise_geodesic(&path, 2.0).unwrap() else { unreachable!() };
        assert!(theta.abs() < 1e-15 || (theta - TAU).abs() < 1e-15);
        assert!(piecewise_geodesic(&path, 2.5).is_err());
    }

    #[test]
    fn transport_rotates_half_angle() {
        let su2 = LieAlgebraSpec::su2();
        for s in [0.0, 0.4, PI, 5.0] {
            let y = parallel_transport_along_geodesic(&su2, &e3(2), &e3(0), s).unwrap();
            let want = e3(0) * (s / 2.0).cos() - e3(1) * (s / 2.0).sin();
            assert!((y - want).amax() < 1e-15);
        }
    }

    #[test]
    fn develop_examples() {
        let su2 = LieAlgebraSpec::su2();
        let path = PathSpec::new(GroupElement::identity(GroupFamily::Su2), vec![e3(2), e3(0)], 2.0 * PI).unwrap();
        let hat = develop(&su2, &path).unwrap();
        assert_eq!(hat[0], e3(2));
        assert!((&hat[1] + e3(1)).amax() < 1e-15);

        let t2 = LieAlgebraSpec::torus(2);
        let vs = vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![-3.0, 0.5])];
        let path = PathSpec::new(GroupElement::identity(GroupFamily::Torus(2)), vs.clone(), 1.0).unwrap();
        assert_eq!(develop(&t2, &path).unwrap(), vs);
        let cert = development_jacobian_certificate(&t2, &path, 1e-5).unwrap();
        assert!(cert.det_deviation < 1e-10, "{cert:?}");
        assert_eq!(cert.triangularity_residual, 0.0);
    }

    #[test]
    fn non_bi_invariant_is_refused() {
        let aff = LieAlgebraSpec::from_entries(2, &[(0, 1, 1, 1.0), (1, 0, 1, -1.0)], RMat::identity(2, 2), "aff")
            .unwrap();
        let v = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            parallel_transport_along_geodesic(&aff, &v, &v, 1.0),
            Err(Error::NotBiInvariant(_))
        ));
    }
}
