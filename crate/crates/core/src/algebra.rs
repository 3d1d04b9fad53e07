//! Lie algebra data: structure constants, the metric at the identity, and the
//! quantities derived from them (ad maps, Killing form, curvature, exp Jacobian).

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::RMat;

pub const DEFAULT_TOL: f64 = 1e-12;

/// Structure constants `c[i][j][k]` with `[X_i, X_j] = c_ij^k X_k` (0-based here)
/// plus the metric `g_ab = g(X_a, X_b)` at the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebraSpec {
    pub dim: usize,
    structure: Vec<f64>,
    pub metric: RMat,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub passed: bool,
    pub max_residual: f64,
    pub failing_identity: Option<String>,
}

impl ValidationReport {
    fn from_checks(checks: &[(&str, f64)], tol: f64) -> Self {
        let max_residual = checks.iter().fold(0.0f64, |m, (_, r)| m.max(*r));
        let failing_identity = checks
            .iter()
            .find(|(_, r)| *r > tol || r.is_nan())
            .map(|(name, _)| name.to_string());
        ValidationReport {
            passed: failing_identity.is_none(),
            max_residual,
            failing_identity,
        }
    }
}

impl LieAlgebraSpec {
    /// Builds a spec from a dense tensor flattened as `c[(i*d + j)*d + k]`.
    pub fn from_dense(dim: usize, structure: Vec<f64>, metric: RMat, name: &str) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Structural("dimension must be at least 1".into()));
        }
        if structure.len() != dim * dim * dim {
            return Err(Error::Structural(format!(
                "structure tensor has {} entries, expected {}",
                structure.len(),
                dim * dim * dim
            )));
        }
        if metric.shape() != (dim, dim) {
            return Err(Error::Structural(format!(
                "metric is {}x{}, expected {dim}x{dim}",
                metric.nrows(),
                metric.ncols()
            )));
        }
        if structure.iter().chain(metric.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Structural("non-finite entry".into()));
        }
        let asym = (0..dim)
            .flat_map(|a| (0..dim).map(move |b| (a, b)))
            .fold(0.0f64, |m, (a, b)| m.max((metric[(a, b)] - metric[(b, a)]).abs()));
        if asym > DEFAULT_TOL {
            return Err(Error::Structural(format!("metric not symmetric ({asym:.3e})")));
        }
        if metric.clone().cholesky().is_none() {
            return Err(Error::Structural("metric not positive definite".into()));
        }
        Ok(LieAlgebraSpec {
            dim,
            structure,
            metric,
            name: name.to_string(),
        })
    }

    /// Builds a spec from 0-based `(i, j, k, value)` entries; unspecified entries are zero.
    pub fn from_entries(
        dim: usize,
        entries: &[(usize, usize, usize, f64)],
        metric: RMat,
        name: &str,
    ) -> Result<Self> {
        let mut structure = vec![0.0; dim * dim * dim];
        for &(i, j, k, v) in entries {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::Structural(format!(
                    "index ({i}, {j}, {k}) out of range for dim {dim}"
                )));
            }
            structure[(i * dim + j) * dim + k] = v;
        }
        Self::from_dense(dim, structure, metric, name)
    }

    pub fn u1() -> Self {
        Self::torus(1).with_name("u1")
    }

    pub fn torus(d: usize) -> Self {
        Self::from_dense(d.max(1), vec![0.0; d.max(1).pow(3)], RMat::identity(d.max(1), d.max(1)), &format!("torus:{d}"))
            .expect("torus spec is well formed")
    }

    /// su(2) in the basis `e_a = -iσ_a/2`: `[e_i, e_j] = ε_ijk e_k`, identity metric.
    pub fn su2() -> Self {
        let mut entries = Vec::new();
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            entries.push((i, j, k, 1.0));
            entries.push((j, i, k, -1.0));
        }
        Self::from_entries(3, &entries, RMat::identity(3, 3), "su2").expect("su2 spec is well formed")
    }

    /// Looks up `u1`, `su2` or `torus:<d>`.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "u1" => Some(Self::u1()),
            "su2" => Some(Self::su2()),
            _ => {
                let d: usize = name.strip_prefix("torus:")?.parse().ok()?;
                (d >= 1).then(|| Self::torus(d))
            }
        }
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Same structure constants with the metric multiplied by `s`.
    pub fn with_metric_scale(&self, s: f64) -> Result<Self> {
        Self::from_dense(self.dim, self.structure.clone(), &self.metric * s, &self.name)
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn is_abelian(&self) -> bool {
        self.structure.iter().all(|&x| x == 0.0)
    }

    pub fn inverse_metric(&self) -> RMat {
        self.metric.clone().try_inverse().expect("metric is positive definite")
    }

    /// Columns are the coordinates of a g-orthonormal basis: `M = L^{-T}` with `g = L Lᵀ`.
    pub fn orthonormal_frame(&self) -> RMat {
        let l = self.metric.clone().cholesky().expect("metric is positive definite").l();
        l.transpose().try_inverse().expect("Cholesky factor is invertible")
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.metric * v)[(0, 0)]
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    pub fn bracket(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        ad_matrix(self, u) * v
    }

    /// Builds a spec from TOML text with keys `dim`, `structure`, `metric`, `name`.
    ///
    /// `structure` holds 1-based `[i, j, k, value]` quadruples; `metric` is row-major.
    /// Errors carry the line and column of the offending item.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            dim: usize,
            #[serde(default)]
            structure: Vec<toml::Spanned<Vec<f64>>>,
            metric: Option<toml::Spanned<Vec<f64>>>,
            name: Option<String>,
        }
        let locate = |offset: usize| {
            let before = &text[..offset.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
            (line, column)
        };
        let config_err = |offset: usize, message: String| {
            let (line, column) = locate(offset);
            Error::Config { line, column, message }
        };
        let raw: Raw = toml::from_str(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            config_err(offset, e.message().to_string())
        })?;
        let d = raw.dim;
        if d == 0 {
            return Err(config_err(0, "dim must be at least 1".into()));
        }
        let mut entries = Vec::with_capacity(raw.structure.len());
        for item in &raw.structure {
            let q = item.get_ref();
            let at = item.span().start;
            if q.len() != 4 {
                return Err(config_err(at, format!("structure entry needs 4 numbers (i, j, k, value), got {}", q.len())));
            }
            let mut idx = [0usize; 3];
            for (slot, &x) in idx.iter_mut().zip(&q[..3]) {
                if x.fract() != 0.0 || x < 1.0 || x > d as f64 {
                    return Err(config_err(at, format!("index {x} is not an integer in 1..={d}")));
                }
                *slot = x as usize - 1;
            }
            entries.push((idx[0], idx[1], idx[2], q[3]));
        }
        let metric = match &raw.metric {
            None => RMat::identity(d, d),
            Some(m) => {
                if m.get_ref().len() != d * d {
                    return Err(config_err(m.span().start, format!("metric needs {} entries", d * d)));
                }
                RMat::from_row_slice(d, d, m.get_ref())
            }
        };
        Self::from_entries(d, &entries, metric, raw.name.as_deref().unwrap_or("custom")).map_err(|e| {
            let at = raw.metric.as_ref().map_or(0, |m| m.span().start);
            config_err(at, e.to_string())
        })
    }
}

/// Antisymmetry and Jacobi residuals of the structure constants.
pub fn validate_algebra(spec: &LieAlgebraSpec, tol: f64) -> ValidationReport {
    let d = spec.dim;
    let mut antisym = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                antisym = antisym.max((spec.c(i, j, k) + spec.c(j, i, k)).abs());
            }
        }
    }
    let mut jacobi = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let s: f64 = (0..d)
                        .map(|m| {
                            spec.c(i, j, m) * spec.c(m, k, l)
                                + spec.c(j, k, m) * spec.c(m, i, l)
                                + spec.c(k, i, m) * spec.c(m, j, l)
                        })
                        .sum();
                    jacobi = jacobi.max(s.abs());
                }
            }
        }
    }
    ValidationReport::from_checks(&[("antisymmetry", antisym), ("jacobi", jacobi)], tol)
}

/// Ad-invariance of the metric: `c_sjk + c_skj = 0` with the last index lowered by g.
pub fn check_bi_invariance(spec: &LieAlgebraSpec, tol: f64) -> ValidationReport {
    let d = spec.dim;
    let lowered = |s: usize, j: usize, k: usize| -> f64 {
        (0..d).map(|m| spec.c(s, j, m) * spec.metric[(m, k)]).sum()
    };
    let mut r = 0.0f64;
    for s in 0..d {
        for j in 0..d {
            for k in 0..d {
                r = r.max((lowered(s, j, k) + lowered(s, k, j)).abs());
            }
        }
    }
    ValidationReport::from_checks(&[("bi-invariance", r)], tol)
}

pub fn check_unimodular(spec: &LieAlgebraSpec, tol: f64) -> ValidationReport {
    let d = spec.dim;
    let r = (0..d)
        .map(|i| (0..d).map(|k| spec.c(i, k, k)).sum::<f64>().abs())
        .fold(0.0f64, f64::max);
    ValidationReport::from_checks(&[("unimodularity", r)], tol)
}

/// `(ad v)[k][j] = Σ_i v_i c[i][j][k]`.
pub fn ad_matrix(spec: &LieAlgebraSpec, v: &DVector<f64>) -> RMat {
    let d = spec.dim;
    assert_eq!(v.len(), d, "vector length must equal the algebra dimension");
    RMat::from_fn(d, d, |k, j| (0..d).map(|i| v[i] * spec.c(i, j, k)).sum())
}

pub fn killing_form(spec: &LieAlgebraSpec) -> RMat {
    let d = spec.dim;
    let ads: Vec<RMat> = (0..d)
        .map(|i| ad_matrix(spec, &DVector::from_fn(d, |a, _| if a == i { 1.0 } else { 0.0 })))
        .collect();
    RMat::from_fn(d, d, |i, j| (&ads[i] * &ads[j]).trace())
}

fn require_bi_invariant(spec: &LieAlgebraSpec) -> Result<()> {
    let scale = 1.0 + spec.metric.amax() * spec.structure.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rep = check_bi_invariance(spec, 1e-10 * scale);
    if rep.passed {
        Ok(())
    } else {
        Err(Error::NotBiInvariant(rep.max_residual))
    }
}

/// `Ric(u, v) = ¼ Σ_i g([u, f_i], [v, f_i])` over a g-orthonormal basis `f_i`.
pub fn ricci(spec: &LieAlgebraSpec, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    require_bi_invariant(spec)?;
    Ok(ricci_unchecked(spec, u, v))
}

fn ricci_unchecked(spec: &LieAlgebraSpec, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let frame = spec.orthonormal_frame();
    let (adu, adv) = (ad_matrix(spec, u), ad_matrix(spec, v));
    0.25 * frame
        .column_iter()
        .map(|f| {
            let f = f.into_owned();
            spec.inner(&(&adu * &f), &(&adv * &f))
        })
        .sum::<f64>()
}

pub fn scalar_curvature(spec: &LieAlgebraSpec) -> Result<f64> {
    require_bi_invariant(spec)?;
    let frame = spec.orthonormal_frame();
    Ok(frame
        .column_iter()
        .map(|f| {
            let f = f.into_owned();
            ricci_unchecked(spec, &f, &f)
        })
        .sum())
}

/// `Σ_{m≥0} (-a)^m / (m+1)!`, summed until the next term is negligible.
fn phi_series<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let minus_a = -a.clone();
    let mut term = DMatrix::<T>::identity(n, n);
    let mut sum = term.clone();
    for m in 1..400 {
        term = (&term * &minus_a).unscale((m + 1) as f64);
        sum += &term;
        let tn = term.norm();
        if tn <= 1e-17 * sum.norm().max(1.0) && m > 2 {
            break;
        }
    }
    sum
}

/// `det((1 - e^{-ad x}) / ad x)`, the density of exp-pushed Lebesgue measure against Haar.
pub fn exp_jacobian(spec: &LieAlgebraSpec, x: &DVector<f64>) -> f64 {
    if spec.is_abelian() {
        return 1.0;
    }
    phi_series(&ad_matrix(spec, x)).determinant()
}

/// The same determinant at a complex algebra vector (entire in `x`).
pub fn exp_jacobian_complex(spec: &LieAlgebraSpec, x: &DVector<Complex64>) -> Complex64 {
    if spec.is_abelian() {
        return Complex64::new(1.0, 0.0);
    }
    let d = spec.dim;
    let ad = DMatrix::from_fn(d, d, |k, j| {
        (0..d).map(|i| x[i] * spec.c(i, j, k)).sum::<Complex64>()
    });
    phi_series(&ad).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(d, |a, _| if a == i { 1.0 } else { 0.0 })
    }

    fn affine2() -> LieAlgebraSpec {
        // [e1, e2] = e2
        LieAlgebraSpec::from_entries(2, &[(0, 1, 1, 1.0), (1, 0, 1, -1.0)], RMat::identity(2, 2), "aff").unwrap()
    }

    #[test]
    fn builtins_validate_exactly() {
        for spec in [LieAlgebraSpec::u1(), LieAlgebraSpec::torus(3), LieAlgebraSpec::su2()] {
            let r = validate_algebra(&spec, 0.0);
            assert!(r.passed && r.max_residual == 0.0, "{}", spec.name);
            assert_eq!(check_bi_invariance(&spec, 0.0).max_residual, 0.0);
            assert_eq!(check_unimodular(&spec, 0.0).max_residual, 0.0);
        }
    }

    #[test]
    fn symmetric_entry_fails_antisymmetry() {
        let spec =
            LieAlgebraSpec::from_entries(2, &[(0, 1, 0, 1.0), (1, 0, 0, 1.0)], RMat::identity(2, 2), "bad").unwrap();
        let r = validate_algebra(&spec, DEFAULT_TOL);
        assert!(!r.passed);
        assert_eq!(r.failing_identity.as_deref(), Some("antisymmetry"));
    }

    #[test]
    fn affine_algebra_is_neither_bi_invariant_nor_unimodular() {
        let spec = affine2();
        assert!(validate_algebra(&spec, DEFAULT_TOL).passed);
        assert!(!check_bi_invariance(&spec, DEFAULT_TOL).passed);
        let u = check_unimodular(&spec, DEFAULT_TOL);
        assert!(!u.passed);
        assert_eq!(u.max_residual, 1.0);
        assert!(matches!(scalar_curvature(&spec), Err(Error::NotBiInvariant(_))));
    }

    #[test]
    fn su2_ad_e1() {
        let ad = ad_matrix(&LieAlgebraSpec::su2(), &e(3, 0));
        let mut want = RMat::zeros(3, 3);
        want[(2, 1)] = 1.0;
        want[(1, 2)] = -1.0;
        assert_eq!(ad, want);
    }

    #[test]
    fn killing_forms() {
        assert_eq!(killing_form(&LieAlgebraSpec::su2()), RMat::identity(3, 3) * -2.0);
        assert_eq!(killing_form(&LieAlgebraSpec::torus(2)), RMat::zeros(2, 2));
        // rescaling the basis by s scales the structure constants by s and B by s²
        let s = 1.7;
        let su2 = LieAlgebraSpec::su2();
        let scaled = LieAlgebraSpec::from_dense(
            3,
            (0..27).map(|n| su2.structure[n] * s).collect(),
            RMat::identity(3, 3),
            "scaled",
        )
        .unwrap();
        let diff = killing_form(&scaled) - killing_form(&su2) * (s * s);
        assert!(diff.amax() < 1e-14);
    }

    #[test]
    fn su2_curvature() {
        let su2 = LieAlgebraSpec::su2();
        assert_eq!(ricci(&su2, &e(3, 0), &e(3, 0)).unwrap(), 0.5);
        assert_eq!(scalar_curvature(&su2).unwrap(), 1.5);
        // double-sum form: R = ¼ Σ_ij ‖[e_j, e_i]‖²
        let double: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| su2.bracket(&e(3, j), &e(3, i)).norm_squared())
            .sum::<f64>()
            / 4.0;
        assert_eq!(double, 1.5);
        let t2 = LieAlgebraSpec::torus(2);
        assert_eq!(scalar_curvature(&t2).unwrap(), 0.0);
    }

    #[test]
    fn curvature_follows_metric_scale() {
        // g -> s g leaves Ric unchanged and divides R by s
        let s = 4.0;
        let su2 = LieAlgebraSpec::su2().with_metric_scale(s).unwrap();
        assert!((ricci(&su2, &e(3, 0), &e(3, 0)).unwrap() - 0.5).abs() < 1e-14);
        assert!((scalar_curvature(&su2).unwrap() - 1.5 / s).abs() < 1e-14);
    }

    #[test]
    fn su2_jacobian_closed_form() {
        // ad x has eigenvalues 0, ±iθ, so J = (sin(θ/2)/(θ/2))²
        let su2 = LieAlgebraSpec::su2();
        for theta in [0.0, 0.3, 1.0, 2.5, 5.0] {
            let x = DVector::from_vec(vec![0.6, 0.0, 0.8]) * theta;
            let want = if theta == 0.0 {
                1.0
            } else {
                ((theta / 2.0).sin() / (theta / 2.0)).powi(2)
            };
            assert!((exp_jacobian(&su2, &x) - want).abs() < 1e-13, "θ = {theta}");
        }
    }

    #[test]
    fn complex_jacobian_extends_real() {
        let su2 = LieAlgebraSpec::su2();
        let x = DVector::from_vec(vec![0.3, -0.4, 0.2]);
        let xc = x.map(|v| Complex64::new(v, 0.0));
        let jc = exp_jacobian_complex(&su2, &xc);
        assert!((jc.re - exp_jacobian(&su2, &x)).abs() < 1e-14 && jc.im.abs() < 1e-15);
        // along a rotated ray the su(2) closed form continues analytically
        let z = Complex64::from_polar(0.9, 0.7);
        let xz = DVector::from_vec(vec![z, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]);
        let h = z / 2.0;
        let want = (h.sin() / h).powi(2);
        assert!((exp_jacobian_complex(&su2, &xz) - want).norm() < 1e-13);
    }

    #[test]
    fn toml_round_trip_and_errors() {
        let text = "name = \"su2\"\ndim = 3\nstructure = [\n  [1, 2, 3, 1.0],\n  [2, 1, 3, -1.0],\n  [2, 3, 1, 1.0],\n  [3, 2, 1, -1.0],\n  [3, 1, 2, 1.0],\n  [1, 3, 2, -1.0],\n]\nmetric = [1,0,0, 0,1,0, 0,0,1]\n";
        let spec = LieAlgebraSpec::from_toml_str(text).unwrap();
        assert_eq!(spec, LieAlgebraSpec::su2());

        let bad = "dim = 3\nstructure = [\n  [1, 2, 3, 1.0],\n  [2, 1, 3],\n]\n";
        match LieAlgebraSpec::from_toml_str(bad) {
            Err(Error::Config { line, column, .. }) => assert_eq!((line, column), (4, 3)),
            other => panic!("expected config error, got {other:?}"),
        }
        let out_of_range = "dim = 2\nstructure = [[1, 2, 3, 1.0]]\n";
        assert!(matches!(
            LieAlgebraSpec::from_toml_str(out_of_range),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(matches!(LieAlgebraSpec::from_toml_str("dim = \n"), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn builtin_lookup() {
        assert_eq!(LieAlgebraSpec::builtin("torus:4").unwrap().dim, 4);
        assert!(LieAlgebraSpec::builtin("torus:0").is_none());
        assert!(LieAlgebraSpec::builtin("so3").is_none());
    }
}
