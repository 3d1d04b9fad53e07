//! Acceptance suite: one pass/fail line per criterion, each under its runtime budget.

use std::sync::Arc;
use std::time::{Duration, Instant};

use lie_feynman::algebra::{
    check_bi_invariance, check_unimodular, killing_form, ricci, scalar_curvature, validate_algebra, LieAlgebraSpec,
};
use lie_feynman::cartan::{develop, development_jacobian_certificate, GroupElement, PathSpec};
use lie_feynman::chernoff::{
    build_step, compose, curvature_drift, free_propagator, norm_bound_certificate, taylor_remainder_certificate,
    Variant,
};
use lie_feynman::linalg::{fit_slope, max_abs_diff, op_norm, CMat};
use lie_feynman::oscillatory::{
    regularized_oscillatory_oracle, rotated_gaussian_step_adaptive, HermitePolicy, HermiteRule, OracleConfig,
};
use lie_feynman::propagator::{
    direct_solve, dyson_sum, dyson_term, feynman_gn, potential_matrix, s_chain, symmetrized_square_term,
    t_n_operator, u_chain, CylinderSpec, DysonJob, DysonRoute,
};
use lie_feynman::representation::{BasisFunction, FiniteEnergySpace, StateVector};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ch(k: i64) -> BasisFunction {
    BasisFunction::Character(vec![k])
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn algebraic_certificates() -> Outcome {
    let mut worst = 0.0f64;
    for name in ["u1", "torus:2", "su2"] {
        let a = LieAlgebraSpec::builtin(name).ok_or(format!("missing built-in {name}"))?;
        for report in [validate_algebra(&a, 0.0), check_bi_invariance(&a, 0.0), check_unimodular(&a, 0.0)] {
            if !report.passed || report.max_residual != 0.0 {
                return Err(format!("{name}: {:?} residual {}", report.failing_identity, report.max_residual));
            }
            worst = worst.max(report.max_residual);
        }
    }
    // Killing form of su(2) straight from ε_ijk: K_ab = Σ ε_aic ε_bci = −2 δ_ab
    let eps = |i: usize, j: usize, k: usize| -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    };
    let su2 = LieAlgebraSpec::su2();
    let killing = killing_form(&su2);
    let mut killing_gap = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            let oracle: f64 = (0..3).flat_map(|i| (0..3).map(move |c| (i, c))).map(|(i, c)| eps(a, i, c) * eps(b, c, i)).sum();
            killing_gap = killing_gap.max((killing[(a, b)] - oracle).abs());
            killing_gap = killing_gap.max((killing[(a, b)] + if a == b { 2.0 } else { 0.0 }).abs());
        }
    }
    let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let ric = ricci(&su2, &e1, &e1).map_err(|e| e.to_string())?;
    let r = scalar_curvature(&su2).map_err(|e| e.to_string())?;
    check(
        killing_gap < 1e-14 && (ric - 0.5).abs() < 1e-14 && (r - 1.5).abs() < 1e-14,
        format!("residuals {worst}, Killing gap {killing_gap:.1e}, Ric(e1,e1) = {ric}, R = {r}"),
    )
}

fn u1_exactness() -> Outcome {
    let space = Arc::new(FiniteEnergySpace::u1_band(8));
    let policy = HermitePolicy { start: 40, ..HermitePolicy::default() };
    let mut worst = 0.0f64;
    for t in [0.1, 0.5, 1.0] {
        let step = build_step(&space, Variant::Lebesgue, t, 1.0, &policy).map_err(|e| e.to_string())?;
        for k in -8i64..=8 {
            let i = space.index_of(&ch(k)).ok_or("missing character")?;
            let want = Complex64::from_polar(1.0, -t * (k * k) as f64 / 2.0);
            worst = worst.max((step.matrix[(i, i)] - want).norm());
        }
    }
    let mut n_gap = 0.0f64;
    let base = compose(&space, Variant::Lebesgue, 1.0, 1, 1.0, &policy).map_err(|e| e.to_string())?;
    for n in [2, 4, 8, 16, 32] {
        let c = compose(&space, Variant::Lebesgue, 1.0, n, 1.0, &policy).map_err(|e| e.to_string())?;
        n_gap = n_gap.max(max_abs_diff(&c, &base));
    }
    check(worst <= 1e-10 && n_gap <= 1e-10, format!("max |S_k − e^(−itk²/2)| = {worst:.2e}, n-dependence {n_gap:.2e}"))
}

fn oracle_equivalence() -> Outcome {
    let policy = HermitePolicy::default();
    let mut worst_gap = 0.0f64;
    let mut notes = Vec::new();
    let spaces = [
        ("u1", Arc::new(FiniteEnergySpace::u1_band(4))),
        ("su2_spin(1)", Arc::new(FiniteEnergySpace::su2_spins(&[1]).map_err(|e| e.to_string())?)),
    ];
    for (label, space) in &spaces {
        let cfg = OracleConfig::for_dim(space.algebra().dim);
        for tau in [0.1, 0.25] {
            let est = regularized_oscillatory_oracle(space, tau, &cfg).map_err(|e| format!("{label} τ={tau}: {e}"))?;
            let (step, _) = rotated_gaussian_step_adaptive(space, tau, &policy).map_err(|e| e.to_string())?;
            let gap = max_abs_diff(&est.matrix, &step);
            worst_gap = worst_gap.max(gap);
            if gap > 1e-4 {
                return Err(format!("{label} τ={tau}: gap {gap:.2e}"));
            }
            notes.push(format!("{label} τ={tau} {gap:.1e}"));
        }
        // a different test function must give the same limit
        let wide = OracleConfig { width: 0.8, ..cfg.clone() };
        let a = regularized_oscillatory_oracle(space, 0.25, &cfg).map_err(|e| e.to_string())?;
        let b = regularized_oscillatory_oracle(space, 0.25, &wide).map_err(|e| format!("{label} width 0.8: {e}"))?;
        let spread = max_abs_diff(&a.matrix, &b.matrix);
        let allowed = 2.0 * (a.residual + b.residual);
        if spread > allowed {
            return Err(format!("{label}: test-function spread {spread:.2e} > {allowed:.2e}"));
        }
        notes.push(format!("{label} φ-spread {spread:.1e} (allowed {allowed:.1e})"));
    }
    check(worst_gap <= 1e-4, notes.join(", "))
}

fn chernoff_hypotheses() -> Outcome {
    let policy = HermitePolicy::default();
    let spin2 = Arc::new(FiniteEnergySpace::su2_spins(&[2]).map_err(|e| e.to_string())?);
    let mixed = Arc::new(FiniteEnergySpace::su2_spins(&[1, 2, 4]).map_err(|e| e.to_string())?);
    let mut id_gap = 0.0f64;
    for space in [&spin2, &mixed] {
        for v in [Variant::Lebesgue, Variant::Haar, Variant::HaarCorrected] {
            let s = build_step(space, v, 0.0, 1.0, &policy).map_err(|e| e.to_string())?;
            id_gap = id_gap.max(max_abs_diff(&s.matrix, &CMat::identity(space.total_dim, space.total_dim)));
        }
    }
    for t in [0.1, 0.5, 1.0] {
        let nb = norm_bound_certificate(&mixed, t, 1.0, &policy).map_err(|e| e.to_string())?;
        if !nb.ok {
            return Err(format!("norm bound fails at t={t}: {} > {}", nb.measured, nb.bound));
        }
    }
    let ladder: Vec<f64> = (0..=8).map(|i| 10f64.powf(-1.0 - i as f64 / 4.0)).collect();
    let fit = taylor_remainder_certificate(&spin2, &ladder, 1.0, &policy).map_err(|e| e.to_string())?;
    let slope = fit.slope.ok_or("Taylor residuals vanished")?;
    check(id_gap <= 1e-11 && slope >= 1.9, format!("S(0) gap {id_gap:.1e}, norm bound ok, Taylor slope {slope:.3}"))
}

fn chernoff_convergence() -> Outcome {
    let policy = HermitePolicy::default();
    let space = Arc::new(FiniteEnergySpace::su2_spins(&[1, 2, 4]).map_err(|e| e.to_string())?);
    let u = free_propagator(&space, 1.0, 1.0);
    let ns = [8usize, 16, 32, 64, 128, 256];
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &n in &ns {
        let c = compose(&space, Variant::Lebesgue, 1.0, n, 1.0, &policy).map_err(|e| e.to_string())?;
        lx.push((n as f64).ln());
        ly.push(op_norm(&(c - &u)).ln());
    }
    let slope = fit_slope(&lx, &ly);
    check((-1.2..=-0.8).contains(&slope), format!("slope {slope:.4}, error at n=256 {:.2e}", ly[5].exp()))
}

fn curvature_drift_check() -> Outcome {
    let policy = HermitePolicy::default();
    let space = Arc::new(FiniteEnergySpace::su2_spins(&[1, 2, 4]).map_err(|e| e.to_string())?);
    let ns = [16usize, 64, 256];
    let report = curvature_drift(&space, 1.0, &ns, 1.0, &policy).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for row in report.rows.iter().filter(|r| r.n == 256) {
        worst = worst.max((row.phase_drift - report.expected).abs() / report.expected.abs());
    }
    let mut slopes = Vec::new();
    for lambda in space.lambdas() {
        let (lx, ly): (Vec<f64>, Vec<f64>) = report
            .rows
            .iter()
            .filter(|r| r.block_lambda == lambda)
            .map(|r| ((r.n as f64).ln(), r.corrected_error.ln()))
            .unzip();
        slopes.push(fit_slope(&lx, &ly));
    }
    let slopes_ok = slopes.iter().all(|s| (-1.25..=-0.75).contains(s));
    check(
        (report.expected + 0.25).abs() < 1e-14 && worst <= 0.02 && slopes_ok,
        format!("expected {:.4}, worst relative drift gap {worst:.1e} at n=256, corrected-error slopes {slopes:.3?}", report.expected),
    )
}

fn cartan_development() -> Outcome {
    let su2 = LieAlgebraSpec::su2();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut iso, mut det, mut tri) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let start = GroupElement::su2_from_euler(rng.random_range(0.0..6.0), rng.random_range(0.0..3.0), rng.random_range(0.0..6.0));
        let vs: Vec<DVector<f64>> =
            (0..n).map(|_| DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5))).collect();
        let t = rng.random_range(0.2..2.0);
        let path = PathSpec::new(start, vs, t).map_err(|e| e.to_string())?;
        let hat = develop(&su2, &path).map_err(|e| e.to_string())?;
        for (v, h) in path.velocities.iter().zip(&hat) {
            iso = iso.max((su2.norm(v) - su2.norm(h)).abs());
        }
        let cert = development_jacobian_certificate(&su2, &path, 1e-5).map_err(|e| e.to_string())?;
        det = det.max(cert.det_deviation);
        tri = tri.max(cert.triangularity_residual);
    }
    check(
        iso <= 1e-12 && det <= 1e-6 && tri <= 1e-7,
        format!("norm gap {iso:.1e}, |det − 1| {det:.1e}, triangularity {tri:.1e} over 100 paths"),
    )
}

fn cylinder_chains() -> Outcome {
    let w = Arc::new(FiniteEnergySpace::u1_band(4));
    let phi1 = StateVector::from_entries(w.clone(), &[(ch(1), one())]).map_err(|e| e.to_string())?;
    let phi2 = StateVector::from_entries(w.clone(), &[(ch(-1), one())]).map_err(|e| e.to_string())?;
    let cyl = CylinderSpec::new(vec![1.0 / 3.0, 2.0 / 3.0], vec![phi1.clone(), phi2], GroupElement::U1(0.0), 1.0, w.clone())
        .map_err(|e| e.to_string())?;
    let policy = HermitePolicy::default();
    let exact = u_chain(&cyl, 1.0).map_err(|e| e.to_string())?;
    let mut errs = Vec::new();
    for n in [128usize, 256, 512, 1024] {
        errs.push((s_chain(&cyl, n, 1.0, &policy).map_err(|e| e.to_string())? - exact).norm());
    }
    let ratios: Vec<f64> = errs.windows(2).map(|p| p[0] / p[1]).collect();
    let m_phi = potential_matrix(&w, &phi1).map_err(|e| e.to_string())?;
    let rule = HermiteRule::new(40);
    let mut tn_gaps = Vec::new();
    for n in [16usize, 64, 256, 1024] {
        let tn = t_n_operator(&w, &w, &m_phi, 0.3, n, 1.0, 1.0, &rule).map_err(|e| e.to_string())?;
        tn_gaps.push(max_abs_diff(&tn, &m_phi));
    }
    let tn_ok = tn_gaps.windows(2).all(|p| p[1] < p[0]) && tn_gaps[3] < 1e-2;
    check(
        errs[2] <= 1e-3 && ratios.iter().all(|r| *r >= 1.3) && tn_ok,
        format!("error at n=512 {:.2e}, ratios {ratios:.3?}, |T_n − M_φ| {}", errs[2], tn_gaps.iter().map(|g| format!("{g:.1e}")).collect::<Vec<_>>().join(" ")),
    )
}

fn dyson_fixture(m_max: usize) -> Result<(DysonJob, StateVector, StateVector), String> {
    let half = Complex64::new(0.5, 0.0);
    let v = StateVector::from_entries(Arc::new(FiniteEnergySpace::u1_band(1)), &[(ch(1), half), (ch(-1), half)])
        .map_err(|e| e.to_string())?;
    let psi0 = StateVector::one(Arc::new(FiniteEnergySpace::u1_band(0))).map_err(|e| e.to_string())?;
    let job = DysonJob::nested(v.clone(), psi0.clone(), 1.0, m_max, 1.0).map_err(|e| e.to_string())?;
    Ok((job, v, psi0))
}

fn dyson_expansion() -> Outcome {
    let (job, v, psi0) = dyson_fixture(6)?;
    let mut route_gap = 0.0f64;
    for m in 0..=3 {
        let a = dyson_term(&job, m, DysonRoute::Simplex { order: 24 }).map_err(|e| e.to_string())?;
        let b = dyson_term(&job, m, DysonRoute::Duhamel { panels: 64, nodes: 12 }).map_err(|e| e.to_string())?;
        route_gap = route_gap.max((a.coeffs - b.coeffs).norm());
    }
    let square = symmetrized_square_term(&job, 24).map_err(|e| e.to_string())?;
    let simplex = dyson_term(&job, 2, DysonRoute::Simplex { order: 24 }).map_err(|e| e.to_string())?;
    let sym_gap = (square.coeffs - simplex.coeffs).norm();
    let points: [&[f64]; 5] = [&[0.5], &[0.83], &[0.2, 0.7], &[0.41, 0.95], &[0.1, 0.45, 0.8]];
    let policy = HermitePolicy::default();
    let mut gn_gap = 0.0f64;
    for s in points {
        let g = feynman_gn(&job, s, 512, &policy).map_err(|e| e.to_string())?;
        gn_gap = gn_gap.max((g.coeffs - job.integrand(s).map_err(|e| e.to_string())?.coeffs).norm());
    }
    let (sum, tail) = dyson_sum(&job, DysonRoute::default()).map_err(|e| e.to_string())?;
    let big = Arc::new(FiniteEnergySpace::u1_band(job.m_max + 2));
    let mv = potential_matrix(&big, &v).map_err(|e| e.to_string())?;
    let direct = direct_solve(&big, &mv, &psi0, job.t, job.hbar).map_err(|e| e.to_string())?;
    let series_gap = (sum.embed_into(&big).map_err(|e| e.to_string())?.coeffs - direct.coeffs).norm();
    check(
        route_gap <= 1e-8 && sym_gap <= 1e-8 && gn_gap <= 1e-3 && series_gap <= tail + 1e-6,
        format!(
            "route gap {route_gap:.1e}, symmetrization {sym_gap:.1e}, g_n gap {gn_gap:.1e}, series vs direct {series_gap:.2e} (tail {tail:.2e})"
        ),
    )
}

fn normalization_anchor() -> Outcome {
    let mut worst = 0.0f64;
    let spaces = [FiniteEnergySpace::u1_band(0), FiniteEnergySpace::torus_band(2, 0)];
    for space in &spaces {
        let cfg = OracleConfig::for_dim(space.algebra().dim);
        let est = regularized_oscillatory_oracle(space, 0.5, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max((est.matrix[(0, 0)] - 1.0).norm());
    }
    check(worst <= 1e-6, format!("|I(1) − 1| = {worst:.1e} for d = 1, 2"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome, u64); 10] = [
        ("algebraic certificates", algebraic_certificates, 1),
        ("U(1) exactness", u1_exactness, 1),
        ("oracle equivalence", oracle_equivalence, 300),
        ("Chernoff hypotheses", chernoff_hypotheses, 30),
        ("Chernoff convergence", chernoff_convergence, 120),
        ("scalar-curvature drift", curvature_drift_check, 180),
        ("Cartan development", cartan_development, 30),
        ("cylinder functions", cylinder_chains, 120),
        ("Dyson expansion", dyson_expansion, 300),
        ("normalization anchor", normalization_anchor, 60),
    ];
    let mut failures = Vec::new();
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        println!("criterion {:>2} {status} {name}: {detail} [{:.2} s]", i + 1, elapsed.as_secs_f64());
        if status == "FAIL" {
            failures.push(i + 1);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
