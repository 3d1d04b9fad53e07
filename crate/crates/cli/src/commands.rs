use std::time::Instant;

use lie_feynman::algebra::{check_bi_invariance, check_unimodular, scalar_curvature, validate_algebra};
use lie_feynman::cartan::{develop, development_jacobian_certificate, GroupElement, GroupFamily, PathSpec};
use lie_feynman::chernoff::{compose, curvature_drift, free_propagator, Variant};
use lie_feynman::linalg::{fit_slope, op_norm, CMat};
use lie_feynman::oscillatory::{regularized_oscillatory_oracle, rotated_gaussian_step_adaptive, HermitePolicy, OracleConfig};
use lie_feynman::propagator::{
    direct_solve, dyson_sum, dyson_term, potential_matrix, s_chain, u_chain, CylinderSpec, DysonJob, DysonRoute,
};
use lie_feynman::representation::{BasisFunction, FiniteEnergySpace};
use lie_feynman::Error;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::input::{band_space, build_space, load_algebra, load_state, parse_list, parse_point};
use crate::output::{summary, Row, Sink};
use crate::{Failure, RouteChoice};

fn lib<T>(r: lie_feynman::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::from_lib)
}

fn family(space: &FiniteEnergySpace) -> Result<GroupFamily, Failure> {
    space.family().ok_or_else(|| Failure::Usage("space mixes basis families".into()))
}

fn policy(quad_order: Option<usize>) -> HermitePolicy {
    quad_order.map(HermitePolicy::fixed).unwrap_or_default()
}

fn block(m: &CMat, r: std::ops::Range<usize>) -> CMat {
    m.view((r.start, r.start), (r.len(), r.len())).into_owned()
}

#[derive(Serialize)]
pub struct ValidateRow {
    check: String,
    residual: f64,
    passed: bool,
}

impl Row for ValidateRow {
    const HEADER: &'static [&'static str] = &["check", "residual", "passed"];
}

pub fn validate(group: &str, tol: f64, sink: &Sink) -> Result<bool, Failure> {
    let spec = load_algebra(group)?;
    let structure = validate_algebra(&spec, tol);
    let bi = check_bi_invariance(&spec, tol);
    let uni = check_unimodular(&spec, tol);
    let rows = vec![
        ValidateRow { check: "structure".into(), residual: structure.max_residual, passed: structure.passed },
        ValidateRow { check: "bi_invariance".into(), residual: bi.max_residual, passed: bi.passed },
        ValidateRow { check: "unimodularity".into(), residual: uni.max_residual, passed: uni.passed },
    ];
    sink.emit(&rows)?;
    let mut detail = match &structure.failing_identity {
        Some(name) => format!("{} fails {name}", spec.name),
        None => format!("{} is a Lie algebra (residual {:.1e})", spec.name, structure.max_residual),
    };
    if bi.passed {
        if let Ok(r) = scalar_curvature(&spec) {
            detail.push_str(&format!(", scalar curvature {r}"));
        }
    } else {
        detail.push_str(&format!(", metric not bi-invariant (residual {:.1e})", bi.max_residual));
    }
    if !uni.passed {
        detail.push_str(&format!(", not unimodular (residual {:.1e})", uni.max_residual));
    }
    Ok(summary("validate", structure.passed && bi.passed && uni.passed, &detail))
}

#[derive(Serialize)]
pub struct SpectrumRow {
    block: usize,
    block_lambda: f64,
    index: usize,
    basis_label: String,
    block_dim: usize,
}

impl Row for SpectrumRow {
    const HEADER: &'static [&'static str] = &["block", "block_lambda", "index", "basis_label", "block_dim"];
}

fn half(two: i32) -> String {
    if two % 2 == 0 {
        format!("{}", two / 2)
    } else {
        format!("{two}/2")
    }
}

fn label(f: &BasisFunction) -> String {
    match f {
        BasisFunction::Character(k) => {
            format!("e[{}]", k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
        }
        BasisFunction::Wigner { two_j, two_row, two_col } => {
            format!("D[{};{},{}]", half(*two_j as i32), half(*two_row), half(*two_col))
        }
        BasisFunction::Opaque { tag, index } => format!("{tag}[{index}]"),
    }
}

pub fn spectrum(group: &str, reps: &str, sink: &Sink) -> Result<bool, Failure> {
    let space = build_space(group, reps)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (b, rep) in space.blocks.iter().enumerate() {
        worst = worst.max(rep.commutation_residual()).max(rep.casimir_residual());
        for (i, f) in rep.basis.iter().enumerate() {
            rows.push(SpectrumRow {
                block: b,
                block_lambda: rep.lambda,
                index: i,
                basis_label: label(f),
                block_dim: rep.block_dim,
            });
        }
    }
    sink.emit(&rows)?;
    Ok(summary(
        "spectrum",
        worst <= 1e-10,
        &format!("{} blocks, dimension {}, representation residual {worst:.1e}", space.blocks.len(), space.total_dim),
    ))
}

#[derive(Serialize)]
pub struct OracleRow {
    tau: f64,
    route: &'static str,
    block: usize,
    entry_re: f64,
    entry_im: f64,
    residual: f64,
}

impl Row for OracleRow {
    const HEADER: &'static [&'static str] = &["tau", "route", "block", "entry_re", "entry_im", "residual"];
}

pub struct OracleArgs<'a> {
    pub group: &'a str,
    pub reps: &'a str,
    pub taus: &'a str,
    pub width: f64,
    pub tol: f64,
    pub oracle_tol: Option<f64>,
}

pub fn oracle_compare(a: &OracleArgs, sink: &Sink) -> Result<bool, Failure> {
    let space = build_space(a.group, a.reps)?;
    let taus: Vec<f64> = parse_list(a.taus, "tau")?;
    let mut cfg = OracleConfig { width: a.width, ..OracleConfig::for_dim(space.algebra().dim) };
    if let Some(t) = a.oracle_tol {
        cfg.tol = t;
    }
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &tau in &taus {
        let est = lib(regularized_oscillatory_oracle(&space, tau, &cfg))?;
        let (step, _) = lib(rotated_gaussian_step_adaptive(&space, tau, &HermitePolicy::default()))?;
        for b in 0..space.blocks.len() {
            let r = space.block_range(b);
            let (o, g) = (block(&est.matrix, r.clone()), block(&step, r));
            // row-major entries of each block
            for i in 0..o.nrows() {
                for j in 0..o.ncols() {
                    let gap = (o[(i, j)] - g[(i, j)]).norm();
                    worst = worst.max(gap);
                    rows.push(OracleRow { tau, route: "gaussian", block: b, entry_re: g[(i, j)].re, entry_im: g[(i, j)].im, residual: gap });
                    rows.push(OracleRow { tau, route: "oracle", block: b, entry_re: o[(i, j)].re, entry_im: o[(i, j)].im, residual: est.residual });
                }
            }
        }
    }
    sink.emit(&rows)?;
    Ok(summary("oracle-compare", worst <= a.tol, &format!("max entrywise gap {worst:.2e} (threshold {:.0e})", a.tol)))
}

#[derive(Serialize)]
pub struct ConvergeRow {
    n: usize,
    block_lambda: f64,
    error_fro: f64,
    error_op: f64,
    phase_drift: f64,
    wall_ms: f64,
}

impl Row for ConvergeRow {
    const HEADER: &'static [&'static str] = &["n", "block_lambda", "error_fro", "error_op", "phase_drift", "wall_ms"];
}

pub struct ConvergeArgs<'a> {
    pub group: &'a str,
    pub reps: &'a str,
    pub variant: Variant,
    pub t: f64,
    pub n_list: &'a str,
    pub hbar: f64,
    pub quad_order: Option<usize>,
    pub reproducible: bool,
}

pub fn chernoff_converge(a: &ConvergeArgs, sink: &Sink) -> Result<bool, Failure> {
    let space = build_space(a.group, a.reps)?;
    let ns: Vec<usize> = parse_list(a.n_list, "n")?;
    let p = policy(a.quad_order);
    let u = free_propagator(&space, a.t, a.hbar);
    let mut rows = Vec::new();
    let mut totals = Vec::new();
    for &n in &ns {
        let start = Instant::now();
        let c = lib(compose(&space, a.variant, a.t, n, a.hbar, &p))?;
        let wall_ms = if a.reproducible { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
        totals.push(op_norm(&(&c - &u)));
        let ratio = &c * u.adjoint();
        for (b, rep) in space.blocks.iter().enumerate() {
            let r = space.block_range(b);
            let diff = block(&c, r.clone()) - block(&u, r.clone());
            rows.push(ConvergeRow {
                n,
                block_lambda: rep.lambda,
                error_fro: diff.norm(),
                error_op: op_norm(&diff),
                phase_drift: block(&ratio, r).trace().arg(),
                wall_ms,
            });
        }
    }
    sink.emit(&rows)?;
    let worst = totals.iter().cloned().fold(0.0, f64::max);
    if worst <= 1e-10 {
        return Ok(summary("chernoff-converge", true, &format!("exact to {worst:.1e} at every n")));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        ns.iter().zip(&totals).filter(|(_, e)| **e > 0.0).map(|(n, e)| ((*n as f64).ln(), e.ln())).unzip();
    if lx.len() < 3 {
        return Ok(summary("chernoff-converge", true, &format!("largest error {worst:.2e}; too few n for a rate")));
    }
    let slope = fit_slope(&lx, &ly);
    if a.variant == Variant::Haar {
        // converges to the curvature-shifted group, not to U(t)
        return Ok(summary("chernoff-converge", true, &format!("slope {slope:.3} (not judged for the haar variant)")));
    }
    Ok(summary("chernoff-converge", (-1.2..=-0.8).contains(&slope), &format!("slope {slope:.4}, expected in [-1.2, -0.8]")))
}

#[derive(Serialize)]
pub struct CurvatureRow {
    n: usize,
    block_lambda: f64,
    phase_drift: f64,
    expected: f64,
    corrected_error: f64,
}

impl Row for CurvatureRow {
    const HEADER: &'static [&'static str] = &["n", "block_lambda", "phase_drift", "expected", "corrected_error"];
}

pub fn curvature(group: &str, reps: &str, t: f64, n_list: &str, hbar: f64, sink: &Sink) -> Result<bool, Failure> {
    let space = build_space(group, reps)?;
    let ns: Vec<usize> = parse_list(n_list, "n")?;
    let report = lib(curvature_drift(&space, t, &ns, hbar, &HermitePolicy::default()))?;
    let rows: Vec<CurvatureRow> = report
        .rows
        .iter()
        .map(|r| CurvatureRow {
            n: r.n,
            block_lambda: r.block_lambda,
            phase_drift: r.phase_drift,
            expected: report.expected,
            corrected_error: r.corrected_error,
        })
        .collect();
    sink.emit(&rows)?;
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let worst = report
        .rows
        .iter()
        .filter(|r| r.n == n_max)
        .map(|r| (r.phase_drift - report.expected).abs() / report.expected.abs().max(1e-300))
        .fold(0.0, f64::max);
    if report.expected == 0.0 {
        return Ok(summary("curvature", true, "flat algebra, no drift expected"));
    }
    Ok(summary(
        "curvature",
        worst <= 0.02,
        &format!("expected drift {:.4}, worst relative gap {worst:.1e} at n = {n_max}", report.expected),
    ))
}

#[derive(Deserialize)]
struct PathConfig {
    group: String,
    t_total: f64,
    /// Angle(s) for abelian groups, Euler angles for su2; identity when absent.
    start: Option<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
    fd_step: Option<f64>,
}

#[derive(Serialize)]
pub struct DevelopRow {
    segment: usize,
    component: usize,
    v: f64,
    v_hat: f64,
}

impl Row for DevelopRow {
    const HEADER: &'static [&'static str] = &["segment", "component", "v", "v_hat"];
}

pub fn develop_path(config: &str, sink: &Sink) -> Result<bool, Failure> {
    let text = std::fs::read_to_string(config).map_err(|e| Failure::Usage(format!("{config}: {e}")))?;
    let cfg: PathConfig = toml::from_str(&text).map_err(|e| Failure::Usage(format!("{config}: {e}")))?;
    let algebra = load_algebra(&cfg.group)?;
    let fam = match (algebra.dim, algebra.is_abelian()) {
        (1, true) => GroupFamily::U1,
        (d, true) => GroupFamily::Torus(d),
        (3, false) => GroupFamily::Su2,
        _ => return Err(Failure::Usage(format!("no group elements for {}", algebra.name))),
    };
    let start = match &cfg.start {
        None => GroupElement::identity(fam),
        Some(xs) => parse_point(fam, &xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))?,
    };
    let vs: Vec<DVector<f64>> = cfg.velocities.iter().map(|v| DVector::from_column_slice(v)).collect();
    let path = lib(PathSpec::new(start, vs, cfg.t_total))?;
    let hat = lib(develop(&algebra, &path))?;
    let cert = lib(development_jacobian_certificate(&algebra, &path, cfg.fd_step.unwrap_or(1e-5)))?;
    let mut rows = Vec::new();
    let mut iso = 0.0f64;
    for (j, (v, h)) in path.velocities.iter().zip(&hat).enumerate() {
        iso = iso.max((algebra.norm(v) - algebra.norm(h)).abs() / algebra.norm(v).max(1.0));
        for c in 0..v.len() {
            rows.push(DevelopRow { segment: j, component: c, v: v[c], v_hat: h[c] });
        }
    }
    sink.emit(&rows)?;
    Ok(summary(
        "develop",
        iso <= 1e-12 && cert.det_deviation <= 1e-6 && cert.triangularity_residual <= 1e-7,
        &format!(
            "norm gap {iso:.1e}, |det - 1| {:.1e}, triangularity {:.1e}, step stability {:.1e}",
            cert.det_deviation, cert.triangularity_residual, cert.stability_gap
        ),
    ))
}

#[derive(Serialize)]
pub struct CylinderRow {
    n: usize,
    s_chain_re: f64,
    s_chain_im: f64,
    u_chain_re: f64,
    u_chain_im: f64,
    error: f64,
}

impl Row for CylinderRow {
    const HEADER: &'static [&'static str] = &["n", "s_chain_re", "s_chain_im", "u_chain_re", "u_chain_im", "error"];
}

pub struct CylinderArgs<'a> {
    pub group: &'a str,
    pub band: usize,
    pub times: &'a str,
    pub factors: &'a str,
    pub x: &'a str,
    pub t: Option<f64>,
    pub n_list: &'a str,
    pub hbar: f64,
}

pub fn cylinder(a: &CylinderArgs, sink: &Sink) -> Result<bool, Failure> {
    let work = band_space(a.group, a.band)?;
    let times: Vec<f64> = parse_list(a.times, "time")?;
    let factors = a
        .factors
        .split(',')
        .map(|p| load_state(p.trim(), &work))
        .collect::<Result<Vec<_>, _>>()?;
    let x = parse_point(family(&work)?, a.x)?;
    let t_total = a.t.unwrap_or_else(|| times.last().copied().unwrap_or(0.0));
    let cyl = lib(CylinderSpec::new(times, factors, x, t_total, work))?;
    let exact = lib(u_chain(&cyl, a.hbar))?;
    let ns: Vec<usize> = parse_list(a.n_list, "n")?;
    let mut rows = Vec::new();
    for &n in &ns {
        let s = lib(s_chain(&cyl, n, a.hbar, &HermitePolicy::default()))?;
        rows.push(CylinderRow { n, s_chain_re: s.re, s_chain_im: s.im, u_chain_re: exact.re, u_chain_im: exact.im, error: (s - exact).norm() });
    }
    sink.emit(&rows)?;
    // error ratio between n and 2n for n ≥ 128
    let mut ratios = Vec::new();
    for r in &rows {
        if let Some(d) = rows.iter().find(|q| q.n == 2 * r.n && r.n >= 128) {
            if d.error > 1e-14 {
                ratios.push(r.error / d.error);
            }
        }
    }
    let ok = ratios.iter().all(|q| *q >= 1.3);
    let last = rows.last().map(|r| r.error).unwrap_or(0.0);
    Ok(summary("cylinder", ok, &format!("error at largest n {last:.2e}, doubling ratios {ratios:.3?} (need ≥ 1.3)")))
}

#[derive(Serialize)]
pub struct DysonRow {
    m: usize,
    route: &'static str,
    term_norm: f64,
    route_gap: f64,
}

impl Row for DysonRow {
    const HEADER: &'static [&'static str] = &["m", "route", "term_norm", "route_gap"];
}

pub struct DysonArgs<'a> {
    pub group: &'a str,
    pub band: usize,
    pub v: &'a str,
    pub psi0: &'a str,
    pub t: f64,
    pub hbar: f64,
    pub m_max: usize,
    pub routes: RouteChoice,
    pub simplex_order: usize,
    pub panels: usize,
    pub nodes: usize,
    pub route_tol: f64,
}

/// Highest order compared on the simplex grid; its cost grows like `order^m`.
const SIMPLEX_MAX_M: usize = 3;

pub fn dyson(a: &DysonArgs, sink: &Sink) -> Result<bool, Failure> {
    let space = band_space(a.group, a.band)?;
    let v = load_state(a.v, &space)?;
    let psi0 = load_state(a.psi0, &space)?;
    let job = lib(DysonJob::nested(v.clone(), psi0.clone(), a.t, a.m_max, a.hbar))?;
    let simplex = DysonRoute::Simplex { order: a.simplex_order };
    let duhamel = DysonRoute::Duhamel { panels: a.panels, nodes: a.nodes };
    let mut rows = Vec::new();
    for m in 0..=a.m_max {
        let use_simplex = a.routes != RouteChoice::Duhamel && m <= SIMPLEX_MAX_M;
        let use_duhamel = a.routes != RouteChoice::Simplex || m > SIMPLEX_MAX_M;
        let s = if use_simplex { Some(lib(dyson_term(&job, m, simplex))?) } else { None };
        let d = if use_duhamel { Some(lib(dyson_term(&job, m, duhamel))?) } else { None };
        let gap = match (&s, &d) {
            (Some(s), Some(d)) => (&s.coeffs - &d.coeffs).norm(),
            _ => f64::NAN,
        };
        if gap > a.route_tol {
            return Err(Failure::from_lib(Error::RouteDisagreement { m, gap }));
        }
        for (route, term) in [("simplex", s), ("duhamel", d)] {
            if let Some(term) = term {
                rows.push(DysonRow { m, route, term_norm: term.norm(), route_gap: gap });
            }
        }
    }
    sink.emit(&rows)?;
    let route = if a.routes == RouteChoice::Simplex && a.m_max <= SIMPLEX_MAX_M { simplex } else { duhamel };
    let (sum, tail) = lib(dyson_sum(&job, route))?;
    let big = band_space(a.group, psi0.band() + (a.m_max + 2) * v.band())?;
    let mv = lib(potential_matrix(&big, &v))?;
    let direct = lib(direct_solve(&big, &mv, &psi0, a.t, a.hbar))?;
    let gap = (lib(sum.embed_into(&big))?.coeffs - direct.coeffs).norm();
    Ok(summary("dyson", gap <= tail + 1e-6, &format!("series vs direct solve {gap:.2e}, tail bound {tail:.2e} + 1e-6")))
}
