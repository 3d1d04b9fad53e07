//! Feynman-map endpoints on finite-energy spaces: cylinder functions through
//! Chernoff chains with `T_n` insertions, the Dyson expansion for a potential,
//! and a direct truncated-Hamiltonian solve.

use std::sync::Arc;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::cartan::GroupElement;
use crate::chernoff::{build_step, Variant};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_exp, hermitian_residual, sqrt_i, CMat, CVec};
use crate::oscillatory::{tensor_node, HermitePolicy, HermiteRule};
use crate::representation::{
    check_product_closure, evaluate_state, multiplication_operator, FiniteEnergySpace, GroupQuadrature, StateVector,
};

fn free_phases(space: &FiniteEnergySpace, s: f64, hbar: f64) -> CVec {
    let mut p = CVec::zeros(space.total_dim);
    for (b, rep) in space.blocks.iter().enumerate() {
        let z = Complex64::from_polar(1.0, -hbar * s * rep.lambda / 2.0);
        for i in space.block_range(b) {
            p[i] = z;
        }
    }
    p
}

fn apply_free(space: &FiniteEnergySpace, s: f64, hbar: f64, v: &CVec) -> CVec {
    v.component_mul(&free_phases(space, s, hbar))
}

fn multiplication_for(space_in: &FiniteEnergySpace, v: &StateVector, space_out: &FiniteEnergySpace) -> Result<CMat> {
    let quad = GroupQuadrature::for_product(space_in, v, space_out)?;
    multiplication_operator(space_in, v, space_out, &quad)
}

/// Subinterval of `s` on the grid `t/n`, floor convention with a rounding guard.
fn subinterval(s: f64, n: usize, t: f64) -> usize {
    let q = n as f64 * s / t;
    (q + 1e-9 * q.abs().max(1.0)).floor().max(0.0) as usize
}

/// `exp(-i e^{iπ/4} c u·E)` on a space, `u` in g-orthonormal coordinates.
fn rotated_exp(space: &FiniteEnergySpace, frame: &nalgebra::DMatrix<f64>, u: &[f64], c: f64) -> CMat {
    let y = frame * nalgebra::DVector::from_row_slice(u);
    let z = Complex64::new(0.0, -1.0) * sqrt_i() * c;
    let mut m = CMat::zeros(space.total_dim, space.total_dim);
    for (b, rep) in space.blocks.iter().enumerate() {
        let off = space.offsets[b];
        let e = hermitian_exp(&rep.combination(y.as_slice()), z);
        m.view_mut((off, off), (rep.block_dim, rep.block_dim)).copy_from(&e);
    }
    m
}

/// `∫ w(u) E_out(c_0 u) M_1 E(c_1 u) ⋯ M_r E_in(c_r u) du · v`.
///
/// `spaces[0]` holds `v`; `ops[i]` maps `spaces[i]` to `spaces[i+1]`, and
/// `coeffs[i]` scales the exponential acting on `spaces[i]`. Operators are listed
/// in application order (right to left in the product).
fn gaussian_group_apply(spaces: &[&FiniteEnergySpace], ops: &[&CMat], coeffs: &[f64], v: &CVec, rule: &HermiteRule) -> CVec {
    let d = spaces[0].algebra().dim;
    let frame = spaces[0].algebra().orthonormal_frame();
    let last = spaces[spaces.len() - 1];
    let mut acc = CVec::zeros(last.total_dim);
    let mut u = vec![0.0; d];
    for flat in 0..rule.order.pow(d as u32) {
        let w = tensor_node(rule, flat, &mut u);
        let mut tmp = if coeffs[0] == 0.0 { v.clone() } else { rotated_exp(spaces[0], &frame, &u, coeffs[0]) * v };
        for (i, op) in ops.iter().enumerate() {
            tmp = *op * tmp;
            if coeffs[i + 1] != 0.0 {
                tmp = rotated_exp(spaces[i + 1], &frame, &u, coeffs[i + 1]) * tmp;
            }
        }
        acc += tmp * Complex64::new(w, 0.0);
    }
    acc
}

/// Chernoff chain on the grid `t/n` with operator insertions at given times,
/// applied to `final_vec` and truncated at `end`.
///
/// `times` ascend; the operator at `times[i]` maps `spaces[m−1−i]` to `spaces[m−i]`
/// where `m = times.len()`, so `final_vec` lives in `spaces[0]`. Several insertions
/// in one subinterval share its Gaussian variable (the merged branch); with
/// `merge = false` each insertion gets its own `T_n` factor instead.
#[allow(clippy::too_many_arguments)]
fn chernoff_chain(
    spaces: &[Arc<FiniteEnergySpace>],
    times: &[f64],
    ops: &[&CMat],
    final_vec: &CVec,
    t: f64,
    end: f64,
    n: usize,
    hbar: f64,
    policy: &HermitePolicy,
    merge: bool,
) -> Result<CVec> {
    let m = times.len();
    if spaces.len() < m + 1 || ops.len() != m {
        return Err(Error::Structural("chain needs one more space than insertions".into()));
    }
    if n == 0 || !(t > 0.0) || end > t * (1.0 + 1e-12) || end < 0.0 {
        return Err(Error::Domain("need n ≥ 1, t > 0 and 0 ≤ end ≤ t".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&s| s < 0.0 || s > end * (1.0 + 1e-12)) {
        return Err(Error::Domain("insertion times must ascend within [0, end]".into()));
    }
    let delta = t / n as f64;
    let kappa = (hbar / delta).sqrt();
    let rule = HermiteRule::new(policy.start.max(20));
    let mut steps: Vec<Option<CMat>> = vec![None; spaces.len()];
    let mut step = |k: usize| -> Result<CMat> {
        if steps[k].is_none() {
            steps[k] = Some(build_step(&spaces[k], Variant::Lebesgue, delta, hbar, policy)?.matrix);
        }
        Ok(steps[k].clone().expect("just filled"))
    };
    let mut v = final_vec.clone();
    let mut cs = 0; // index of the space currently holding v
    let mut pending = m; // insertions not yet applied, latest first
    if merge {
        let j_end = subinterval(end, n, t);
        for j in (0..=j_end).rev() {
            let left = j as f64 * delta;
            let right = if j == j_end { end } else { left + delta };
            let mut group = Vec::new();
            while pending > 0 && subinterval(times[pending - 1], n, t).min(j_end) == j {
                group.push(pending - 1);
                pending -= 1;
            }
            if group.is_empty() {
                if j < j_end {
                    v = step(cs)? * v;
                } else if right - left > 1e-15 * t {
                    v = gaussian_group_apply(&[&spaces[cs]], &[], &[(right - left) * kappa], &v, &rule);
                }
                continue;
            }
            // group holds insertion indices latest first
            let mut coeffs = vec![(right - times[group[0]]) * kappa];
            for w in group.windows(2) {
                coeffs.push((times[w[0]] - times[w[1]]) * kappa);
            }
            coeffs.push((times[*group.last().expect("nonempty")] - left) * kappa);
            let sp: Vec<&FiniteEnergySpace> = (cs..=cs + group.len()).map(|k| spaces[k].as_ref()).collect();
            let gops: Vec<&CMat> = group.iter().map(|&i| ops[i]).collect();
            v = gaussian_group_apply(&sp, &gops, &coeffs, &v, &rule);
            cs += group.len();
        }
        if pending > 0 {
            return Err(Error::Domain("insertion after the chain end".into()));
        }
    } else {
        // separate T_n factors; S powers between them clipped at zero
        if (end - t).abs() > 1e-12 * t {
            return Err(Error::Domain("the unmerged branch runs to the horizon".into()));
        }
        let mut upper = n; // subintervals at or above this index are consumed
        while pending > 0 {
            let i = pending - 1;
            let j = subinterval(times[i], n, t);
            let gap = upper.saturating_sub(j + 1);
            for _ in 0..gap {
                v = step(cs)? * v;
            }
            let left = j as f64 * delta;
            let right = (left + delta).min(end);
            let coeffs = [(right - times[i]) * kappa, (times[i] - left) * kappa];
            v = gaussian_group_apply(&[&spaces[cs], &spaces[cs + 1]], &[ops[i]], &coeffs, &v, &rule);
            cs += 1;
            pending -= 1;
            upper = j;
        }
        for _ in 0..upper {
            v = step(cs)? * v;
        }
    }
    Ok(v)
}

/// `T_n(s) = ∫ w(u) E_out(a u) M_φ E_in(b u) du` with `a`, `b` the fractions of the
/// subinterval containing `s`, scaled by `√(ħ n / t)`.
#[allow(clippy::too_many_arguments)]
pub fn t_n_operator(
    space_in: &FiniteEnergySpace,
    space_out: &FiniteEnergySpace,
    m_phi: &CMat,
    s: f64,
    n: usize,
    t: f64,
    hbar: f64,
    rule: &HermiteRule,
) -> Result<CMat> {
    if m_phi.shape() != (space_out.total_dim, space_in.total_dim) {
        return Err(Error::Structural("M_φ shape does not match the spaces".into()));
    }
    if n == 0 || !(t > 0.0) || !(0.0..=t).contains(&s) {
        return Err(Error::Domain("need n ≥ 1, t > 0 and s in [0, t]".into()));
    }
    let delta = t / n as f64;
    let kappa = (hbar / delta).sqrt();
    let j = subinterval(s, n, t);
    let left = j as f64 * delta;
    let (a, b) = ((s - left) * kappa, (left + delta - s) * kappa);
    let mut out = CMat::zeros(space_out.total_dim, space_in.total_dim);
    for c in 0..space_in.total_dim {
        let mut e = CVec::zeros(space_in.total_dim);
        e[c] = Complex64::new(1.0, 0.0);
        let col = gaussian_group_apply(&[space_in, space_out], &[m_phi], &[b, a], &e, rule);
        out.set_column(c, &col);
    }
    Ok(out)
}

/// A cylinder function `f(γ) = φ_1(γ(t_1)) ⋯ φ_k(γ(t_k))` evaluated along paths from `eval_point`.
#[derive(Debug, Clone)]
pub struct CylinderSpec {
    pub times: Vec<f64>,
    pub factors: Vec<StateVector>,
    pub eval_point: GroupElement,
    /// Horizon `t` of the path space.
    pub t_total: f64,
    /// Space closed under all products of the factors.
    pub work_space: Arc<FiniteEnergySpace>,
}

impl CylinderSpec {
    pub fn new(
        times: Vec<f64>,
        factors: Vec<StateVector>,
        eval_point: GroupElement,
        t_total: f64,
        work_space: Arc<FiniteEnergySpace>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != factors.len() {
            return Err(Error::Structural("need one factor per time".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times[0] < 0.0 || times[times.len() - 1] > t_total {
            return Err(Error::Domain("times must ascend within [0, t]".into()));
        }
        let required: usize = factors.iter().map(StateVector::band).sum();
        let available = work_space.complete_band().unwrap_or(0);
        if required > available {
            return Err(Error::BandOverflow { required, available });
        }
        let factors = factors.iter().map(|f| f.embed_into(&work_space)).collect::<Result<_>>()?;
        Ok(CylinderSpec { times, factors, eval_point, t_total, work_space })
    }

    fn multipliers(&self) -> Result<Vec<CMat>> {
        let w = &self.work_space;
        self.factors[..self.factors.len() - 1].iter().map(|f| multiplication_for(w, f, w)).collect()
    }
}

/// `U(t_1) M_{φ_1} U(t_2 − t_1) ⋯ M_{φ_{k−1}} U(t_k − t_{k−1}) φ_k` evaluated at the point.
pub fn u_chain(cyl: &CylinderSpec, hbar: f64) -> Result<Complex64> {
    let w = &cyl.work_space;
    let mults = cyl.multipliers()?;
    let k = cyl.times.len();
    let mut v = cyl.factors[k - 1].coeffs.clone();
    for j in (0..k - 1).rev() {
        v = apply_free(w, cyl.times[j + 1] - cyl.times[j], hbar, &v);
        v = &mults[j] * v;
    }
    v = apply_free(w, cyl.times[0], hbar, &v);
    evaluate_state(&StateVector::new(w.clone(), v)?, &cyl.eval_point)
}

/// Finite-`n` Chernoff chain for the cylinder function, evaluated at the point.
pub fn s_chain(cyl: &CylinderSpec, n: usize, hbar: f64, policy: &HermitePolicy) -> Result<Complex64> {
    let w = &cyl.work_space;
    let mults = cyl.multipliers()?;
    let k = cyl.times.len();
    let spaces = vec![w.clone(); k];
    let ops: Vec<&CMat> = mults.iter().collect();
    let v = chernoff_chain(
        &spaces,
        &cyl.times[..k - 1],
        &ops,
        &cyl.factors[k - 1].coeffs,
        cyl.t_total,
        cyl.times[k - 1],
        n,
        hbar,
        policy,
        true,
    )?;
    evaluate_state(&StateVector::new(w.clone(), v)?, &cyl.eval_point)
}

/// Potential `V`, initial state and the nested spaces the Dyson terms live in.
#[derive(Debug, Clone)]
pub struct DysonJob {
    pub space_chain: Vec<Arc<FiniteEnergySpace>>,
    pub v: StateVector,
    pub psi0: StateVector,
    pub t: f64,
    pub m_max: usize,
    pub hbar: f64,
    /// `mults[j]` maps `space_chain[j]` to `space_chain[j+1]`.
    mults: Vec<CMat>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DysonRoute {
    /// Gauss–Legendre tensor grid of the given order mapped onto the ordered simplex.
    Simplex { order: usize },
    /// Iterated Duhamel integrals on composite Gauss–Legendre panels.
    Duhamel { panels: usize, nodes: usize },
}

impl Default for DysonRoute {
    fn default() -> Self {
        DysonRoute::Duhamel { panels: 64, nodes: 12 }
    }
}

impl DysonJob {
    pub fn new(
        space_chain: Vec<Arc<FiniteEnergySpace>>,
        v: StateVector,
        psi0: StateVector,
        t: f64,
        m_max: usize,
        hbar: f64,
    ) -> Result<Self> {
        if space_chain.len() < m_max + 1 {
            return Err(Error::Structural(format!("need {} spaces, got {}", m_max + 1, space_chain.len())));
        }
        if !(t > 0.0 && hbar > 0.0) {
            return Err(Error::Domain("t and hbar must be positive".into()));
        }
        let psi0 = psi0.embed_into(&space_chain[0])?;
        let mut mults = Vec::with_capacity(m_max);
        for j in 0..m_max {
            check_product_closure(&space_chain[j], &v, &space_chain[j + 1])?;
            mults.push(multiplication_for(&space_chain[j], &v, &space_chain[j + 1])?);
        }
        Ok(DysonJob { space_chain, v, psi0, t, m_max, hbar, mults })
    }

    /// Chain of complete spaces with bands `band(ψ0) + j·band(V)`.
    pub fn nested(v: StateVector, psi0: StateVector, t: f64, m_max: usize, hbar: f64) -> Result<Self> {
        let algebra = v.space.algebra().clone();
        let (bv, bp) = (v.band(), psi0.band());
        let chain = (0..=m_max)
            .map(|j| FiniteEnergySpace::complete(algebra.clone(), bp + j * bv).map(Arc::new))
            .collect::<Result<_>>()?;
        Self::new(chain, v, psi0, t, m_max, hbar)
    }

    pub fn largest_space(&self) -> &Arc<FiniteEnergySpace> {
        &self.space_chain[self.m_max]
    }

    /// `U(s_1) V U(s_2 − s_1) ⋯ V U(t − s_m) ψ0` for ordered `s`.
    pub fn integrand(&self, s: &[f64]) -> Result<StateVector> {
        let m = s.len();
        if m > self.m_max {
            return Err(Error::Domain("more insertions than m_max".into()));
        }
        let hb = self.hbar;
        let mut v = self.psi0.coeffs.clone();
        let mut upper = self.t;
        for (i, &si) in s.iter().enumerate().rev() {
            v = apply_free(&self.space_chain[m - 1 - i], upper - si, hb, &v);
            v = &self.mults[m - 1 - i] * v;
            upper = si;
        }
        v = apply_free(&self.space_chain[m], upper, hb, &v);
        StateVector::new(self.space_chain[m].clone(), v)
    }

    fn interaction_picture(&self, j: usize, r: f64) -> CMat {
        let hb = self.hbar;
        let pin = free_phases(&self.space_chain[j], r, hb);
        let pout = free_phases(&self.space_chain[j + 1], r, hb);
        let mut m = self.mults[j].clone();
        for ((row, col), x) in m.iter_mut().enumerate().map(|(k, x)| ((k % pout.len(), k / pout.len()), x)) {
            *x *= pout[row].conj() * pin[col];
        }
        m
    }
}

fn legendre_nodes(order: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(order.max(1).try_into().expect("positive order"))
        .iter()
        .map(|(x, w)| (*x, *w))
        .collect()
}

fn simplex_term(job: &DysonJob, m: usize, order: usize) -> Result<StateVector> {
    let gl: Vec<(f64, f64)> = legendre_nodes(order).into_iter().map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0)).collect();
    let target = &job.space_chain[m];
    let mut acc = CVec::zeros(target.total_dim);
    let count = order.pow(m as u32);
    let mut s = vec![0.0; m];
    for flat in 0..count {
        // u_m → s_m = t u_m, s_k = s_{k+1} u_k; Jacobian t^m Π u_k^{k−1}
        let mut idx = flat;
        let mut jac = job.t.powi(m as i32);
        let mut upper = job.t;
        for k in (0..m).rev() {
            let (u, w) = gl[idx % order];
            idx /= order;
            s[k] = upper * u;
            upper = s[k];
            jac *= w * u.powi(k as i32);
        }
        acc += job.integrand(&s)?.coeffs * Complex64::new(jac, 0.0);
    }
    StateVector::new(target.clone(), acc)
}

/// Lagrange integration matrix on Gauss–Legendre nodes: `Q[i][j] = ∫_{-1}^{x_i} ℓ_j`.
fn integration_matrix(nodes: &[f64]) -> Vec<Vec<f64>> {
    let q = nodes.len();
    let inner = legendre_nodes(q);
    let lagrange = |j: usize, y: f64| -> f64 {
        (0..q).filter(|&k| k != j).map(|k| (y - nodes[k]) / (nodes[j] - nodes[k])).product()
    };
    (0..q)
        .map(|i| {
            let half = (nodes[i] + 1.0) / 2.0;
            (0..q)
                .map(|j| inner.iter().map(|(y, w)| w * half * lagrange(j, -1.0 + half * (y + 1.0))).sum())
                .collect()
        })
        .collect()
}

/// All Duhamel terms up to `m_max` in the interaction picture.
fn duhamel_terms(job: &DysonJob, m_top: usize, panels: usize, q: usize) -> Result<Vec<StateVector>> {
    let gl = legendre_nodes(q);
    let xs: Vec<f64> = gl.iter().map(|(x, _)| *x).collect();
    let qmat = integration_matrix(&xs);
    let h = job.t / panels as f64;
    let times: Vec<f64> = (0..panels)
        .flat_map(|p| xs.iter().map(move |x| (p as f64 + (x + 1.0) / 2.0) * h))
        .collect();
    let mut values: Vec<CVec> = vec![job.psi0.coeffs.clone(); times.len()];
    let mut out = vec![StateVector::new(
        job.space_chain[0].clone(),
        apply_free(&job.space_chain[0], job.t, job.hbar, &job.psi0.coeffs),
    )?];
    for m in 1..=m_top {
        let f: Vec<CVec> = times
            .iter()
            .zip(&values)
            .map(|(&r, v)| job.interaction_picture(m - 1, r) * v)
            .collect();
        let dim = job.space_chain[m].total_dim;
        let mut running = CVec::zeros(dim);
        let mut next = Vec::with_capacity(times.len());
        for p in 0..panels {
            let fp = &f[p * q..(p + 1) * q];
            for row in &qmat {
                let mut v = running.clone();
                for (c, fj) in row.iter().zip(fp) {
                    v += fj * Complex64::new(c * h / 2.0, 0.0);
                }
                next.push(v);
            }
            for ((_, w), fj) in gl.iter().zip(fp) {
                running += fj * Complex64::new(w * h / 2.0, 0.0);
            }
        }
        values = next;
        let psi = apply_free(&job.space_chain[m], job.t, job.hbar, &running);
        out.push(StateVector::new(job.space_chain[m].clone(), psi)?);
    }
    Ok(out)
}

/// `∫_{Δ_m} U(s_1) V U(s_2 − s_1) ⋯ V U(t − s_m) ψ0 ds`, without the `m!`.
pub fn dyson_term(job: &DysonJob, m: usize, route: DysonRoute) -> Result<StateVector> {
    if m > job.m_max {
        return Err(Error::Domain(format!("m = {m} exceeds m_max = {}", job.m_max)));
    }
    match route {
        DysonRoute::Simplex { order } => simplex_term(job, m, order),
        DysonRoute::Duhamel { panels, nodes } => Ok(duhamel_terms(job, m, panels, nodes)?.swap_remove(m)),
    }
}

/// Both routes for order `m`; refuses when they differ by more than `tol`.
pub fn dyson_term_checked(job: &DysonJob, m: usize, simplex_order: usize, tol: f64) -> Result<(StateVector, f64)> {
    let a = dyson_term(job, m, DysonRoute::Simplex { order: simplex_order })?;
    let b = dyson_term(job, m, DysonRoute::default())?;
    let gap = (&a.coeffs - &b.coeffs).norm();
    if gap > tol {
        return Err(Error::RouteDisagreement { m, gap });
    }
    Ok((b, gap))
}

/// `(1/2!) ∫_{[0,t]²}` of the time-sorted integrand, split at the diagonal.
pub fn symmetrized_square_term(job: &DysonJob, order: usize) -> Result<StateVector> {
    if job.m_max < 2 {
        return Err(Error::Domain("needs m_max ≥ 2".into()));
    }
    let gl = legendre_nodes(order);
    let map = |a: f64, b: f64, x: f64| a + (b - a) * (x + 1.0) / 2.0;
    let mut acc = CVec::zeros(job.space_chain[2].total_dim);
    for &(x1, w1) in &gl {
        let s1 = map(0.0, job.t, x1);
        let w1 = w1 * job.t / 2.0;
        for &(x2, w2) in &gl {
            let below = map(0.0, s1, x2);
            let above = map(s1, job.t, x2);
            acc += job.integrand(&[below, s1])?.coeffs * Complex64::new(w1 * w2 * s1 / 2.0, 0.0);
            acc += job.integrand(&[s1, above])?.coeffs * Complex64::new(w1 * w2 * (job.t - s1) / 2.0, 0.0);
        }
    }
    StateVector::new(job.space_chain[2].clone(), acc / Complex64::new(2.0, 0.0))
}

/// `sup |V|` from a dense grid on the group.
pub fn potential_sup(v: &StateVector) -> Result<f64> {
    let family = v
        .space
        .family()
        .ok_or_else(|| Error::Domain("potential has no built-in grid".into()))?;
    let quad = GroupQuadrature::for_family(family, 8 * v.band().max(1) + 32);
    let mut sup = 0.0f64;
    for g in &quad.points {
        sup = sup.max(evaluate_state(v, g)?.norm());
    }
    Ok(sup)
}

/// `Σ_{m ≤ m_max} (−i/ħ)^m dyson_term(m)` in the largest space, plus the series tail bound.
pub fn dyson_sum(job: &DysonJob, route: DysonRoute) -> Result<(StateVector, f64)> {
    let terms = match route {
        DysonRoute::Duhamel { panels, nodes } => duhamel_terms(job, job.m_max, panels, nodes)?,
        DysonRoute::Simplex { .. } => (0..=job.m_max).map(|m| dyson_term(job, m, route)).collect::<Result<_>>()?,
    };
    let big = job.largest_space();
    let mut sum = CVec::zeros(big.total_dim);
    let mut factor = Complex64::new(1.0, 0.0);
    for term in &terms {
        sum += term.embed_into(big)?.coeffs * factor;
        factor *= Complex64::new(0.0, -1.0 / job.hbar);
    }
    let x = potential_sup(&job.v)? * job.t / job.hbar;
    let m1 = job.m_max + 1;
    let tail = (1..=m1).fold(1.0, |acc, k| acc * x / k as f64) * job.psi0.norm();
    Ok((StateVector::new(big.clone(), sum)?, tail))
}

/// Chernoff-chain approximation `g_n(s)` of the Dyson integrand at ordered times `s`.
pub fn feynman_gn(job: &DysonJob, s: &[f64], n: usize, policy: &HermitePolicy) -> Result<StateVector> {
    feynman_gn_branch(job, s, n, policy, true)
}

/// `feynman_gn` with the choice of collision handling; `merge = false` multiplies
/// separate `T_n` factors even when times share a subinterval.
pub fn feynman_gn_branch(job: &DysonJob, s: &[f64], n: usize, policy: &HermitePolicy, merge: bool) -> Result<StateVector> {
    let m = s.len();
    if m > job.m_max {
        return Err(Error::Domain("more insertions than m_max".into()));
    }
    // insertion at s[i] maps chain[m−1−i] → chain[m−i]
    let ops: Vec<&CMat> = (0..m).map(|i| &job.mults[m - 1 - i]).collect();
    let v = chernoff_chain(&job.space_chain[..=m], s, &ops, &job.psi0.coeffs, job.t, job.t, n, job.hbar, policy, merge)?;
    StateVector::new(job.space_chain[m].clone(), v)
}

/// `exp(−(it/ħ) H) ψ0` with `H = (ħ²/2) Casimir + M_V` on one truncation space.
pub fn direct_solve(space: &Arc<FiniteEnergySpace>, m_v: &CMat, psi0: &StateVector, t: f64, hbar: f64) -> Result<StateVector> {
    if m_v.shape() != (space.total_dim, space.total_dim) {
        return Err(Error::Structural("M_V must be square on the space".into()));
    }
    let psi0 = psi0.embed_into(space)?;
    let h = space.casimir_matrix() * Complex64::new(hbar * hbar / 2.0, 0.0) + m_v;
    let z = Complex64::new(0.0, -t / hbar);
    let u = if hermitian_residual(&h) <= 1e-12 * (1.0 + crate::linalg::max_abs(&h)) {
        let herm = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        hermitian_exp(&herm, z)
    } else {
        (h * z).exp()
    };
    StateVector::new(space.clone(), u * psi0.coeffs)
}

/// `M_V` on a single space, for `direct_solve`.
pub fn potential_matrix(space: &FiniteEnergySpace, v: &StateVector) -> Result<CMat> {
    multiplication_for(space, v, space)
}
