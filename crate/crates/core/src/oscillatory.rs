//! Matrix-valued Gaussian and oscillatory integrals over the Lie algebra.
//!
//! The fast path integrates `exp(-i e^{iπ/4} √τ x·E)` against the standard
//! Gaussian with tensorized Gauss–Hermite nodes, where `E_a` are the generators
//! of a g-orthonormal basis. The oracle integrates the undamped Fresnel phase
//! `e^{i|x|²/2}` with a Gaussian cutoff `φ(εx)` on a trapezoid grid and
//! extrapolates in `ε² → 0`.

use std::f64::consts::PI;

use gauss_quad::GaussHermite;
use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_exp, max_abs_diff, op_norm, sqrt_i, CMat};
use crate::representation::FiniteEnergySpace;

/// Gauss–Hermite rule for the weight `e^{-x²/2}/√(2π)`.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    pub fn new(order: usize) -> Self {
        let order = order.max(1);
        let gh = GaussHermite::new(order.try_into().expect("positive order"));
        // polish the library nodes by Newton on ψ_n and take w = 1/Σ_{k<n} ψ_k²
        let roots: Vec<f64> = (0..=order).map(|k| (k as f64).sqrt()).collect();
        let (nodes, weights) = gh
            .iter()
            .map(|(x, _)| {
                let mut x = x * std::f64::consts::SQRT_2;
                for _ in 0..2 {
                    let (prev, cur, _) = orthonormal_hermite(x, order, &roots);
                    if prev != 0.0 {
                        x -= cur / (roots[order] * prev);
                    }
                }
                (x, 1.0 / orthonormal_hermite(x, order, &roots).2)
            })
            .unzip();
        HermiteRule { order, nodes, weights }
    }

    pub fn moment(&self, p: i32) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * x.powi(p)).sum()
    }
}

/// `(ψ_{n−1}(x), ψ_n(x), Σ_{k<n} ψ_k(x)²)` for the orthonormal probabilists' Hermite functions.
fn orthonormal_hermite(x: f64, n: usize, roots: &[f64]) -> (f64, f64, f64) {
    let (mut prev, mut cur, mut sumsq) = (0.0, 1.0, 1.0);
    for k in 0..n {
        let next = (x * cur - roots[k] * prev) / roots[k + 1];
        prev = cur;
        cur = next;
        if k + 1 < n {
            sumsq += cur * cur;
        }
    }
    (prev, cur, sumsq)
}

/// Adaptive order doubling: from `start` up to `cap`, stop once successive
/// results differ by less than `tol` in max norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitePolicy {
    pub start: usize,
    pub cap: usize,
    pub tol: f64,
}

impl Default for HermitePolicy {
    fn default() -> Self {
        HermitePolicy { start: 20, cap: 160, tol: 1e-11 }
    }
}

impl HermitePolicy {
    pub fn fixed(order: usize) -> Self {
        HermitePolicy { start: order, cap: order, tol: f64::INFINITY }
    }
}

/// Generators of a g-orthonormal basis, one list per block: `E_a = Σ_b M[b][a] X_b`.
pub(crate) fn orthonormal_generators(space: &FiniteEnergySpace) -> Vec<Vec<CMat>> {
    let frame = space.algebra().orthonormal_frame();
    let d = frame.nrows();
    space
        .blocks
        .iter()
        .map(|rep| {
            (0..d)
                .map(|a| rep.combination(&frame.column(a).iter().copied().collect::<Vec<_>>()))
                .collect()
        })
        .collect()
}

fn combine(gens: &[CMat], x: &[f64]) -> CMat {
    let n = gens[0].nrows();
    let mut h = CMat::zeros(n, n);
    for (g, &c) in gens.iter().zip(x) {
        if c != 0.0 {
            h += g * Complex64::new(c, 0.0);
        }
    }
    h
}

fn block_diag(space: &FiniteEnergySpace, blocks: &[CMat]) -> CMat {
    let mut m = CMat::zeros(space.total_dim, space.total_dim);
    for (b, blk) in blocks.iter().enumerate() {
        let off = space.offsets[b];
        m.view_mut((off, off), blk.shape()).copy_from(blk);
    }
    m
}

fn is_diagonal(gens: &[CMat]) -> bool {
    gens.iter().all(|g| {
        (0..g.nrows()).all(|r| (0..g.ncols()).all(|c| r == c || g[(r, c)] == Complex64::new(0.0, 0.0)))
    })
}

/// Writes the coordinates of tensor node `flat` into `x` and returns its weight.
#[inline]
pub(crate) fn tensor_node(rule: &HermiteRule, flat: usize, x: &mut [f64]) -> f64 {
    let q = rule.order;
    let mut idx = flat;
    let mut w = 1.0;
    for xk in x.iter_mut() {
        let i = idx % q;
        idx /= q;
        *xk = rule.nodes[i];
        w *= rule.weights[i];
    }
    w
}

/// `(2π)^{-d/2} ∫ e^{-|x|²/2} weight(x) exp(z x·E) dx` blockwise with a fixed rule,
/// where `z = -i e^{iπ/4} √τ` and `x` are g-orthonormal coordinates.
pub(crate) fn weighted_gaussian_step(
    space: &FiniteEnergySpace,
    tau: f64,
    rule: &HermiteRule,
    weight: Option<&(dyn Fn(&[f64]) -> Complex64 + Sync)>,
) -> CMat {
    let d = space.algebra().dim;
    let z = Complex64::new(0.0, -1.0) * sqrt_i() * tau.max(0.0).sqrt();
    let gens = orthonormal_generators(space);
    let count = rule.order.pow(d as u32);
    let blocks: Vec<CMat> = gens
        .iter()
        .map(|g| {
            let n = g[0].nrows();
            if weight.is_none() && is_diagonal(g) {
                // commuting scalar generators: the tensor sum factorizes per axis
                return CMat::from_diagonal(&DVector::from_fn(n, |i, _| {
                    g.iter()
                        .map(|e| crate::precise::rotated_scalar_sum(rule, tau, e[(i, i)].re))
                        .product::<Complex64>()
                }));
            }
            // growth bound of |exp(z x·E)| used to drop nodes that cannot contribute
            let lb = g.iter().map(|e| op_norm(e).powi(2)).sum::<f64>().sqrt();
            let c = z.re.abs().max(z.im.abs()) * lb;
            let chunk = 512;
            let partials: Vec<CMat> = (0..count.div_ceil(chunk))
                .into_par_iter()
                .map(|ci| {
                    let mut acc = CMat::zeros(n, n);
                    let mut x = vec![0.0; d];
                    for flat in ci * chunk..((ci + 1) * chunk).min(count) {
                        let w = tensor_node(rule, flat, &mut x);
                        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let wx = match weight {
                            Some(f) => f(&x) * w,
                            None => Complex64::new(w, 0.0),
                        };
                        if wx.norm() * (c * r).exp() < 1e-22 {
                            continue;
                        }
                        acc += hermitian_exp(&combine(g, &x), z) * wx;
                    }
                    acc
                })
                .collect();
            partials.into_iter().fold(CMat::zeros(n, n), |a, b| a + b)
        })
        .collect();
    block_diag(space, &blocks)
}

/// Contour-rotated Gaussian step with a fixed rule; the identity at `τ = 0`.
pub fn rotated_gaussian_step(space: &FiniteEnergySpace, tau: f64, rule: &HermiteRule) -> CMat {
    if tau == 0.0 {
        return CMat::identity(space.total_dim, space.total_dim);
    }
    weighted_gaussian_step(space, tau, rule, None)
}

/// Runs `eval` at doubling orders until two successive results agree.
pub(crate) fn adaptive<F: Fn(&HermiteRule) -> CMat>(policy: &HermitePolicy, eval: F) -> Result<(CMat, usize)> {
    let mut order = policy.start.max(1);
    let mut prev = eval(&HermiteRule::new(order));
    if policy.cap <= order {
        return Ok((prev, order));
    }
    loop {
        let next_order = (order * 2).min(policy.cap);
        let next = eval(&HermiteRule::new(next_order));
        let change = max_abs_diff(&prev, &next);
        if change < policy.tol {
            return Ok((next, next_order));
        }
        if next_order >= policy.cap {
            return Err(Error::Accuracy { change });
        }
        order = next_order;
        prev = next;
    }
}

/// Rotated Gaussian step with adaptive order; returns the matrix and the order used.
pub fn rotated_gaussian_step_adaptive(space: &FiniteEnergySpace, tau: f64, policy: &HermitePolicy) -> Result<(CMat, usize)> {
    if tau == 0.0 {
        return Ok((CMat::identity(space.total_dim, space.total_dim), 0));
    }
    adaptive(policy, |rule| weighted_gaussian_step(space, tau, rule, None))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Cutoff widths, decreasing.
    pub epsilons: Vec<f64>,
    /// Grid half-width is `box_factor / ε`.
    pub box_factor: f64,
    /// Spacing satisfies `2π/h ≥ alias_factor·√(1+ε⁴)/ε + √τ·‖x·E‖_max`.
    pub alias_factor: f64,
    /// Test function is `e^{-|width·y|²/2}`.
    pub width: f64,
    /// Largest acceptable extrapolation residual.
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            epsilons: vec![0.5, 0.42, 0.35, 0.3, 0.25, 0.2],
            box_factor: 8.5,
            alias_factor: 8.5,
            width: 1.0,
            tol: 1e-4,
        }
    }
}

impl OracleConfig {
    /// Default ladder for `d = 3`; lower dimensions afford cutoffs down to 0.1.
    pub fn for_dim(d: usize) -> Self {
        if d <= 2 {
            OracleConfig { epsilons: vec![0.3, 0.25, 0.2, 0.16, 0.13, 0.1], ..OracleConfig::default() }
        } else {
            OracleConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleEstimate {
    pub matrix: CMat,
    /// Max entrywise gap between the extrapolations with and without the widest cutoff.
    pub residual: f64,
    /// Regularized values per ε, before extrapolation.
    pub samples: Vec<(f64, CMat)>,
}

/// Neville evaluation at 0 of the polynomial through `(x_i, y_i)`.
fn extrapolate_to_zero(xs: &[f64], ys: &[CMat]) -> CMat {
    let mut p: Vec<CMat> = ys.to_vec();
    let n = xs.len();
    for k in 1..n {
        for i in 0..n - k {
            let (xi, xk) = (xs[i], xs[i + k]);
            p[i] = (&p[i + 1] * Complex64::new(xi, 0.0) - &p[i] * Complex64::new(xk, 0.0)) / Complex64::new(xi - xk, 0.0);
        }
    }
    p.swap_remove(0)
}

/// Per-block data for the oracle's node loop, with 1×1 and 2×2 fast paths.
enum BlockKernel {
    Scalar(Vec<f64>),
    Pauli { a0: Vec<f64>, b: Vec<[f64; 3]> },
    Dense(Vec<CMat>),
}

impl BlockKernel {
    fn new(gens: &[CMat]) -> Self {
        match gens[0].nrows() {
            1 => BlockKernel::Scalar(gens.iter().map(|g| g[(0, 0)].re).collect()),
            2 => BlockKernel::Pauli {
                a0: gens.iter().map(|g| 0.5 * (g[(0, 0)].re + g[(1, 1)].re)).collect(),
                b: gens
                    .iter()
                    .map(|g| [g[(1, 0)].re, g[(1, 0)].im, 0.5 * (g[(0, 0)].re - g[(1, 1)].re)])
                    .collect(),
            },
            _ => BlockKernel::Dense(gens.to_vec()),
        }
    }

    /// Adds `w · exp(-i s x·E)` into `acc` (row-major, block size n).
    fn accumulate(&self, x: &[f64], s: f64, w: Complex64, acc: &mut [Complex64]) {
        match self {
            BlockKernel::Scalar(g) => {
                let h: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
                acc[0] += w * Complex64::from_polar(1.0, -s * h);
            }
            BlockKernel::Pauli { a0, b } => {
                let mut h0 = 0.0;
                let mut v = [0.0; 3];
                for (k, &xk) in x.iter().enumerate() {
                    h0 += a0[k] * xk;
                    for c in 0..3 {
                        v[c] += b[k][c] * xk;
                    }
                }
                let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                let (sn, cs) = (s * r).sin_cos();
                let pre = w * Complex64::from_polar(1.0, -s * h0);
                // exp(-i s r n·σ) = cos(sr) − i sin(sr) n·σ
                let f = if r > 0.0 { sn / r } else { 0.0 };
                let mi = Complex64::new(0.0, -f);
                acc[0] += pre * (cs + mi * v[2]);
                acc[3] += pre * (cs - mi * v[2]);
                acc[1] += pre * mi * Complex64::new(v[0], -v[1]);
                acc[2] += pre * mi * Complex64::new(v[0], v[1]);
            }
            BlockKernel::Dense(g) => {
                let e = hermitian_exp(&combine(g, x), Complex64::new(0.0, -s));
                let n = e.nrows();
                for r in 0..n {
                    for c in 0..n {
                        acc[r * n + c] += w * e[(r, c)];
                    }
                }
            }
        }
    }
}

/// Trapezoid approximation of `(2πi)^{-d/2} ∫ e^{i|x|²/2} exp(-i√τ x·E) φ(εx) dx`.
fn regularized_sample(space: &FiniteEnergySpace, gens: &[Vec<CMat>], tau: f64, eps: f64, cfg: &OracleConfig) -> CMat {
    let d = space.algebra().dim;
    let e = eps * cfg.width;
    let s = tau.sqrt();
    let freq = gens
        .iter()
        .map(|g| g.iter().map(|m| op_norm(m).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let half = cfg.box_factor / e;
    let omega = cfg.alias_factor * (1.0 + e.powi(4)).sqrt() / e + s * freq;
    let h = 2.0 * PI / omega;
    let m = (half / h).ceil() as i64;
    let a = Complex64::new(-e * e, 1.0) * 0.5; // exponent coefficient of |x|²
    let axis: Vec<f64> = (-m..=m).map(|i| i as f64 * h).collect();
    let axis_w: Vec<Complex64> = axis.iter().map(|&x| (a * x * x).exp() * h).collect();
    let kernels: Vec<BlockKernel> = gens.iter().map(|g| BlockKernel::new(g)).collect();
    let sizes: Vec<usize> = gens.iter().map(|g| g[0].nrows()).collect();
    let total: usize = sizes.iter().map(|n| n * n).sum();
    let r2max = half * half;
    let npts = axis.len();
    // outer loop over the first coordinate, remaining coordinates enumerated inside
    let inner = npts.pow(d as u32 - 1);
    let partials: Vec<Vec<Complex64>> = (0..npts)
        .into_par_iter()
        .map(|i0| {
            let mut acc = vec![Complex64::new(0.0, 0.0); total];
            let mut x = vec![0.0; d];
            x[0] = axis[i0];
            for rest in 0..inner {
                let mut w = axis_w[i0];
                let mut idx = rest;
                let mut r2 = x[0] * x[0];
                for k in 1..d {
                    let ik = idx % npts;
                    idx /= npts;
                    x[k] = axis[ik];
                    w *= axis_w[ik];
                    r2 += x[k] * x[k];
                }
                if r2 > r2max {
                    continue;
                }
                let mut off = 0;
                for (kern, &n) in kernels.iter().zip(&sizes) {
                    kern.accumulate(&x, s, w, &mut acc[off..off + n * n]);
                    off += n * n;
                }
            }
            acc
        })
        .collect();
    let mut sum = vec![Complex64::new(0.0, 0.0); total];
    for p in partials {
        for (t, v) in sum.iter_mut().zip(p) {
            *t += v;
        }
    }
    // (2πi)^{-d/2} with i^{1/2} = e^{iπ/4}
    let norm = sqrt_i().powi(-(d as i32)) * (2.0 * PI).powf(-(d as f64) / 2.0);
    let mut blocks = Vec::with_capacity(gens.len());
    let mut off = 0;
    for &n in &sizes {
        blocks.push(CMat::from_row_slice(n, n, &sum[off..off + n * n]) * norm);
        off += n * n;
    }
    block_diag(space, &blocks)
}

/// ε-regularized oscillatory integral extrapolated to `ε → 0`. Limited to `d ≤ 3`.
pub fn regularized_oscillatory_oracle(space: &FiniteEnergySpace, tau: f64, cfg: &OracleConfig) -> Result<OracleEstimate> {
    let d = space.algebra().dim;
    if d > 3 {
        return Err(Error::Domain(format!("oracle supports d ≤ 3, got {d}")));
    }
    if cfg.epsilons.len() < 2 || cfg.epsilons.windows(2).any(|w| w[1] >= w[0]) || cfg.epsilons.iter().any(|&e| e <= 0.0) {
        return Err(Error::Domain("epsilons must be a decreasing list of at least two positive values".into()));
    }
    if tau < 0.0 {
        return Err(Error::Domain("tau must be nonnegative".into()));
    }
    let gens = orthonormal_generators(space);
    let samples: Vec<(f64, CMat)> = cfg
        .epsilons
        .iter()
        .map(|&e| (e, regularized_sample(space, &gens, tau, e, cfg)))
        .collect();
    let etas: Vec<f64> = samples.iter().map(|(e, _)| e * e).collect();
    let vals: Vec<CMat> = samples.iter().map(|(_, m)| m.clone()).collect();
    let full = extrapolate_to_zero(&etas, &vals);
    let reduced = extrapolate_to_zero(&etas[1..], &vals[1..]);
    let residual = max_abs_diff(&full, &reduced);
    if residual > cfg.tol {
        return Err(Error::OracleInconclusive { residual, tol: cfg.tol });
    }
    Ok(OracleEstimate { matrix: full, residual, samples })
}

/// `‖ joint nd-dimensional integral − (single step)^n ‖_max` for the rotated Gaussian.
///
/// The joint sum runs over all `n`-tuples of tensor nodes, so keep `order^{nd}` small.
pub fn fubini_check(space: &FiniteEnergySpace, tau: f64, n_steps: usize, rule: &HermiteRule) -> f64 {
    let dim = space.total_dim;
    if tau == 0.0 || n_steps == 0 {
        return 0.0;
    }
    let d = space.algebra().dim;
    let z = Complex64::new(0.0, -1.0) * sqrt_i() * tau.sqrt();
    let gens = orthonormal_generators(space);
    let mats: Vec<(CMat, f64)> = (0..rule.order.pow(d as u32))
        .map(|flat| {
            let mut x = vec![0.0; d];
            let w = tensor_node(rule, flat, &mut x);
            let blocks: Vec<CMat> = gens.iter().map(|g| hermitian_exp(&combine(g, &x), z)).collect();
            (block_diag(space, &blocks), w)
        })
        .collect();
    let single = mats.iter().fold(CMat::zeros(dim, dim), |acc, (m, w)| acc + m * Complex64::new(*w, 0.0));
    let product = crate::linalg::matrix_power(&single, n_steps);
    let q = mats.len();
    let joint = (0..q)
        .into_par_iter()
        .map(|first| {
            let mut acc = CMat::zeros(dim, dim);
            let tail = q.pow(n_steps as u32 - 1);
            for rest in 0..tail {
                let mut m = mats[first].0.clone();
                let mut w = mats[first].1;
                let mut idx = rest;
                for _ in 1..n_steps {
                    let k = idx % q;
                    idx /= q;
                    m = m * &mats[k].0;
                    w *= mats[k].1;
                }
                acc += m * Complex64::new(w, 0.0);
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(CMat::zeros(dim, dim), |a, b| a + b);
    max_abs_diff(&joint, &product)
}

/// Orthonormal coordinates to raw algebra coordinates: `y = M x`.
pub fn frame_coordinates(space: &FiniteEnergySpace, x: &[f64]) -> DVector<f64> {
    space.algebra().orthonormal_frame() * DVector::from_row_slice(x)
}
