//! Extended-precision Gauss–Hermite sums for scalar blocks.
//!
//! For a character block the rotated integrand is `exp(z x c)` with
//! `|exp(z x c)|` growing like `e^{|x c|√(τ/2)}`; at `τ c² ≈ 64` the node
//! terms reach `1e7` while the result has modulus one. Nodes, weights and the
//! sum are carried at 128 bits so the tensor rule's value survives the
//! cancellation.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use astro_float::{BigFloat, Consts, RoundingMode};
use num_complex::Complex64;

use crate::oscillatory::HermiteRule;

const PREC: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

fn to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    x.to_string().parse().expect("decimal rendering of a finite float")
}

struct PreciseRule {
    nodes: Vec<BigFloat>,
    weights: Vec<BigFloat>,
    /// The same rule rounded to doubles.
    nodes_f64: Vec<f64>,
    weights_f64: Vec<f64>,
}

/// Orthonormal probabilists' Hermite values ψ_{n-1}(x), ψ_n(x) for the standard normal measure.
fn hermite_pair(x: &BigFloat, n: usize, roots: &[BigFloat]) -> (BigFloat, BigFloat, BigFloat) {
    // ψ_{k+1} = (x ψ_k − √k ψ_{k−1}) / √(k+1); also returns Σ_{k<n} ψ_k²
    let mut prev = big(0.0);
    let mut cur = big(1.0);
    let mut sumsq = big(1.0);
    for k in 0..n {
        let t = x.mul(&cur, PREC, RM).sub(&roots[k].mul(&prev, PREC, RM), PREC, RM);
        let next = t.div(&roots[k + 1], PREC, RM);
        prev = cur;
        cur = next;
        if k + 1 < n {
            sumsq = sumsq.add(&cur.mul(&cur, PREC, RM), PREC, RM);
        }
    }
    (prev, cur, sumsq)
}

fn build(order: usize) -> PreciseRule {
    let start = HermiteRule::new(order);
    let roots: Vec<BigFloat> = (0..=order)
        .map(|k| big(k as f64).sqrt(PREC, RM))
        .collect();
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for &x0 in &start.nodes {
        let mut x = big(x0);
        // Newton on ψ_n with ψ_n' = √n ψ_{n-1}; the f64 start is within 1e-13
        for _ in 0..4 {
            let (pm1, pn, _) = hermite_pair(&x, order, &roots);
            if pm1.is_zero() {
                break;
            }
            let step = pn.div(&roots[order].mul(&pm1, PREC, RM), PREC, RM);
            x = x.sub(&step, PREC, RM);
        }
        let (_, _, sumsq) = hermite_pair(&x, order, &roots);
        weights.push(big(1.0).div(&sumsq, PREC, RM));
        nodes.push(x);
    }
    let nodes_f64 = nodes.iter().map(to_f64).collect();
    let weights_f64 = weights.iter().map(to_f64).collect();
    PreciseRule { nodes, weights, nodes_f64, weights_f64 }
}

fn rule(order: usize) -> std::sync::Arc<PreciseRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, std::sync::Arc<PreciseRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.lock().expect("rule cache").get(&order) {
        return r.clone();
    }
    let r = std::sync::Arc::new(build(order));
    cache.lock().expect("rule cache").insert(order, r.clone());
    r
}

/// Below this value of `τc²/4` (the log of the cancellation factor) doubles suffice.
const CANCELLATION_LOG: f64 = 7.0;

/// `Σ_i w_i exp(e^{-iπ/4} √τ · c · x_i)`, the Gauss–Hermite value of
/// `E[exp(-i e^{iπ/4} √τ c X)]` for a standard normal `X`.
pub fn rotated_scalar_sum(rule_f64: &HermiteRule, tau: f64, c: f64) -> Complex64 {
    if c == 0.0 || tau == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let a = (tau / 2.0).sqrt() * c;
    if tau * c * c / 4.0 < CANCELLATION_LOG {
        let r = rule(rule_f64.order);
        return r
            .nodes_f64
            .iter()
            .zip(&r.weights_f64)
            .map(|(&x, &w)| Complex64::new(a * x, -a * x).exp() * w)
            .sum();
    }
    static MEMO: OnceLock<Mutex<HashMap<(usize, u64), Complex64>>> = OnceLock::new();
    let memo = MEMO.get_or_init(Default::default);
    let key = (rule_f64.order, a.abs().to_bits());
    if let Some(v) = memo.lock().expect("sum memo").get(&key) {
        return *v;
    }
    let v = precise_sum(rule_f64, a.abs());
    memo.lock().expect("sum memo").insert(key, v);
    v
}

/// The sum at 192 bits, pairing the symmetric nodes `±x`:
/// `e^{a(1−i)x} + e^{−a(1−i)x} = 2cosh(ax)cos(ax) − 2i sinh(ax)sin(ax)`.
fn precise_sum(rule_f64: &HermiteRule, a: f64) -> Complex64 {
    let r = rule(rule_f64.order);
    let mut consts = Consts::new().expect("constant cache");
    let a = big(a);
    let mut re = big(0.0);
    let mut im = big(0.0);
    // the extended rule keeps the node order of the double one
    for ((x, w), &x0) in r.nodes.iter().zip(&r.weights).zip(&rule_f64.nodes) {
        if x0 < -1e-8 {
            continue;
        }
        if x0.abs() <= 1e-8 {
            re = re.add(w, PREC, RM);
            continue;
        }
        let arg = a.mul(x, PREC, RM);
        let up = arg.exp(PREC, RM, &mut consts);
        let down = big(1.0).div(&up, PREC, RM);
        let cs = arg.cos(PREC, RM, &mut consts);
        let sn = arg.sin(PREC, RM, &mut consts);
        re = re.add(&up.add(&down, PREC, RM).mul(&cs, PREC, RM).mul(w, PREC, RM), PREC, RM);
        im = im.sub(&up.sub(&down, PREC, RM).mul(&sn, PREC, RM).mul(w, PREC, RM), PREC, RM);
    }
    Complex64::new(to_f64(&re), to_f64(&im))
}

/// Extended-precision weights sum and second moment, for rule sanity checks.
#[cfg(test)]
pub fn rule_moments(order: usize) -> (f64, f64) {
    let r = rule(order);
    let mut m0 = big(0.0);
    let mut m2 = big(0.0);
    for (x, w) in r.nodes.iter().zip(&r.weights) {
        m0 = m0.add(w, PREC, RM);
        m2 = m2.add(&w.mul(&x.mul(x, PREC, RM), PREC, RM), PREC, RM);
    }
    (to_f64(&m0), to_f64(&m2))
}
