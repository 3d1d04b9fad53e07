//! Unitary irreps of the right regular representation, finite-energy spaces
//! built from them, multiplication operators and pointwise evaluation.
//!
//! Basis conventions: U(1) and T^d blocks use characters `e^{ik·θ}`. An SU(2)
//! spin-j block uses `√(2j+1)·D^j_{m0,m}(g)` with `D^j(exp(w·e)) = exp(-i w·J)`
//! and `m` running from `j` down to `-j`. `Su2Spin` keeps the single row
//! `m0 = j` (dimension 2j+1); `Su2Full` keeps all rows (dimension (2j+1)²) and
//! therefore contains the character `χ_j`.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use nalgebra::DVector;
use num_complex::Complex64;

use crate::algebra::LieAlgebraSpec;
use crate::cartan::{GroupElement, GroupFamily};
use crate::error::{Error, Result};
use crate::linalg::{commutator, hermitian_exp, hermitian_residual, max_abs_diff, op_norm, CMat, CVec};

const GENERATOR_TOL: f64 = 1e-12;
const COMMUTATION_TOL: f64 = 1e-10;
const CASIMIR_TOL: f64 = 1e-10;
const LAMBDA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BasisFunction {
    /// `e^{i k·θ}` on U(1) or T^d.
    Character(Vec<i64>),
    /// `√(2j+1) D^j_{row,col}` on SU(2); indices are doubled magnetic numbers.
    Wigner { two_j: u32, two_row: i32, two_col: i32 },
    /// A user-supplied basis without a pointwise formula.
    Opaque { tag: String, index: usize },
}

impl BasisFunction {
    /// Band of the function: max |k_i| for characters, 2j for Wigner coefficients.
    pub fn band(&self) -> usize {
        match self {
            BasisFunction::Character(k) => k.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0),
            BasisFunction::Wigner { two_j, .. } => *two_j as usize,
            BasisFunction::Opaque { .. } => 0,
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            BasisFunction::Character(k) => k.iter().all(|&x| x == 0),
            BasisFunction::Wigner { two_j, .. } => *two_j == 0,
            BasisFunction::Opaque { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrrepFamily {
    U1Char(i64),
    TorusChar(Vec<i64>),
    Su2Spin(u32),
    Su2Full(u32),
}

#[derive(Debug, Clone)]
pub struct Representation {
    pub algebra: Arc<LieAlgebraSpec>,
    pub block_dim: usize,
    /// Self-adjoint `X^R_a` with `π_R(exp(t X_a)) = e^{-it X^R_a}`.
    pub generators: Vec<CMat>,
    pub lambda: f64,
    pub basis_label: String,
    pub basis: Vec<BasisFunction>,
}

/// Spin-j matrices `J_x, J_y, J_z` in the basis m = j, j−1, …, −j.
pub fn spin_matrices(two_j: u32) -> [CMat; 3] {
    let n = two_j as usize + 1;
    let j = two_j as f64 / 2.0;
    let m = |i: usize| j - i as f64;
    let mut jp = CMat::zeros(n, n);
    for i in 1..n {
        // J+ |m⟩ = √(j(j+1) − m(m+1)) |m+1⟩, |m⟩ at index i, |m+1⟩ at i−1
        let mi = m(i);
        jp[(i - 1, i)] = Complex64::new((j * (j + 1.0) - mi * (mi + 1.0)).sqrt(), 0.0);
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * Complex64::new(0.5, 0.0);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    let jz = CMat::from_diagonal(&DVector::from_fn(n, |i, _| Complex64::new(m(i), 0.0)));
    [jx, jy, jz]
}

fn kron_identity_left(n: usize, a: &CMat) -> CMat {
    let m = a.nrows();
    let mut out = CMat::zeros(n * m, n * m);
    for b in 0..n {
        out.view_mut((b * m, b * m), (m, m)).copy_from(a);
    }
    out
}

impl Representation {
    /// Checks self-adjointness, the commutation relations and `Casimir = λ·I`.
    pub fn from_generators(
        algebra: Arc<LieAlgebraSpec>,
        generators: Vec<CMat>,
        basis_label: &str,
        basis: Vec<BasisFunction>,
    ) -> Result<Self> {
        let d = algebra.dim;
        if generators.len() != d {
            return Err(Error::Structural(format!("{} generators for an algebra of dimension {d}", generators.len())));
        }
        let n = generators[0].nrows();
        if generators.iter().any(|g| g.shape() != (n, n)) || basis.len() != n || n == 0 {
            return Err(Error::Structural("generators and basis must share one positive block size".into()));
        }
        let herm = generators.iter().map(hermitian_residual).fold(0.0, f64::max);
        if herm > GENERATOR_TOL {
            return Err(Error::Invariant { what: "self-adjoint generators".into(), residual: herm });
        }
        let mut comm = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let mut rhs = CMat::zeros(n, n);
                for k in 0..d {
                    let c = algebra.c(a, b, k);
                    if c != 0.0 {
                        rhs += &generators[k] * Complex64::new(0.0, c);
                    }
                }
                comm = comm.max(max_abs_diff(&commutator(&generators[a], &generators[b]), &rhs));
            }
        }
        if comm > COMMUTATION_TOL {
            return Err(Error::Invariant { what: "commutation relations".into(), residual: comm });
        }
        let cas = casimir_of(&algebra, &generators);
        let lambda = (0..n).map(|i| cas[(i, i)].re).sum::<f64>() / n as f64;
        let resid = max_abs_diff(&cas, &(CMat::identity(n, n) * Complex64::new(lambda, 0.0)));
        if resid > CASIMIR_TOL * (1.0 + lambda.abs()) {
            return Err(Error::Invariant { what: "Casimir is scalar on the block".into(), residual: resid });
        }
        Ok(Representation {
            algebra,
            block_dim: n,
            generators,
            lambda: lambda.max(0.0),
            basis_label: basis_label.to_string(),
            basis,
        })
    }

    pub fn commutation_residual(&self) -> f64 {
        let d = self.algebra.dim;
        let mut r = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let mut rhs = CMat::zeros(self.block_dim, self.block_dim);
                for k in 0..d {
                    rhs += &self.generators[k] * Complex64::new(0.0, self.algebra.c(a, b, k));
                }
                r = r.max(max_abs_diff(&commutator(&self.generators[a], &self.generators[b]), &rhs));
            }
        }
        r
    }

    pub fn casimir_residual(&self) -> f64 {
        let n = self.block_dim;
        max_abs_diff(&casimir_matrix(self), &(CMat::identity(n, n) * Complex64::new(self.lambda, 0.0)))
    }

    pub fn max_band(&self) -> usize {
        self.basis.iter().map(BasisFunction::band).max().unwrap_or(0)
    }

    /// `Σ_a y_a X^R_a` for algebra coordinates `y`.
    pub fn combination(&self, y: &[f64]) -> CMat {
        let n = self.block_dim;
        let mut h = CMat::zeros(n, n);
        for (g, &c) in self.generators.iter().zip(y) {
            if c != 0.0 {
                h += g * Complex64::new(c, 0.0);
            }
        }
        h
    }
}

fn casimir_of(algebra: &LieAlgebraSpec, generators: &[CMat]) -> CMat {
    let ginv = algebra.inverse_metric();
    let n = generators[0].nrows();
    let mut cas = CMat::zeros(n, n);
    for a in 0..algebra.dim {
        for b in 0..algebra.dim {
            let w = ginv[(a, b)];
            if w != 0.0 {
                cas += &generators[a] * &generators[b] * Complex64::new(w, 0.0);
            }
        }
    }
    cas
}

/// `Σ g^{ab} X^R_a X^R_b`.
pub fn casimir_matrix(rep: &Representation) -> CMat {
    casimir_of(&rep.algebra, &rep.generators)
}

fn is_su2(algebra: &LieAlgebraSpec) -> bool {
    let su2 = LieAlgebraSpec::su2();
    algebra.dim == 3
        && (0..3).all(|i| (0..3).all(|j| (0..3).all(|k| algebra.c(i, j, k) == su2.c(i, j, k))))
}

/// Irrep block for a built-in family on the built-in algebra with identity metric.
pub fn build_irrep(family: IrrepFamily) -> Result<Representation> {
    let algebra = match &family {
        IrrepFamily::U1Char(_) => LieAlgebraSpec::u1(),
        IrrepFamily::TorusChar(k) => LieAlgebraSpec::torus(k.len()),
        IrrepFamily::Su2Spin(_) | IrrepFamily::Su2Full(_) => LieAlgebraSpec::su2(),
    };
    build_irrep_on(Arc::new(algebra), family)
}

/// Irrep block on a given algebra; the metric enters only through λ.
pub fn build_irrep_on(algebra: Arc<LieAlgebraSpec>, family: IrrepFamily) -> Result<Representation> {
    let c1 = |x: f64| CMat::from_element(1, 1, Complex64::new(x, 0.0));
    match family {
        IrrepFamily::U1Char(k) => {
            if algebra.dim != 1 {
                return Err(Error::Structural("U(1) characters need a 1-dimensional algebra".into()));
            }
            Representation::from_generators(algebra, vec![c1(-(k as f64))], &format!("u1_char({k})"), vec![
                BasisFunction::Character(vec![k]),
            ])
        }
        IrrepFamily::TorusChar(k) => {
            if algebra.dim != k.len() || !algebra.is_abelian() {
                return Err(Error::Structural("torus characters need an abelian algebra of matching dimension".into()));
            }
            let gens = k.iter().map(|&x| c1(-(x as f64))).collect();
            Representation::from_generators(algebra, gens, &format!("torus_char({k:?})"), vec![
                BasisFunction::Character(k),
            ])
        }
        IrrepFamily::Su2Spin(two_j) => {
            if !is_su2(&algebra) {
                return Err(Error::Structural("spin blocks need su(2) structure constants".into()));
            }
            let n = two_j as i32 + 1;
            let basis = (0..n)
                .map(|i| BasisFunction::Wigner { two_j, two_row: two_j as i32, two_col: two_j as i32 - 2 * i })
                .collect();
            Representation::from_generators(algebra, spin_matrices(two_j).to_vec(), &format!("su2_spin({two_j})"), basis)
        }
        IrrepFamily::Su2Full(two_j) => {
            if !is_su2(&algebra) {
                return Err(Error::Structural("spin blocks need su(2) structure constants".into()));
            }
            let n = two_j as usize + 1;
            let gens = spin_matrices(two_j).iter().map(|j| kron_identity_left(n, j)).collect();
            let mut basis = Vec::with_capacity(n * n);
            for r in 0..n as i32 {
                for c in 0..n as i32 {
                    basis.push(BasisFunction::Wigner {
                        two_j,
                        two_row: two_j as i32 - 2 * r,
                        two_col: two_j as i32 - 2 * c,
                    });
                }
            }
            Representation::from_generators(algebra, gens, &format!("su2_full({two_j})"), basis)
        }
    }
}

/// Direct sum of blocks sharing one Casimir eigenvalue.
pub fn merge_blocks(blocks: &[Representation]) -> Result<Representation> {
    let first = blocks.first().ok_or_else(|| Error::Structural("nothing to merge".into()))?;
    if blocks.iter().any(|b| *b.algebra != *first.algebra) {
        return Err(Error::Structural("blocks use different algebras".into()));
    }
    if blocks.iter().any(|b| (b.lambda - first.lambda).abs() > LAMBDA_TOL) {
        return Err(Error::Structural("merged blocks must share λ".into()));
    }
    let n: usize = blocks.iter().map(|b| b.block_dim).sum();
    let gens = (0..first.algebra.dim)
        .map(|a| {
            let mut m = CMat::zeros(n, n);
            let mut off = 0;
            for b in blocks {
                m.view_mut((off, off), (b.block_dim, b.block_dim)).copy_from(&b.generators[a]);
                off += b.block_dim;
            }
            m
        })
        .collect();
    let label = blocks.iter().map(|b| b.basis_label.as_str()).collect::<Vec<_>>().join("+");
    let basis = blocks.iter().flat_map(|b| b.basis.iter().cloned()).collect();
    Representation::from_generators(first.algebra.clone(), gens, &label, basis)
}

#[derive(Debug, Clone)]
pub struct FiniteEnergySpace {
    pub blocks: Vec<Representation>,
    pub offsets: Vec<usize>,
    pub total_dim: usize,
    index: HashMap<BasisFunction, usize>,
}

impl PartialEq for FiniteEnergySpace {
    fn eq(&self, other: &Self) -> bool {
        self.total_dim == other.total_dim
            && self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.basis == b.basis && a.lambda == b.lambda)
    }
}

/// Sorts blocks by λ and indexes the stacked coefficient vector.
pub fn assemble_space(mut blocks: Vec<Representation>) -> Result<FiniteEnergySpace> {
    if blocks.is_empty() {
        return Err(Error::Structural("a space needs at least one block".into()));
    }
    if blocks.iter().any(|b| *b.algebra != *blocks[0].algebra) {
        return Err(Error::Structural("blocks use different algebras".into()));
    }
    blocks.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    for w in blocks.windows(2) {
        if (w[1].lambda - w[0].lambda).abs() <= LAMBDA_TOL {
            return Err(Error::DuplicateEigenvalue(w[0].lambda));
        }
    }
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut index = HashMap::new();
    let mut off = 0;
    for b in &blocks {
        offsets.push(off);
        for (i, f) in b.basis.iter().enumerate() {
            if index.insert(f.clone(), off + i).is_some() {
                return Err(Error::Structural(format!("basis function {f:?} appears twice")));
            }
        }
        off += b.block_dim;
    }
    Ok(FiniteEnergySpace { blocks, offsets, total_dim: off, index })
}

fn family_of(algebra: &LieAlgebraSpec, basis: &BasisFunction) -> Option<GroupFamily> {
    match basis {
        BasisFunction::Character(k) if k.len() == 1 => Some(GroupFamily::U1),
        BasisFunction::Character(k) => Some(GroupFamily::Torus(k.len())),
        BasisFunction::Wigner { .. } if algebra.dim == 3 => Some(GroupFamily::Su2),
        _ => None,
    }
}

fn check_su2_brackets(algebra: &LieAlgebraSpec) -> bool {
    let su2 = LieAlgebraSpec::su2();
    (0..3).all(|i| (0..3).all(|j| (0..3).all(|k| algebra.c(i, j, k) == su2.c(i, j, k))))
}

impl FiniteEnergySpace {
    /// All characters with `max |k_i| ≤ band` on U(1) (`dim = 1`) or T^d, grouped by ‖k‖².
    pub fn characters(algebra: Arc<LieAlgebraSpec>, band: usize) -> Result<Self> {
        let d = algebra.dim;
        if !algebra.is_abelian() {
            return Err(Error::Structural("characters need an abelian algebra".into()));
        }
        let b = band as i64;
        let mut ks: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..d {
            ks = ks
                .into_iter()
                .flat_map(|k| (-b..=b).map(move |x| [k.clone(), vec![x]].concat()))
                .collect();
        }
        let mut groups: std::collections::BTreeMap<i64, Vec<Representation>> = Default::default();
        for k in ks {
            let norm2 = k.iter().map(|x| x * x).sum::<i64>();
            let family = if d == 1 { IrrepFamily::U1Char(k[0]) } else { IrrepFamily::TorusChar(k) };
            groups.entry(norm2).or_default().push(build_irrep_on(algebra.clone(), family)?);
        }
        let blocks = groups.values().map(|g| merge_blocks(g)).collect::<Result<Vec<_>>>()?;
        assemble_space(blocks)
    }

    pub fn u1_band(band: usize) -> Self {
        Self::characters(Arc::new(LieAlgebraSpec::u1()), band).expect("built-in")
    }

    pub fn torus_band(d: usize, band: usize) -> Self {
        Self::characters(Arc::new(LieAlgebraSpec::torus(d)), band).expect("built-in")
    }

    /// One spin block per entry of `two_js` (row basis).
    pub fn su2_spins(two_js: &[u32]) -> Result<Self> {
        let algebra = Arc::new(LieAlgebraSpec::su2());
        assemble_space(two_js.iter().map(|&j| build_irrep_on(algebra.clone(), IrrepFamily::Su2Spin(j))).collect::<Result<_>>()?)
    }

    /// Full Wigner blocks for every `two_j` in the list.
    pub fn su2_full(two_js: &[u32]) -> Result<Self> {
        let algebra = Arc::new(LieAlgebraSpec::su2());
        assemble_space(two_js.iter().map(|&j| build_irrep_on(algebra.clone(), IrrepFamily::Su2Full(j))).collect::<Result<_>>()?)
    }

    /// Every basis function of band ≤ `band`: characters for abelian algebras,
    /// full Wigner blocks `2j ≤ band` for su(2).
    pub fn complete(algebra: Arc<LieAlgebraSpec>, band: usize) -> Result<Self> {
        if algebra.is_abelian() {
            Self::characters(algebra, band)
        } else if algebra.dim == 3 && check_su2_brackets(&algebra) {
            let js: Vec<u32> = (0..=band as u32).collect();
            Self::su2_full(&js)
        } else {
            Err(Error::Structural(format!("no built-in basis for algebra {}", algebra.name)))
        }
    }

    pub fn algebra(&self) -> &Arc<LieAlgebraSpec> {
        &self.blocks[0].algebra
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.lambda).collect()
    }

    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        self.offsets[b]..self.offsets[b] + self.blocks[b].block_dim
    }

    pub fn basis(&self) -> impl Iterator<Item = &BasisFunction> {
        self.blocks.iter().flat_map(|b| b.basis.iter())
    }

    pub fn index_of(&self, f: &BasisFunction) -> Option<usize> {
        self.index.get(f).copied()
    }

    pub fn family(&self) -> Option<GroupFamily> {
        let fams: Vec<_> = self.basis().map(|f| family_of(self.algebra(), f)).collect();
        let first = *fams.first()?;
        fams.iter().all(|f| *f == first).then_some(first).flatten()
    }

    pub fn max_band(&self) -> usize {
        self.basis().map(BasisFunction::band).max().unwrap_or(0)
    }

    /// Largest `B` such that every basis function of band ≤ `B` of this family is present.
    pub fn complete_band(&self) -> Option<usize> {
        let fam = self.family()?;
        let mut best = None;
        for b in 0..=self.max_band() {
            let have = self.basis().filter(|f| f.band() <= b).count();
            let need = match fam {
                GroupFamily::U1 | GroupFamily::Torus(_) => (2 * b + 1).pow(fam.dim() as u32),
                GroupFamily::Su2 => (0..=b).map(|j| (j + 1) * (j + 1)).sum(),
            };
            if have == need {
                best = Some(b);
            } else {
                break;
            }
        }
        best
    }

    /// Block-diagonal Casimir matrix.
    pub fn casimir_matrix(&self) -> CMat {
        let mut m = CMat::zeros(self.total_dim, self.total_dim);
        for (b, rep) in self.blocks.iter().enumerate() {
            let r = self.block_range(b);
            m.view_mut((r.start, r.start), (rep.block_dim, rep.block_dim)).copy_from(&casimir_matrix(rep));
        }
        m
    }

    /// Block-diagonal `exp(z · Σ_a y_a X^R_a)`.
    pub fn exp_combination(&self, y: &[f64], z: Complex64) -> CMat {
        let mut m = CMat::zeros(self.total_dim, self.total_dim);
        for (b, rep) in self.blocks.iter().enumerate() {
            let off = self.offsets[b];
            let e = hermitian_exp(&rep.combination(y), z);
            m.view_mut((off, off), (rep.block_dim, rep.block_dim)).copy_from(&e);
        }
        m
    }

    /// Values of every basis function at `g`.
    pub fn basis_values(&self, g: &GroupElement) -> Result<CVec> {
        let mut out = CVec::zeros(self.total_dim);
        let mut wigner_cache: HashMap<u32, CMat> = HashMap::new();
        let log = g.su2_log();
        for (i, f) in self.basis().enumerate() {
            out[i] = match (f, g) {
                (BasisFunction::Character(k), _) => {
                    let angles = g
                        .angles()
                        .filter(|a| a.len() == k.len())
                        .ok_or_else(|| Error::Domain("character evaluated on the wrong group".into()))?;
                    let phase: f64 = k.iter().zip(&angles).map(|(&kk, a)| kk as f64 * a).sum();
                    Complex64::from_polar(1.0, phase)
                }
                (BasisFunction::Wigner { two_j, two_row, two_col }, GroupElement::Su2(_)) => {
                    let d = wigner_cache.entry(*two_j).or_insert_with(|| wigner_d(*two_j, log.expect("su2 element")));
                    let r = ((*two_j as i32 - two_row) / 2) as usize;
                    let c = ((*two_j as i32 - two_col) / 2) as usize;
                    d[(r, c)] * ((*two_j + 1) as f64).sqrt()
                }
                _ => return Err(Error::Domain(format!("no pointwise formula for {f:?} at {g:?}"))),
            };
        }
        Ok(out)
    }

    /// Greatest generator operator norm times the algebra dimension.
    pub fn generator_norm_bound(&self) -> f64 {
        generator_norm_bound(self)
    }
}

/// `D^j(exp(w·e)) = exp(-i w·J)`.
pub fn wigner_d(two_j: u32, w: [f64; 3]) -> CMat {
    let js = spin_matrices(two_j);
    let n = two_j as usize + 1;
    let mut h = CMat::zeros(n, n);
    for a in 0..3 {
        h += &js[a] * Complex64::new(w[a], 0.0);
    }
    hermitian_exp(&h, Complex64::new(0.0, -1.0))
}

/// `l = d · max_{blocks, j} ‖X^R_j‖`.
pub fn generator_norm_bound(space: &FiniteEnergySpace) -> f64 {
    let d = space.algebra().dim as f64;
    d * space
        .blocks
        .iter()
        .flat_map(|b| b.generators.iter())
        .map(op_norm)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct StateVector {
    pub space: Arc<FiniteEnergySpace>,
    pub coeffs: CVec,
}

impl StateVector {
    pub fn new(space: Arc<FiniteEnergySpace>, coeffs: CVec) -> Result<Self> {
        if coeffs.len() != space.total_dim {
            return Err(Error::Structural(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                space.total_dim
            )));
        }
        Ok(StateVector { space, coeffs })
    }

    pub fn zeros(space: Arc<FiniteEnergySpace>) -> Self {
        let n = space.total_dim;
        StateVector { space, coeffs: CVec::zeros(n) }
    }

    pub fn from_entries(space: Arc<FiniteEnergySpace>, entries: &[(BasisFunction, Complex64)]) -> Result<Self> {
        let mut s = Self::zeros(space);
        for (f, c) in entries {
            let i = s
                .space
                .index_of(f)
                .ok_or_else(|| Error::Domain(format!("{f:?} is not in the space")))?;
            s.coeffs[i] += c;
        }
        Ok(s)
    }

    /// Coefficients addressed as `(block λ, index within the block)`.
    pub fn from_block_entries(space: Arc<FiniteEnergySpace>, entries: &[(f64, usize, Complex64)]) -> Result<Self> {
        let mut s = Self::zeros(space);
        for &(lambda, index, c) in entries {
            let b = s
                .space
                .blocks
                .iter()
                .position(|r| (r.lambda - lambda).abs() <= 1e-9 * lambda.abs().max(1.0))
                .ok_or_else(|| Error::Domain(format!("no block with λ = {lambda}")))?;
            let range = s.space.block_range(b);
            if index >= range.len() {
                return Err(Error::Domain(format!("index {index} outside block λ = {lambda} of size {}", range.len())));
            }
            s.coeffs[range.start + index] += c;
        }
        Ok(s)
    }

    /// The constant function 1.
    pub fn one(space: Arc<FiniteEnergySpace>) -> Result<Self> {
        let f = space
            .basis()
            .find(|f| f.is_constant())
            .cloned()
            .ok_or_else(|| Error::Domain("space has no constant function".into()))?;
        Self::from_entries(space, &[(f, Complex64::new(1.0, 0.0))])
    }

    /// Character `χ_j = Σ_m D^j_{mm}` in a space holding the full spin-j block.
    pub fn su2_character(space: Arc<FiniteEnergySpace>, two_j: u32) -> Result<Self> {
        let c = Complex64::new(1.0 / ((two_j + 1) as f64).sqrt(), 0.0);
        let entries: Vec<_> = (0..=two_j as i32)
            .map(|i| {
                let m = two_j as i32 - 2 * i;
                (BasisFunction::Wigner { two_j, two_row: m, two_col: m }, c)
            })
            .collect();
        Self::from_entries(space, &entries)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// Band of the nonzero coefficients.
    pub fn band(&self) -> usize {
        self.space
            .basis()
            .zip(self.coeffs.iter())
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(f, _)| f.band())
            .max()
            .unwrap_or(0)
    }

    /// Same function expressed in `target`; fails if a nonzero coefficient has nowhere to go.
    pub fn embed_into(&self, target: &Arc<FiniteEnergySpace>) -> Result<StateVector> {
        let mut out = StateVector::zeros(target.clone());
        for (f, c) in self.space.basis().zip(self.coeffs.iter()) {
            match target.index_of(f) {
                Some(i) => out.coeffs[i] = *c,
                None if c.norm() == 0.0 => {}
                None => return Err(Error::Domain(format!("{f:?} is missing from the target space"))),
            }
        }
        Ok(out)
    }

    /// Mass per block.
    pub fn block_norms(&self) -> Vec<f64> {
        (0..self.space.blocks.len())
            .map(|b| self.coeffs.rows_range(self.space.block_range(b)).norm())
            .collect()
    }
}

pub fn evaluate_state(state: &StateVector, point: &GroupElement) -> Result<Complex64> {
    Ok(state.space.basis_values(point)?.dot(&state.coeffs))
}

/// Normalized Haar quadrature exact for integrands of total band ≤ `exact_band`.
#[derive(Debug, Clone)]
pub struct GroupQuadrature {
    pub family: GroupFamily,
    pub points: Vec<GroupElement>,
    pub weights: Vec<f64>,
    pub exact_band: usize,
}

impl GroupQuadrature {
    /// Uniform grid with `2B+1` points.
    pub fn u1(band: usize) -> Self {
        let n = 2 * band + 1;
        GroupQuadrature {
            family: GroupFamily::U1,
            points: (0..n).map(|q| GroupElement::U1(TAU * q as f64 / n as f64)).collect(),
            weights: vec![1.0 / n as f64; n],
            exact_band: 2 * band,
        }
    }

    pub fn torus(d: usize, band: usize) -> Self {
        let n = 2 * band + 1;
        let mut points = vec![vec![]];
        for _ in 0..d {
            points = points
                .into_iter()
                .flat_map(|p| (0..n).map(move |q| [p.clone(), vec![TAU * q as f64 / n as f64]].concat()))
                .collect();
        }
        let count = points.len();
        GroupQuadrature {
            family: GroupFamily::Torus(d),
            points: points.into_iter().map(GroupElement::Torus).collect(),
            weights: vec![1.0 / count as f64; count],
            exact_band: 2 * band,
        }
    }

    /// Euler-angle product rule: uniform in α, γ ∈ [0, 4π), Gauss–Legendre in cos β.
    /// Exact for products of Wigner coefficients with Σ 2j ≤ `band`.
    pub fn su2(band: usize) -> Self {
        let n_az = band + 1;
        let n_polar = band / 2 + 2;
        let gl = GaussLegendre::new(n_polar.try_into().expect("positive order"));
        let mut points = Vec::with_capacity(n_az * n_az * n_polar);
        let mut weights = Vec::with_capacity(points.capacity());
        for (x, w) in gl.iter() {
            let beta = x.clamp(-1.0, 1.0).acos();
            for a in 0..n_az {
                for c in 0..n_az {
                    let alpha = 2.0 * TAU * a as f64 / n_az as f64;
                    let gamma = 2.0 * TAU * c as f64 / n_az as f64;
                    points.push(GroupElement::su2_from_euler(alpha, beta, gamma));
                    weights.push(w / 2.0 / (n_az * n_az) as f64);
                }
            }
        }
        GroupQuadrature { family: GroupFamily::Su2, points, weights, exact_band: band }
    }

    pub fn for_family(family: GroupFamily, band: usize) -> Self {
        match family {
            GroupFamily::U1 => Self::u1(band.div_ceil(2)),
            GroupFamily::Torus(d) => Self::torus(d, band.div_ceil(2)),
            GroupFamily::Su2 => Self::su2(band),
        }
    }

    /// Smallest built-in rule that integrates `out* · V · in` exactly.
    pub fn for_product(space_in: &FiniteEnergySpace, v: &StateVector, space_out: &FiniteEnergySpace) -> Result<Self> {
        let family = space_in
            .family()
            .ok_or_else(|| Error::Domain("space has no built-in quadrature".into()))?;
        Ok(Self::for_family(family, space_out.max_band() + v.band() + space_in.max_band()))
    }
}

/// Matrix of `ψ ↦ P_out(V·ψ)` from `space_in` to `space_out`.
pub fn multiplication_operator(
    space_in: &FiniteEnergySpace,
    v: &StateVector,
    space_out: &FiniteEnergySpace,
    quad: &GroupQuadrature,
) -> Result<CMat> {
    let required = space_out.max_band() + v.band() + space_in.max_band();
    if quad.exact_band < required {
        return Err(Error::InsufficientQuadrature { required, available: quad.exact_band });
    }
    let mut m = CMat::zeros(space_out.total_dim, space_in.total_dim);
    for (g, &w) in quad.points.iter().zip(&quad.weights) {
        let bin = space_in.basis_values(g)?;
        let bout = space_out.basis_values(g)?;
        let vg = v.space.basis_values(g)?.dot(&v.coeffs) * w;
        for c in 0..bin.len() {
            let s = bin[c] * vg;
            for r in 0..bout.len() {
                m[(r, c)] += bout[r].conj() * s;
            }
        }
    }
    Ok(m)
}

/// The product band of `V` with `space_in` must fit the closed band of `space_out`.
pub fn check_product_closure(space_in: &FiniteEnergySpace, v: &StateVector, space_out: &FiniteEnergySpace) -> Result<()> {
    let required = v.band() + space_in.max_band();
    let available = space_out.complete_band().unwrap_or(0);
    if required > available {
        return Err(Error::BandOverflow { required, available });
    }
    Ok(())
}
