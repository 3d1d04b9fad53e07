//! Parsing of group references, representation requests, points and coefficient files.

use std::path::Path;
use std::sync::Arc;

use lie_feynman::algebra::LieAlgebraSpec;
use lie_feynman::cartan::{GroupElement, GroupFamily};
use lie_feynman::representation::{FiniteEnergySpace, StateVector};
use num_complex::Complex64;
use serde::Deserialize;

use crate::Failure;

/// Built-in name (`u1`, `torus:<d>`, `su2`) or a TOML algebra file.
pub fn load_algebra(group: &str) -> Result<LieAlgebraSpec, Failure> {
    if let Some(spec) = LieAlgebraSpec::builtin(group) {
        return Ok(spec);
    }
    let path = Path::new(group);
    if !path.exists() {
        return Err(Failure::Usage(format!("unknown group `{group}`: not a built-in name or an existing file")));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{group}: {e}")))?;
    LieAlgebraSpec::from_toml_str(&text).map_err(|e| Failure::from_lib(e).context(group))
}

/// `k<=B` or `band:B` (all functions up to band B), `spin:1,2,4` (row blocks by 2j),
/// `full:0,1` (full Wigner blocks by 2j).
pub fn build_space(group: &str, reps: &str) -> Result<Arc<FiniteEnergySpace>, Failure> {
    let algebra = Arc::new(load_algebra(group)?);
    let reps = reps.trim();
    let space = if let Some(b) = reps.strip_prefix("k<=").or_else(|| reps.strip_prefix("band:")) {
        let band = parse_usize(b, "band")?;
        FiniteEnergySpace::complete(algebra, band)
    } else if let Some(list) = reps.strip_prefix("spin:").or_else(|| reps.strip_prefix("su2_spin:")) {
        require_su2(&algebra)?;
        FiniteEnergySpace::su2_spins(&parse_list::<u32>(list, "2j")?)
    } else if let Some(list) = reps.strip_prefix("full:") {
        require_su2(&algebra)?;
        FiniteEnergySpace::su2_full(&parse_list::<u32>(list, "2j")?)
    } else {
        return Err(Failure::Usage(format!("cannot read representation request `{reps}`")));
    };
    space.map(Arc::new).map_err(Failure::from_lib)
}

pub fn band_space(group: &str, band: usize) -> Result<Arc<FiniteEnergySpace>, Failure> {
    let algebra = Arc::new(load_algebra(group)?);
    FiniteEnergySpace::complete(algebra, band).map(Arc::new).map_err(Failure::from_lib)
}

fn require_su2(algebra: &LieAlgebraSpec) -> Result<(), Failure> {
    if algebra.dim == 3 && !algebra.is_abelian() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("spin blocks need su2, got {}", algebra.name)))
    }
}

fn parse_usize(s: &str, what: &str) -> Result<usize, Failure> {
    s.trim().parse().map_err(|_| Failure::Usage(format!("bad {what} `{s}`")))
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|_| Failure::Usage(format!("bad {what} `{p}`"))))
        .collect()
}

/// Angle for U(1), angle list for T^d, Euler angles `α,β,γ` for SU(2).
pub fn parse_point(family: GroupFamily, s: &str) -> Result<GroupElement, Failure> {
    let xs: Vec<f64> = parse_list(s, "coordinate")?;
    let want = match family {
        GroupFamily::U1 => 1,
        GroupFamily::Torus(d) => d,
        GroupFamily::Su2 => 3,
    };
    if xs.len() != want {
        return Err(Failure::Usage(format!("point needs {want} coordinates, got {}", xs.len())));
    }
    Ok(match family {
        GroupFamily::U1 => GroupElement::U1(xs[0]),
        GroupFamily::Torus(_) => GroupElement::Torus(xs),
        GroupFamily::Su2 => GroupElement::su2_from_euler(xs[0], xs[1], xs[2]),
    })
}

#[derive(Debug, Deserialize)]
struct CoefficientRow {
    block_lambda: f64,
    index: usize,
    re: f64,
    im: f64,
}

/// Sparse state file: CSV with header `block_lambda,index,re,im`, `#` comments allowed.
pub fn load_state(path: &str, space: &Arc<FiniteEnergySpace>) -> Result<StateVector, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
    let mut entries = Vec::new();
    for row in reader.deserialize::<CoefficientRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Failure::Usage(format!("{path}: line {line}: {e}"))
        })?;
        entries.push((row.block_lambda, row.index, Complex64::new(row.re, row.im)));
    }
    StateVector::from_block_entries(space.clone(), &entries).map_err(|e| Failure::from_lib(e).context(path))
}
