use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invariant `{what}` violated (residual {residual:.3e})")]
    Invariant { what: String, residual: f64 },
    #[error("duplicate Casimir eigenvalue {0}; merge the blocks first")]
    DuplicateEigenvalue(f64),
    #[error("quadrature exact to band {available}, product needs {required}")]
    InsufficientQuadrature { required: usize, available: usize },
    #[error("quadrature did not converge: last refinement changed the result by {change:.3e}")]
    Accuracy { change: f64 },
    #[error("oscillatory oracle inconclusive: extrapolation residual {residual:.3e} exceeds {tol:.3e}")]
    OracleInconclusive { residual: f64, tol: f64 },
    #[error("metric is not bi-invariant (residual {0:.3e})")]
    NotBiInvariant(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("space too small: product band {required} exceeds closed band {available}; enlarge the space")]
    BandOverflow { required: usize, available: usize },
    #[error("Dyson routes disagree at order {m}: gap {gap:.3e}")]
    RouteDisagreement { m: usize, gap: f64 },
    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
