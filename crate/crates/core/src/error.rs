use thiserror::Error;

/// Failures surfaced by kernel evaluation, quadrature and the oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("exp atom {index} overflows at x = {x}: alpha*x = {exponent}")]
    Range { index: usize, x: f64, exponent: f64 },

    #[error("exponent overflow in term (n={n}, k={k}{}): real part {exponent:.3} exceeds cap {cap}",
        assignment.map(|a| format!(", assignment={a}")).unwrap_or_default())]
    Overflow {
        n: usize,
        k: usize,
        assignment: Option<usize>,
        exponent: f64,
        cap: f64,
    },

    #[error("tensor simplex rule supports k <= {cap}, got k = {k}; use dirichlet_mc")]
    TensorDimension { k: usize, cap: usize },

    #[error("term (n={n}, k={k}) violates its majorant: |value| = {value:e} > {majorant:e}")]
    MajorantViolation {
        n: usize,
        k: usize,
        value: f64,
        majorant: f64,
    },

    #[error("packet reached the grid boundary at step {step}: |psi| = {amplitude:e}")]
    BoundaryContamination { step: usize, amplitude: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
