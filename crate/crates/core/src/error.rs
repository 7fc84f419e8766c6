use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands: {0}")]
    GridMismatch(String),

    #[error("convective form incompatible with derivative scheme: {0}")]
    FormSchemeMismatch(String),

    #[error("invalid Butcher tableau{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    InvalidTableau { msg: String, line: Option<usize> },

    #[error("implicit stage iteration did not converge: residual {residual:.3e} after {iters} iterations")]
    ImplicitNoConvergence { residual: f64, iters: usize },

    #[error("numerical blow-up detected at t = {time:.6}, step {step}")]
    NumericalBlowup { time: f64, step: u64 },

    #[error("infeasible input: {0}")]
    Infeasible(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),
}

pub type Result<T> = std::result::Result<T, Error>;
