use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("objects live on different grids")]
    GridMismatch,

    #[error("structural error: {0}")]
    Structural(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    /// The data violate the solvability condition `int_Omega f + int_{Omega^c} g = 0`.
    #[error("incompatible data: int_Omega f + int_(Omega^c) g = {defect:e}")]
    Infeasible { defect: f64 },

    #[error("singular resolvent: denominator {denominator:e} at shell {shell} (mu = {mu})")]
    SingularResolvent {
        mu: f64,
        shell: i32,
        denominator: f64,
    },

    #[error("size {size} exceeds the configured cap {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("internal error: {0}")]
    Internal(String),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ParameterDomain(msg.into()))
}
