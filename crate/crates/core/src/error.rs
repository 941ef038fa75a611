use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("site {site} out of range for a chain of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigendecomposition failed to converge")]
    EigenDecomposition,

    #[error("finite-temperature or lossy-collection parameters need the thermal generator")]
    ThermalParameters,

    #[error(
        "positivity violated at Γt = {time}: min eigenvalue {min_eigenvalue:e} (Γdt = {dt:e}, {halvings} halvings)"
    )]
    Positivity {
        time: f64,
        min_eigenvalue: f64,
        dt: f64,
        halvings: u32,
    },

    #[error("steady state not reached: residual {residual:e} > tolerance {tolerance:e}")]
    SteadyState { residual: f64, tolerance: f64 },

    #[error("singular parameters: {0}")]
    Singular(&'static str),

    #[error("no sign change in bracket [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("every grid point failed")]
    EmptySweep,
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
