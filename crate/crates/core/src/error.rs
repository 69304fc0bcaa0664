use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("threshold fit is singular: {0}")]
    SingularFit(String),

    #[error("extrapolated threshold {intercept} V is not below the smallest swept |v_g| ({min_abs_vg} V)")]
    NonPhysicalIntercept { intercept: f64, min_abs_vg: f64 },

    #[error("v_t = {v_t} V lies outside the window [{min}, {max}] V")]
    OutOfWindow { v_t: f64, min: f64, max: f64 },

    #[error("trajectory does not span the window: {0}")]
    IncompleteTrajectory(String),

    #[error("sub-single-electron regime: n = {n:.3}")]
    SubSingleElectron { n: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e} A)")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }
}

pub(crate) fn ensure(cond: bool, name: &str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(name, reason()))
    }
}
