use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("covariance matrix is not symmetric (max |V - V^T| = {max_asymmetry:e})")]
    Asymmetric { max_asymmetry: f64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("state violates the uncertainty principle (min eigenvalue of V + i*Sigma = {margin:e})")]
    Nonphysical { margin: f64 },

    #[error("covariance matrix is singular (det = {det:e})")]
    SingularCovariance { det: f64 },

    #[error("homodyne coefficients are not attainable by a physical state: {reason}")]
    UnattainableCoefficients { reason: String },

    #[error("carrier extinguished at detuning {detuning} (|r| = {magnitude:e})")]
    CarrierExtinguished { detuning: f64, magnitude: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("design matrix rank {rank} < {expected}; unresolved directions: {}", unresolved.join("; "))]
    RankDeficient {
        rank: usize,
        expected: usize,
        unresolved: Vec<String>,
    },

    #[error("curves are not comparable: {0}")]
    Mismatch(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// True for failures that come from the numerics (rank, physicality,
    /// extinguished carrier) rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Nonphysical { .. }
                | Error::SingularCovariance { .. }
                | Error::UnattainableCoefficients { .. }
                | Error::CarrierExtinguished { .. }
                | Error::RankDeficient { .. }
        )
    }
}
