use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Caller supplied a value outside an operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no resonance: 1 - alpha*K_sin(w)/w stays positive on (0, {omega_max:.6e}] for alpha = {alpha}")]
    NoResonance { alpha: f64, omega_max: f64 },

    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),

    #[error("resonance inequality violated at omega = {omega} (slack {slack:.3e})")]
    InequalityViolated { omega: f64, slack: f64 },

    #[error("circulant embedding not positive semidefinite: clipped mass fraction {clipped_fraction:.3e}")]
    EmbeddingNotPsd { clipped_fraction: f64 },

    #[error("noise weights not admissible: {0}")]
    Divergent(String),

    #[error("truncation tail {tail:.6e} exceeds budget {budget:.6e}")]
    TailBudgetExceeded { tail: f64, budget: f64 },

    #[error("lag {lag} is not an integer multiple of the grid step {step}")]
    MisalignedLag { lag: f64, step: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoResonance { .. }
                | Error::ToleranceNotMet(_)
                | Error::InequalityViolated { .. }
                | Error::EmbeddingNotPsd { .. }
                | Error::DegenerateFit(_)
        )
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite, got {value}")))
    }
}
