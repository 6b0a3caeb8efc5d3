use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AoiError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no sign change on [{lo}, {hi}] (f(lo)={f_lo:e}, f(hi)={f_hi:e})")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("{context}: no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        context: String,
        iterations: usize,
        residual: f64,
    },
    #[error("{context}: iterates exceeded the rate cap {cap:e}")]
    Divergence { context: String, cap: f64 },
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("platform index {index} out of range for {n} platforms")]
    InvalidIndex { index: usize, n: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl AoiError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        AoiError::Domain(msg.into())
    }

    /// True for failures of the numerical machinery rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            AoiError::NoBracket { .. }
                | AoiError::NoConvergence { .. }
                | AoiError::Divergence { .. }
                | AoiError::Infeasible(_)
        )
    }

    /// Attach the name of the equation system being solved.
    pub fn in_context(self, ctx: &str) -> Self {
        match self {
            AoiError::NoConvergence {
                context,
                iterations,
                residual,
            } => AoiError::NoConvergence {
                context: join(ctx, &context),
                iterations,
                residual,
            },
            AoiError::Divergence { context, cap } => AoiError::Divergence {
                context: join(ctx, &context),
                cap,
            },
            other => other,
        }
    }
}

fn join(outer: &str, inner: &str) -> String {
    if inner.is_empty() {
        outer.to_string()
    } else {
        format!("{outer}: {inner}")
    }
}

pub type Result<T> = std::result::Result<T, AoiError>;
