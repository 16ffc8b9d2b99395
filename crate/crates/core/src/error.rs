use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("bracket word must contain at least one index")]
    EmptyWord,

    #[error("generator index {index} out of range 1..={generators}")]
    InvalidIndex { index: usize, generators: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A trajectory left the domain box.
    #[error("trajectory left the domain at flow time {time:.6e}{}{}", fmt_atom(*atom), fmt_factor(*factor))]
    DomainEscape {
        time: f64,
        point: Vec<f64>,
        atom: Option<usize>,
        factor: Option<usize>,
    },

    #[error("integration step {step:.3e} underflowed at flow time {time:.6e}")]
    StepUnderflow { time: f64, step: f64 },

    #[error("schedule undefined at t = {t} (offset {offset}){}", fmt_atom(*atom))]
    ScheduleDomain {
        t: f64,
        offset: f64,
        atom: Option<usize>,
    },

    #[error("only {found} independent bracket fields found, {needed} required")]
    FrameDeficient { found: usize, needed: usize },

    #[error("endpoint Jacobian is singular (smallest singular value {sigma_min:.3e})")]
    SingularJacobian { sigma_min: f64 },

    #[error("Lipschitz sampling did not stabilize after {rounds} rounds")]
    BudgetExceeded { rounds: usize },

    #[error("Newton iteration did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Newton step pinned to the parameter hypercube boundary (residual {residual:.3e})")]
    HypercubeExhausted { residual: f64 },

    #[error("target is off the leaf through the base point (transverse residual {transverse:.3e})")]
    LeafMismatch { transverse: f64 },

    #[error("waypoint chaining stalled: radius {radius:.3e} below minimum with {remaining:.3e} left")]
    Stalled { radius: f64, remaining: f64 },

    #[error("re-integrated path misses its target by {error:.3e} (tolerance {tol:.1e})")]
    EndpointMismatch { error: f64, tol: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_atom(atom: Option<usize>) -> String {
    atom.map(|a| format!(" (atom {a})")).unwrap_or_default()
}

fn fmt_factor(factor: Option<usize>) -> String {
    factor.map(|f| format!(" (factor {f})")).unwrap_or_default()
}

impl Error {
    /// Tags integration errors with the index of the flow atom that raised them.
    pub(crate) fn at_atom(self, index: usize) -> Self {
        match self {
            Error::DomainEscape {
                time,
                point,
                factor,
                ..
            } => Error::DomainEscape {
                time,
                point,
                atom: Some(index),
                factor,
            },
            Error::ScheduleDomain { t, offset, .. } => Error::ScheduleDomain {
                t,
                offset,
                atom: Some(index),
            },
            other => other,
        }
    }

    pub(crate) fn at_factor(self, index: usize) -> Self {
        match self {
            Error::DomainEscape {
                time, point, atom, ..
            } => Error::DomainEscape {
                time,
                point,
                atom,
                factor: Some(index),
            },
            other => other,
        }
    }
}
