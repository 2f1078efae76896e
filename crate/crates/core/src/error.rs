use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, HflowError>;

#[derive(Debug, thiserror::Error)]
pub enum HflowError {
    /// The sampled immersion stopped being an immersion: det g fell to
    /// (or below) the degeneracy guard at some grid point.
    #[error("immersion degenerate at grid point ({i}, {j}): det g = {det:.6e} <= {threshold:.1e}")]
    ImmersionDegenerate {
        i: usize,
        j: usize,
        det: f64,
        threshold: f64,
    },

    /// max |A|^2 crossed the blowup guard.
    #[error("curvature blowup at grid point ({i}, {j}): |A|^2 = {value:.6e} >= {threshold:.1e}")]
    BlowupDetected {
        i: usize,
        j: usize,
        value: f64,
        threshold: f64,
    },

    /// A diagnostic that is only meaningful on the special (Lagrangian-type)
    /// class was requested for a state that is not in it.
    #[error("state is not special: max Q = {max_q:.6e} exceeds gate {gate:.1e}")]
    NotSpecial { max_q: f64, gate: f64 },

    /// A velocity evaluation produced a NaN or infinity.
    #[error("non-finite velocity at grid point ({i}, {j})")]
    NonFiniteVelocity { i: usize, j: usize },

    #[error("configuration error: {0}")]
    Config(String),

    /// Scenario-file syntax error, with a 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HflowError {
    pub fn config(msg: impl Into<String>) -> Self {
        HflowError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HflowError::Io {
            path: path.into(),
            source,
        }
    }
}
