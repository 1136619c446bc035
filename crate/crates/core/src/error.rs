use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("inverted element: cell {cell} has non-positive Jacobian det {det:.3e}")]
    InvertedElement { cell: usize, det: f64 },

    #[error("invalid kinematics: J = {j:.6e} <= 0")]
    InvalidKinematics { j: f64 },

    #[error("porosity closure failed at J = {j:.6e}, p = {p:.6e}: {reason}")]
    PorosityClosure { j: f64, p: f64, reason: String },

    #[error("invalid porosity state: J*phi = {jphi:.6e} outside (0, 1)")]
    InvalidPorosity { jphi: f64 },

    #[error("cell {cell} is intersected but carries no cut-cell quadrature")]
    MissingCutRule { cell: usize },

    #[error("unsupported cut: interface crosses cell {cell} {crossings} times")]
    UnsupportedCut { cell: usize, crossings: usize },

    #[error("degenerate interface geometry: {0}")]
    DegenerateGeometry(String),

    #[error("assembly error in {module}: {source}")]
    Assembly {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("linear solve failed; null-space suspect field block: {suspect}")]
    SingularSystem { suspect: String },

    #[error(
        "no convergence in step {step} (t = {time:.6e}): |R| = {residual:.3e} after {iterations} iterations, active-set history {active_history:?}"
    )]
    Nonconvergence {
        step: usize,
        time: f64,
        residual: f64,
        iterations: usize,
        active_history: Vec<usize>,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("unknown boundary tag: {0}")]
    UnknownTag(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl Error {
    pub fn in_module(self, module: &'static str) -> Self {
        Error::Assembly {
            module,
            source: Box::new(self),
        }
    }

    /// Process exit code category for the CLI: 2 config/validation,
    /// 3 convergence, 4 i/o, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownTag(_) | Error::Parse { .. } => 2,
            Error::Nonconvergence { .. } | Error::SingularSystem { .. } => 3,
            Error::Io { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}
