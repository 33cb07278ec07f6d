use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // geometry
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("grid spacing {h} leaves no interior node")]
    EmptyGrid { h: f64 },
    #[error("cut fraction {fraction:e} at node ({x}, {y}) is below the floor {floor:e}")]
    DegenerateCut {
        x: f64,
        y: f64,
        fraction: f64,
        floor: f64,
    },
    #[error("grid function belongs to a different grid (expected {expected} nodes, got {found})")]
    GridMismatch { expected: usize, found: usize },

    // operator
    #[error("operator is not uniformly elliptic at ({x}, {y}): smallest eigenvalue {min_eigenvalue}")]
    NotElliptic {
        x: f64,
        y: f64,
        min_eigenvalue: f64,
    },
    #[error("diffusion matrix is not symmetric at ({x}, {y}): a12 = {a12}, a21 = {a21}")]
    AsymmetricDiffusion { x: f64, y: f64, a12: f64, a21: f64 },
    #[error("reaction coefficient is negative at ({x}, {y}): {value}")]
    NegativeReaction { x: f64, y: f64, value: f64 },
    #[error("invalid boundary operator: {0}")]
    InvalidBoundary(String),
    #[error("assembled matrix violates the M-matrix sign pattern ({count} entries)")]
    SignPatternViolation { count: usize },

    // linear algebra
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },
    #[error("zero pivot in row {row} of the band factorization")]
    SingularMatrix { row: usize },

    // spectral
    #[error("power iteration did not converge in {max_iter} iterations (residual {residual:e})")]
    NoConvergence { max_iter: usize, residual: f64 },
    #[error("operator produced a negative value {value:e} from a positive input")]
    NotPositiveOperator { value: f64 },
    #[error("input is identically zero")]
    ZeroInput,

    // expressions
    #[error("syntax error at byte {position}: {message}")]
    SyntaxError { position: usize, message: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("`{0}` is not bound in the evaluation environment")]
    UnboundName(String),
    #[error("{op} is undefined at {arg}")]
    EvalDomainError { op: String, arg: f64 },

    // functionals
    #[error("nonlinearity is negative ({value}) at x = ({x}, {y}), u = {u:?}")]
    NegativeNonlinearity {
        value: f64,
        x: f64,
        y: f64,
        u: Vec<f64>,
    },
    #[error("functional evaluated to a negative value {0}")]
    NegativeFunctionalValue(f64),
    #[error("point ({0}, {1}) is not inside the domain")]
    PointOutsideDomain(f64, f64),
    #[error("invalid functional: {0}")]
    InvalidFunctional(String),
    #[error("bound violated: {0}")]
    BoundViolated(String),
    #[error("evaluation failed at node ({x}, {y}): {source}")]
    AtNode {
        x: f64,
        y: f64,
        #[source]
        source: Box<Error>,
    },

    // fixed point and certificates
    #[error("component {component} leaves the order box at node ({x}, {y}): value {value}")]
    OutOfBox {
        component: usize,
        x: f64,
        y: f64,
        value: f64,
    },
    #[error("missing constant: {0}")]
    MissingConstant(String),
    #[error("linear bounds were not verified for component {0}")]
    BoundsNotVerified(usize),

    // problem files
    #[error("schema error at {pointer}: {message}")]
    SchemaError { pointer: String, message: String },
    #[error("validation error at {pointer}: {message}")]
    ValidationError { pointer: String, message: String },
}

impl Error {
    pub(crate) fn at_node(self, p: [f64; 2]) -> Self {
        match self {
            e @ Error::AtNode { .. } => e,
            e => Error::AtNode {
                x: p[0],
                y: p[1],
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn validation(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ValidationError {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
