use thiserror::Error;

/// Errors raised by the library. Variants are named after the failing condition.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("kernel evaluated at the origin")]
    ZeroPoint,
    #[error("derivative order {requested} exceeds available order {available}")]
    OrderUnavailable { requested: usize, available: usize },
    #[error("kernel value {value} is not positive at {point:?}")]
    NonpositiveKernel { point: Vec<f64>, value: f64 },
    #[error("quadrature failed in {context}: error estimate {estimate:e} above tolerance {tolerance:e}")]
    QuadratureFailure {
        context: String,
        estimate: f64,
        tolerance: f64,
    },
    #[error("operation requires a radial kernel")]
    NotRadial,
    #[error("unsupported ambient dimension {0}")]
    UnsupportedDimension(usize),
    #[error("scale sequence violates a_(i+1) <= a_i^2/b_i at index {index}: {detail}")]
    ScaleViolation { index: usize, detail: String },
    #[error("bad generator spec: {0}")]
    BadSpec(String),
    #[error("scale {scale:e} outside trusted range [{lo:e}, {hi:e}]")]
    ScaleOutOfRange { scale: f64, lo: f64, hi: f64 },
    #[error("cone is empty at every stratum")]
    EmptyCone,
    #[error("point at distance {delta:e} from the support is inside the guard band {guard:e}")]
    TooCloseToSupport { delta: f64, guard: f64 },
    #[error("tail correction requested but the measure has no tail model")]
    TailUnavailable,
    #[error("kernel has no limit at infinity; tail model invalid")]
    TailModelInvalid,
    #[error("integrand tail is not integrable")]
    DivergentTail,
    #[error("measure mass {mass:e} in the ball is below the fitting threshold")]
    DegenerateFit { mass: f64 },
    #[error("smallest singular value {smallest:e} exceeds 1e-6 times the largest {largest:e}")]
    DegenerateNullSpace { smallest: f64, largest: f64 },
    #[error("decay budget exceeded at level {level}: {value:e} > {budget:e}")]
    BudgetViolation { level: usize, value: f64, budget: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
