use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch between fields")]
    GeometryMismatch,

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("metric is not positive definite at grid point {point} (smallest pivot {pivot:e})")]
    InvalidMetric { point: usize, pivot: f64 },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("sigma index {k} out of range for dimension {n}")]
    IndexOutOfRange { k: usize, n: usize },

    #[error("eigenvalue vector {lambda:?} lies outside the cone {cone}")]
    OutsideCone { lambda: Vec<f64>, cone: String },

    #[error("cone violation at grid point {point}: eigenvalues {lambda:?} outside {cone}")]
    ConeViolation {
        point: usize,
        lambda: Vec<f64>,
        cone: String,
    },

    #[error("no admissible trial potential among {tried} candidates")]
    NoAdmissibleTrial { tried: usize },

    #[error("not a C-subsolution: margin {margin:e} at grid point {point}")]
    NotSubsolution { point: usize, margin: f64 },

    #[error("linearized system is singular or the linear solve stagnated (relative residual {residual:e} after {iterations} iterations)")]
    SingularLinearization { residual: f64, iterations: usize },

    #[error("Newton iteration did not converge at t = {t} (residual {residual:e} after {iterations} iterations)")]
    StepFailure {
        t: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("continuation failed at t = {t}: {reason}")]
    PathFailure { t: f64, reason: String },

    #[error("monitor breach at t = {t}: {monitor}")]
    MonitorBreach {
        t: f64,
        monitor: String,
        log: Vec<crate::continuity::MonitorRecord>,
    },

    #[error("inadmissible manufactured solution: {0}")]
    InadmissibleManufactured(Box<Error>),

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("config error{}: {message}", location(.key, .line))]
    Config {
        key: Option<String>,
        line: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn location(key: &Option<String>, line: &Option<usize>) -> String {
    match (key, line) {
        (Some(k), Some(l)) => format!(" (key `{k}`, line {l})"),
        (Some(k), None) => format!(" (key `{k}`)"),
        (None, Some(l)) => format!(" (line {l})"),
        (None, None) => String::new(),
    }
}
