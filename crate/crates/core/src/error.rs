use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SrhError {
    #[error("config: {0}")]
    Config(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("admissibility: {0}")]
    Admissibility(String),
    #[error("positivity failed at {what} = {at}: {detail}")]
    Positivity { what: String, at: f64, detail: String },
    #[error("blowup: non-finite value at tau = {tau}")]
    Blowup { tau: f64 },
    #[error("direction (0,0) is not horizontal")]
    Direction,
    #[error("rate is not in L: residual {residual:e} > tol {tol:e}")]
    Membership { residual: f64, tol: f64 },
    #[error("singular 2x2 system (det = {det:e})")]
    Singular { det: f64 },
    #[error("series order {0} exceeds 12")]
    Order(usize),
    #[error("point at distance {dist} outside trust radius {radius}")]
    Radius { dist: f64, radius: f64 },
    #[error("resample: {0}")]
    Resample(String),
    #[error("closedness: loop residual {residual:e} > tol {tol:e}")]
    Closedness { residual: f64, tol: f64 },
    #[error("degenerate study: {0}")]
    DegenerateStudy(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
}

impl SrhError {
    /// Process exit code; 2 is reserved for usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            SrhError::Config(_) | SrhError::Parse(_) => 3,
            SrhError::Domain(_) => 4,
            SrhError::Admissibility(_) | SrhError::Positivity { .. } => 5,
            SrhError::Blowup { .. } => 6,
            SrhError::Resample(_) => 7,
            SrhError::Direction | SrhError::Membership { .. } | SrhError::Singular { .. } => 8,
            SrhError::Order(_) | SrhError::Radius { .. } => 9,
            SrhError::DegenerateStudy(_) => 10,
            SrhError::Io(_) => 11,
            SrhError::Closedness { .. } => 12,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SrhError::Config(_) => "ConfigError",
            SrhError::Domain(_) => "DomainError",
            SrhError::Admissibility(_) => "AdmissibilityError",
            SrhError::Positivity { .. } => "PositivityError",
            SrhError::Blowup { .. } => "BlowupError",
            SrhError::Direction => "DirectionError",
            SrhError::Membership { .. } => "MembershipError",
            SrhError::Singular { .. } => "SingularError",
            SrhError::Order(_) => "OrderError",
            SrhError::Radius { .. } => "RadiusError",
            SrhError::Resample(_) => "ResampleError",
            SrhError::Closedness { .. } => "ClosednessError",
            SrhError::DegenerateStudy(_) => "DegenerateStudyError",
            SrhError::Parse(_) => "ParseError",
            SrhError::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for SrhError {
    fn from(e: std::io::Error) -> Self {
        SrhError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for SrhError {
    fn from(e: serde_json::Error) -> Self {
        SrhError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SrhError>;
