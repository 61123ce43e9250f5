use thiserror::Error;

/// Errors raised by the geometry kernel.
///
/// Variants are grouped by the stage that raises them; [`Error::stage`] maps
/// each one onto the pipeline stage used for CLI exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // algebra
    #[error("empty subspace")]
    EmptySubspace,
    #[error("basis vectors are linearly dependent (rank {rank} < {len})")]
    DependentBasis { rank: usize, len: usize },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    // space forms
    #[error("unsupported frame: {0}")]
    UnsupportedFrame(String),
    #[error("zero radius: use lift_point")]
    ZeroRadius,
    #[error("plane normal is not a unit vector (|n| = {0})")]
    NonUnitNormal(f64),
    #[error("point at infinity")]
    PointAtInfinity,
    #[error("not a point sphere")]
    NotPointSphere,
    #[error("invalid space form frame: {0}")]
    InvalidFrame(String),

    // curves
    #[error("degenerate sampling: {0}")]
    DegenerateSampling(String),
    #[error("curve not transversal to space form slice at sample {0}")]
    NotTransversal(usize),
    #[error("invalid Legendre curve: {0}")]
    InvalidCurve(String),

    // elastica
    #[error("invalid elastica parameters: {0}")]
    InvalidParams(String),
    #[error("solution escaped at s={0}")]
    SolutionEscaped(f64),
    #[error("initial frame violates incidence relations (defect {0:e})")]
    InvalidInitialFrame(f64),
    #[error("curve is not orthogonal to the ambient line (residual {0:e})")]
    NotInSlice(f64),

    // evolution
    #[error("invalid complex curve: {0}")]
    InvalidComplex(String),
    #[error("non-unit section at sample {0}")]
    NonUnitSection(usize),
    #[error("integration lost the group (defect {0:e})")]
    LostGroup(f64),
    #[error("curve is not orthogonal to the initial complex (residual {0:e})")]
    CurveNotInComplex(f64),
    #[error("degenerate evolution: no surface")]
    DegenerateEvolution,
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    // analysis
    #[error("reparametrize input: grid is not curvature-line aligned (misalignment {0:e})")]
    NotCurvatureAligned(f64),
    #[error("channel surface: special lifts undefined (family {0})")]
    ChannelSurface(u8),
    #[error("regularity violated: {0}")]
    RegularityViolated(String),
    #[error("umbilic surface: {0}")]
    Umbilic(String),

    // ribaucour
    #[error("tangential choice: transform degenerates at sample {0}")]
    TangentialChoice(usize),
    #[error("complex membership violated: {0}")]
    ComplexMembership(String),
    #[error("curves coincide")]
    CurvesCoincide,
    #[error("curves do not meet in a single sphere at sample {0}")]
    NoCommonSphere(usize),

    // io
    #[error("io error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
}

/// Pipeline stage an error belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Solver,
    Evolution,
    Analysis,
    Ribaucour,
}

impl Error {
    pub fn stage(&self) -> Stage {
        use Error::*;
        match self {
            InvalidParams(_) | SolutionEscaped(_) | InvalidInitialFrame(_) | NotInSlice(_) => Stage::Solver,
            InvalidComplex(_) | NonUnitSection(_) | LostGroup(_) | CurveNotInComplex(_) | DegenerateEvolution
            | IncompatibleGrids(_) => Stage::Evolution,
            NotCurvatureAligned(_) | ChannelSurface(_) | RegularityViolated(_) | Umbilic(_) => Stage::Analysis,
            TangentialChoice(_) | ComplexMembership(_) | CurvesCoincide | NoCommonSphere(_) => Stage::Ribaucour,
            _ => Stage::Config,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
