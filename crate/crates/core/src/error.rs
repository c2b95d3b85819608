use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("obstacles {first} and {second} have clearance {clearance:.4} (required {required:.4})")]
    OverlappingObstacles {
        first: usize,
        second: usize,
        clearance: f64,
        required: f64,
    },
    #[error(
        "obstacle {index} is not strictly inside the base domain (clearance {clearance:.4}, required {required:.4})"
    )]
    ObstacleOutsideDomain {
        index: usize,
        clearance: f64,
        required: f64,
    },
    #[error("a torus table needs at least one obstacle")]
    TorusWithoutObstacle,
    #[error("invalid surface configuration: {0}")]
    InvalidSurface(String),
    #[error("unknown boundary component {0}")]
    UnknownComponent(usize),

    #[error("tangential impact (sin phi = {sin_phi:.3e})")]
    TangentialImpact { sin_phi: f64 },
    #[error("ray travelled {length:.1} without hitting the boundary")]
    MaxWrapExceeded { length: f64 },

    #[error("resolution too coarse: obstacle {index} spans {cells:.1} cells (need 10)")]
    ResolutionTooCoarse { index: usize, cells: f64 },
    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(String),
    #[error("requested {requested} eigenpairs but only {available} unknowns")]
    TooManyModes { requested: usize, available: usize },

    #[error("degenerate field: {zero_fraction:.3} of cells below the zero threshold")]
    DegenerateField { zero_fraction: f64 },
    #[error("boundary trace is identically zero")]
    AllZeroTrace,

    #[error("only {available} modes below the cut (need {required})")]
    WindowTooSmall { available: usize, required: usize },
    #[error("grid quadrature area {grid:.6} differs from the exact area {exact:.6} by more than 1%")]
    AreaMismatch { exact: f64, grid: f64 },

    #[error("archive error: {0}")]
    Archive(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
