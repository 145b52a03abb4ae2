use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone)]
pub enum Error {
    /// Invalid parameter passed to a constructor or generator.
    Parameter(String),
    /// Mesh validation failure (orientation, connectivity, boundary loop).
    Validation(String),
    /// Geometry failure (degenerate edge, inverted element).
    Geometry(String),
    /// Element inversion during deformation; carries the smallest signed area.
    Inversion { min_area: f64 },
    /// Assembly rejected its coefficient data.
    Assembly(String),
    /// Problem data violates its assumptions (e.g. non-positive friction bound).
    Data(String),
    /// Two fields/meshes that must match do not.
    MeshMismatch(String),
    /// Iterative linear solver failed to converge; carries the final residual.
    Solver { residual: f64, iterations: usize },
    /// Variational-inequality solver failed (cycling, maxit).
    ViSolver(String),
    /// Configuration file problem; names the offending key.
    Config(String),
    /// File I/O, with the path involved.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(m) => write!(f, "invalid parameter: {m}"),
            Error::Validation(m) => write!(f, "mesh validation failed: {m}"),
            Error::Geometry(m) => write!(f, "geometry error: {m}"),
            Error::Inversion { min_area } => {
                write!(f, "element inversion: smallest signed area {min_area:e}")
            }
            Error::Assembly(m) => write!(f, "assembly error: {m}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::MeshMismatch(m) => write!(f, "mesh mismatch: {m}"),
            Error::Solver { residual, iterations } => write!(
                f,
                "linear solver did not converge: residual {residual:e} after {iterations} iterations"
            ),
            Error::ViSolver(m) => write!(f, "variational inequality solver failed: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
