use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::connection::Space;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point lies outside the open chart box of its space.
    OutsideDomain { space: Space, coords: Vec<f64> },
    /// A vector or point has the wrong number of components.
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    /// A point of the wrong space (base vs total) was supplied.
    WrongSpace { expected: Space, found: Space },
    /// An evaluator produced NaN or an infinity.
    NonFinite { what: &'static str },
    /// An integrated trajectory left the chart box at parameter `time`.
    ChartExit { time: f64 },
    /// The integration needs more steps than the configured budget.
    StepBudget { required: usize, max_steps: usize },
    /// The operation is only defined for linear connections.
    NotLinear,
    /// The operation needs the fibre to be the tangent space of the base.
    NotTangentBundle { base_dim: usize, fibre_dim: usize },
    /// Malformed bundle, box or integrator parameters.
    Invalid(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutsideDomain { space, coords } => {
                write!(f, "{space} point {coords:?} lies outside the chart box")
            }
            Error::DimensionMismatch { what, expected, found } => {
                write!(f, "{what}: expected {expected} components, found {found}")
            }
            Error::WrongSpace { expected, found } => {
                write!(f, "expected a {expected} point, got a {found} point")
            }
            Error::NonFinite { what } => write!(f, "{what} produced a non-finite value"),
            Error::ChartExit { time } => write!(f, "trajectory left the chart at t = {time}"),
            Error::StepBudget { required, max_steps } => {
                write!(f, "integration needs {required} steps, budget is {max_steps}")
            }
            Error::NotLinear => f.write_str("operation requires a linear connection"),
            Error::NotTangentBundle { base_dim, fibre_dim } => write!(
                f,
                "operation requires E = TM, got base dimension {base_dim} and fibre dimension {fibre_dim}"
            ),
            Error::Invalid(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for Error {}
