use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Class of null mode detected when a reduced system turns out singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullMode {
    /// A rigid translation of the displacement unknowns is unconstrained.
    RigidTranslation,
    /// An in-plane rigid rotation is unconstrained.
    RigidRotation,
    /// A scalar field has no constraint fixing its mean.
    UnconstrainedMean,
    /// Singular, but not along any rigid/constant mode that was probed.
    Unknown,
}

impl fmt::Display for NullMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NullMode::RigidTranslation => "rigid translation",
            NullMode::RigidRotation => "rigid rotation",
            NullMode::UnconstrainedMean => "unconstrained mean",
            NullMode::Unknown => "unclassified null mode",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its physical or structural precondition.
    InvalidParameter { name: &'static str, reason: &'static str },
    /// The inclusion of the requested volume fraction does not fit in the cell.
    InclusionOutsideCell { fraction: f64 },
    /// Mesh subdivision count below the minimum (or wrong parity).
    MeshTooCoarse { required: &'static str },
    /// The notch tip does not fall on a vertical mesh line.
    NotchTipOffGrid { tip_x1: f64 },
    /// Element connectivity references a node that does not exist.
    IndexOutOfRange { index: usize, len: usize },
    NonPositiveJacobian { element: usize, det: f64 },
    PointOutsideDomain { x1: f64, x2: f64 },
    /// The point lies on a crack seam where the side is ambiguous.
    PointOnSeam { x1: f64, x2: f64 },
    /// A DOF was both prescribed and tied to a master, or similar misuse.
    ConstraintConflict { dof: usize },
    MissingNodeSet(&'static str),
    SingularSystem { equation: usize, mode: NullMode },
    /// The linear solve did not meet the residual contract.
    InaccurateSolve { relative_residual: f64 },
    DamageOutOfRange(f64),
    /// Two objects that must agree (mesh, correctors, tables) do not.
    Mismatch(&'static str),
    NewtonNotConverged { delta: f64, iterations: usize, relative_residual: f64 },
    /// Parse failure of a textual quantity (fraction, enum keyword, ...).
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::InclusionOutsideCell { fraction } => {
                write!(f, "inclusion with volume fraction {fraction} does not fit inside the unit cell")
            }
            Error::MeshTooCoarse { required } => write!(f, "mesh subdivision invalid: {required}"),
            Error::NotchTipOffGrid { tip_x1 } => {
                write!(f, "notch tip x1={tip_x1} is not on a vertical mesh line")
            }
            Error::IndexOutOfRange { index, len } => write!(f, "index {index} out of range (len {len})"),
            Error::NonPositiveJacobian { element, det } => {
                write!(f, "element {element} has non-positive Jacobian determinant {det}")
            }
            Error::PointOutsideDomain { x1, x2 } => write!(f, "point ({x1}, {x2}) is outside the mesh"),
            Error::PointOnSeam { x1, x2 } => {
                write!(f, "point ({x1}, {x2}) lies on the notch seam; offset it to pick a side")
            }
            Error::ConstraintConflict { dof } => {
                write!(f, "dof {dof} cannot be both prescribed and a periodic slave")
            }
            Error::MissingNodeSet(name) => write!(f, "mesh has no '{name}' node set"),
            Error::SingularSystem { equation, mode } => {
                write!(f, "singular reduced system at equation {equation} ({mode})")
            }
            Error::InaccurateSolve { relative_residual } => {
                write!(f, "linear solve residual {relative_residual:e} exceeds tolerance")
            }
            Error::DamageOutOfRange(d) => write!(f, "damage {d} outside [0, 1]"),
            Error::Mismatch(what) => write!(f, "mismatch: {what}"),
            Error::NewtonNotConverged { delta, iterations, relative_residual } => write!(
                f,
                "Newton iteration did not converge at delta={delta} after {iterations} iterations \
                 (relative residual {relative_residual:e})"
            ),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
