//! Exact optimal experimental designs for minimax criteria via
//! mixed-integer linear programming.

pub mod bnb;
pub mod bounds;
pub mod error;
pub mod export;
pub mod heuristic;
pub mod io;
pub mod linalg;
pub mod milp;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod pipeline;

pub use error::{OptexError, Result};
pub use linalg::{DenseMatrix, SymMatrix};
pub use model::{
    criterion_value, design_value, info_matrix, psi_value, ApproximateDesign, CriterionKind, CriterionSpec,
    DesignProblem, ExactDesign,
};
pub use bounds::CovBounds;
pub use milp::{ExtraConstraint, MilpModel, Sense};
