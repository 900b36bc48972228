//! Open quantum walks on finite graphs: block operators, ergodicity,
//! hitting times, fundamental-matrix formulas and trajectory sampling.

pub mod ergodic;
pub mod error;
pub mod exec;
pub mod hitting;
pub mod mhtf;
pub mod minpoly;
pub mod model;
pub mod rational;
pub mod tensor;
pub mod trajectory;

pub use error::{OqwError, Result};
pub use exec::Execution;
pub use model::{BlockOperator, OqwModel, SiteState};
pub use tensor::{ComplexMatrix, SuperOp, Tolerances, C64};
