pub mod algebroid;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod forms;
pub mod hamiltonian;
pub mod integrator;
pub mod kvector;
pub mod lagrangian;
pub mod linalg;
pub mod models;
pub mod skinner_rusk;
pub mod tolerances;
pub mod tulczyjew;

pub use error::{FieldError, Result};
pub use expr::{CoordRole, ScalarField, SymbolTable};
