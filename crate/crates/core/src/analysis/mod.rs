pub mod classify;
pub mod cone;
pub mod system;

pub use crate::solver::local_dimension;
