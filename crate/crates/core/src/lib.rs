//! Exact random-current enumeration, earliest-path lace machinery and
//! diagrammatic bound evaluation for the ferromagnetic Ising model on small
//! graphs and periodic boxes.

pub mod coupling_graph;
pub mod current;
pub mod lace;
pub mod error;
pub mod field;
pub mod diagram;
pub mod suite;

pub use error::{Error, Result};
