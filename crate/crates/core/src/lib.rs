//! High-girth Steiner triple systems: girth and Erdős-configuration
//! machinery, weight systems, absorber gadgets, regularization, the
//! high-girth triple process and the cover-down pipeline.

pub mod coverdown;
pub mod error;
pub mod format;
pub mod gadgets;
pub mod graph;
pub mod process;
pub mod regularization;
pub mod rng;
pub mod scalar;
pub mod triples;
pub mod weights;

pub use error::{Error, Result};
pub use graph::Graph;
pub use triples::{Edge, Triple, TripleSystem, Vertex};

/// Weight systems over floating point and over exact rationals.
pub type WeightSystemF64 = weights::WeightSystem<f64>;
pub type WeightSystemQ = weights::WeightSystem<num_rational::Ratio<i64>>;
pub use process::TrajectoryF64;
