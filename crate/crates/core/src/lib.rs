//! Composite likelihood estimation and information-bias diagnostics.

pub mod asymptotics;
pub mod composite;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod models;
pub mod montecarlo;
pub mod params;
pub mod rng;
pub mod stats;
pub mod verify;

pub use composite::{CompositeSpec, EstimatingFunction, InfoTriple};
pub use error::{Error, Result};
pub use linalg::{loewner_geq, Matrix, SymMatrix};
pub use models::{Dataset, ModelSpec, Selector};
pub use params::{ParamVector, Partition, Role};
