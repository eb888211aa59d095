pub mod detectors;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod measures;
pub mod scalar;
pub mod scenery;
pub mod seeds;
pub mod stats;
pub mod trees;

use num_rational::BigRational;

pub use error::{Error, Result};

pub type Measures = measures::MeasurePair<f64>;
pub type ExactMeasures = measures::MeasurePair<BigRational>;
pub type Tree = trees::FlowTree<f64>;
pub type ExactTree = trees::FlowTree<BigRational>;
