//! Merge-tree models of how many clusters a viewer perceives in a scatterplot.
//!
//! Two models share one persistence machinery:
//!
//! * [`distance`] sweeps ball diameters around known cluster centers and
//!   records when components merge (0-dimensional persistent homology).
//! * [`density`] bins a rendered stimulus into a whiteness histogram and
//!   computes the join tree of its sublevel sets.
//!
//! Both produce a [`topology::MergeTree`], whose persistence pairs define a
//! step function from a persistence threshold to a cluster count. The
//! [`synth`] module generates and renders stimuli, and [`calibration`] fits
//! linear threshold models from viewer responses.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI and HTTP
//! service use.

pub mod calibration;
pub mod density;
pub mod distance;
mod error;
pub mod io;
pub mod pipeline;
mod scalar;
pub mod serde_util;
pub mod synth;
pub mod topology;
mod union_find;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use union_find::DisjointSet;

pub type GenParams = synth::GenParams<f64>;
pub type RenderParams = synth::RenderParams<f64>;
pub type Dataset = synth::Dataset<f64>;
pub type StimulusImage = synth::StimulusImage<f64>;
pub type MergeTree = topology::MergeTree<f64>;
pub type PersistencePair = topology::PersistencePair<f64>;
pub type ThresholdPlot = topology::ThresholdPlot<f64>;
pub type ThresholdChoice = topology::ThresholdChoice<f64>;
pub type CenterSet = distance::CenterSet<f64>;
pub type DensityHistogram = density::DensityHistogram<f64>;
pub type ResponseRecord = calibration::ResponseRecord<f64>;
pub type LinearThresholdModel = calibration::LinearThresholdModel<f64>;
pub type DifferentialSummary = calibration::DifferentialSummary<f64>;
