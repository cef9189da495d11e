//! Interactive video object segmentation with optimum-path forests.
//!
//! Frames are split into superpixels, linked across time through optical
//! flow, and segmented by seed competition from the previous frame's mask.
//! The prediction is then refined on the pixel graph using seeds drawn from a
//! fuzzy shape model built from the prediction and the flow-propagated mask.

pub mod eval;
pub mod flow;
pub mod fom;
pub mod ift;
pub mod imgcore;
pub mod pipeline;
pub mod scalar;
pub mod superpix;
pub mod synth;
pub mod videoseg;

pub use scalar::Scalar;

pub use imgcore::{BinaryMask, Label, LabelMap, SeedPixels};

pub type Frame = imgcore::ColorFrame<f64>;
pub type Frame32 = imgcore::ColorFrame<f32>;
pub type FlowField = flow::FlowField<f64>;
pub type SuperpixelDecomposition = superpix::SuperpixelDecomposition<f64>;




pub type SignedDistanceMap = fom::SignedDistanceMap<f64>;
pub type FuzzyObjectImage = fom::FuzzyObjectImage<f64>;
pub type WeightImage = fom::WeightImage<f64>;
pub type Session = pipeline::Session<f64>;
