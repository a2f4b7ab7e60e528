//! Pick-and-play memory for temporally consistent stereo video disparity.
//!
//! Frames are encoded into seeded feature grids and correlation volumes at a
//! single working scale. For every target frame, a quality-assessment step
//! scores all memory frames by confidence and redundancy-aware similarity,
//! keeps the best `K`, weights them, and attends over their keys and values.
//! A convolutional GRU then refines the disparity for `N` iterations.

pub mod bench;
pub mod cli;
pub mod confidence;
pub mod config;
pub mod costvolume;
pub mod error;
pub mod features;
pub mod grid;
pub mod memory;
pub mod metrics;
pub mod raster;
pub mod refine;
pub mod seed;
pub mod synth;
pub mod trace;
pub mod video;

pub use config::{ConfidenceSource, PipelineConfig, Policy};
pub use error::{Error, PfmError, Result};
pub use raster::FloatRaster;
pub use refine::{run_sequence, RunOutput};
pub use video::{StereoFrame, StereoVideoSequence};
