//! Pose-level library for one-to-many audio-driven head motion: a learned
//! motion space of bases, audio-conditioned sampling inside it, decoding to
//! rotation/translation trajectories and clip stitching.

// negated float comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod encoders;
pub mod error;
pub mod face;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod motion_space;
pub mod nn;
pub mod pose;
pub mod sampler;
pub mod synth;
pub mod train;

/// Length of one flattened 16×16 audio feature block.
pub const AUDIO_FRAME_DIM: usize = 256;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{LrSchedule, TrainConfig};
pub use error::{Error, Result};
pub use model::MotionModel;
pub use train::{train, Trainer};
