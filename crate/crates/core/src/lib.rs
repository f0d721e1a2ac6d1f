//! Kinematics-driven augmentation of IMU exercise recordings.
//!
//! The crate turns a handful of labeled, calibrated orientation recordings into
//! many synthetic repetitions: Euler-angle offsets and ranges are resampled from
//! class-conditional distributions, the modified trajectories are projected
//! through a joint-limited kinematic chain, and every candidate is re-graded by
//! an exercise rule set before it is kept. A small convolutional classifier and
//! the split machinery needed to measure the effect of the augmented data live
//! alongside.
//!
//! Module map:
//!
//! - [`rotation`]: quaternions, Euler angles, SLERP, resampling, Madgwick filter
//! - [`calibration`]: sensor-to-segment offsets
//! - [`skeleton`]: kinematic chain, forward/inverse kinematics, metrics
//! - [`augmentation`]: offset/range distributions and candidate generation
//! - [`labeling`]: rule sets, GM-F1 and random threshold search
//! - [`datasets`]: repetitions, on-disk format, splits, synthetic corpora
//! - [`classifier`]: CNN, training, fine-tuning, evaluation

pub mod augmentation;
pub mod calibration;
pub mod classifier;
pub mod datasets;
mod error;
pub mod labeling;
pub mod rotation;
pub mod skeleton;

pub use error::{Error, Result};
