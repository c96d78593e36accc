//! Human action recognition from skeleton joint angles with a kernel SVM whose
//! hyperparameters are tuned by a quantum-inspired genetic algorithm.
//!
//! The pipeline:
//!
//! 1. [`skeleton`] turns 20-joint 3D skeleton frames into 22 joint angles and
//!    summarises an action window by the variance of each angle.
//! 2. [`svm`] trains a binary soft-margin SVM on those 22-dimensional features.
//! 3. [`qga`] is a black-box maximiser over a boxed parameter space.
//! 4. [`tuning`] uses it (or a grid) to pick the SVM's penalty `C` and RBF width `σ`.
//! 5. [`harness`] ties it together: file formats, a synthetic data generator,
//!    train/test splits, confusion matrices and reproducible experiment reports.
//!
//! ```
//! use qgasvm::skeleton::{canonical_topology, frame_angles, standing_pose, SkeletonFrame};
//!
//! let topology = canonical_topology();
//! let frame = SkeletonFrame::new(standing_pose(), 0).unwrap();
//! let angles = frame_angles(&frame, &topology).unwrap();
//! assert_eq!(angles.0.len(), 22);
//! ```

pub mod harness;
pub mod qga;
pub mod skeleton;
pub mod svm;
pub mod tuning;

#[cfg(doctest)]
mod book;
