//! Pruning-task planning for redundant serial manipulators.
//!
//! The pipeline runs from a labeled tree skeleton to executable plans:
//!
//! 1. [`treemodel`]: label transfer from a point cloud, cut extraction and
//!    branch capsules.
//! 2. [`posegen`]: candidate approach and cutting poses on circles around
//!    each cut.
//! 3. [`kinematics`]: forward kinematics, Jacobians, manipulability and a
//!    diverse inverse-kinematics solver.
//! 4. [`collision`]: capsule world with batched configuration and edge checks.
//! 5. [`planner`]: cost-based candidate selection plus RRT-Connect.
//! 6. [`controller`]: position-based servoing of the final approach with
//!    failure classification.
//! 7. [`harness`]: the benchmark sweep over base poses and planner classes.

// `!(x > 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod controller;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kinematics;
pub mod planner;
pub mod posegen;
pub mod rng;
pub mod treemodel;

pub use error::{Error, Result};
pub use geometry::{Capsule, Pose, Vec3};
pub use kinematics::{JointConfig, KinematicChain};
pub use treemodel::{Cut, Label, LabeledPointCloud, TreeGraph};
