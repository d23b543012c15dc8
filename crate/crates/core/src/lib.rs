//! Articulated-object kinematics, articulation flow, and a flow-following
//! manipulation policy.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parsers and
//! the command line live in the `articflow` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod camera;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod flow;
pub mod geom;
pub mod model;
pub mod policy;
pub mod procgen;

mod kdtree;
mod rng;

pub use error::{Error, Result};
pub use kdtree::KdTree;
pub use rng::{derive_seed, seeded_rng};

pub use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};

/// World-frame rigid transform.
pub type Pose = Isometry3<f64>;
