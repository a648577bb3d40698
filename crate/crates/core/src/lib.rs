//! Closed-loop visual localization benchmark core.
//!
//! The crate is `no_std` (with `alloc`) and carries every piece of the
//! simulation that is pure computation:
//!
//! - [`geometry`]: poses, pinhole projection, triangulation, P3P and RANSAC PnP.
//! - [`world`]: synthetic landmark world, vehicle kinematics, wheel odometry and
//!   the synthetic camera observation with illumination / fog / viewpoint knobs.
//! - [`vloc`]: hierarchical localization (gallery, retrieval, co-visibility
//!   clustering, ratio matching, per-cluster PnP).
//! - [`fusion`]: planar EKF fusing odometry with visual pose estimates.
//! - [`navstack`]: waypoint planning, subgoal selection and PID control.
//! - [`bench`]: episode execution with re-initialization and the metrics.
//!
//! File formats, configuration files, sweeps and the CLI live in the `vlocnav`
//! companion crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bench;
pub mod fusion;
pub mod geometry;
pub mod math;
pub mod navstack;
pub mod rng;
pub mod vloc;
pub mod world;

pub use geometry::{CameraIntrinsics, Correspondence2D3D, GeometryError, LandmarkId, Pose, PoseError};
