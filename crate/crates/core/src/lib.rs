//! Camera-LiDAR fusion 3D multi-object tracking.
//!
//! Detections from a 2D image detector and a 3D point-cloud detector are paired
//! per frame ([`fusion`]), then associated to trajectories through a four-level
//! cascade ([`tracker`]):
//!
//! 1. fused detections against existing 3D trajectories,
//! 2. leftover 3D trajectories against LiDAR-only detections,
//! 3. image-only trajectories against camera-only detections,
//! 4. still-unmatched 3D trajectories projected into the image and merged with
//!    2D trajectories, so a far object tracked by the camera keeps its identity
//!    once the LiDAR picks it up.
//!
//! The supporting pieces live in their own modules: box geometry and rotated
//! IoU ([`geometry`]), constant-velocity Kalman filters ([`filter`]), gated
//! max-weight assignment ([`association`], [`assignment`]), KITTI file I/O
//! ([`kitti`]), CLEAR-MOT evaluation ([`metrics`]) and a deterministic
//! synthetic-scene generator ([`scenario`]).
//!
//! The guide under `book/` walks through each stage with runnable snippets.

pub mod assignment;
pub mod association;
pub mod config;
mod error;
pub mod filter;
pub mod fusion;
pub mod geometry;
pub mod kitti;
pub mod metrics;
pub mod scenario;
pub mod tracker;

pub use error::{Error, Result};

/// Wraps an angle into `[-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    if (-PI..=PI).contains(&angle) {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    // rem_euclid can land exactly on -π for inputs like 3π; either end is valid.
    wrapped.clamp(-PI, PI)
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/filters.md")]
    mod filters {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod fusion {}
    #[doc = include_str!("../../../book/src/association.md")]
    mod association {}
    #[doc = include_str!("../../../book/src/cascade.md")]
    mod cascade {}
    #[doc = include_str!("../../../book/src/lifecycle.md")]
    mod lifecycle {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/files.md")]
    mod files {}
}
