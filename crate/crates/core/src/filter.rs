//! Constant-velocity Kalman filters.
//!
//! [`Filter3D`] keeps the 10-dim state `(x, y, z, yaw, l, w, h, vx, vy, vz)`
//! and observes the first seven components. Before each update the yaw is
//! corrected for the front/back ambiguity of a cuboid: if the detection points
//! more than a quarter turn away from the state, the state is flipped by π.
//!
//! [`Filter2D`] keeps `(u, v, w, h, vu, vv, vw, vh)` in pixels, observing the
//! center and size.
//!
//! Time is counted in frames; velocities are per frame. Covariances are
//! propagated with the Joseph form and re-symmetrized after every step.

use crate::geometry::{Box2D, Box3D};
use crate::wrap_angle;
use nalgebra::{SMatrix, SVector};
use std::f64::consts::{FRAC_PI_2, PI};

type Vec10 = SVector<f64, 10>;
type Mat10 = SMatrix<f64, 10, 10>;
type Mat7 = SMatrix<f64, 7, 7>;
type Mat7x10 = SMatrix<f64, 7, 10>;
type Vec8 = SVector<f64, 8>;
type Mat8 = SMatrix<f64, 8, 8>;
type Mat4 = SMatrix<f64, 4, 4>;
type Mat4x8 = SMatrix<f64, 4, 8>;

const YAW: usize = 3;
const MIN_DIM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise3D {
    pub init_position: f64,
    pub init_yaw: f64,
    pub init_dims: f64,
    pub init_velocity: f64,
    /// Process noise on position, yaw and velocity.
    pub process_kinematic: f64,
    pub process_dims: f64,
    pub measurement: f64,
}

impl Default for Noise3D {
    fn default() -> Self {
        Self {
            init_position: 1.0,
            init_yaw: 0.1,
            init_dims: 0.01,
            init_velocity: 100.0,
            process_kinematic: 0.01,
            process_dims: 0.0,
            measurement: 0.1,
        }
    }
}

/// Flips `state_yaw` by π when `det_yaw` is more than a quarter turn away.
///
/// Returns the (possibly flipped) state yaw and the wrapped innovation
/// `det_yaw − state_yaw`, which always lies in `[−π/2, π/2]`.
pub fn orientation_correction(state_yaw: f64, det_yaw: f64) -> (f64, f64) {
    let mut state = wrap_angle(state_yaw);
    let det = wrap_angle(det_yaw);
    let mut innovation = wrap_angle(det - state);
    if innovation.abs() > FRAC_PI_2 {
        state = wrap_angle(state + PI);
        innovation = wrap_angle(det - state);
    }
    (state, innovation)
}

fn symmetrize<const N: usize>(m: &mut SMatrix<f64, N, N>) {
    *m = (*m + m.transpose()) * 0.5;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filter3D {
    state: Vec10,
    cov: Mat10,
    transition: Mat10,
    process: Mat10,
    measurement: Mat7,
}

impl Filter3D {
    pub fn new(det: &Box3D, noise: &Noise3D) -> Self {
        let mut state = Vec10::zeros();
        state.fixed_rows_mut::<7>(0).copy_from(&observe3d(det));
        state[YAW] = wrap_angle(det.yaw);

        let mut transition = Mat10::identity();
        for i in 0..3 {
            transition[(i, i + 7)] = 1.0;
        }
        let diag = |pos: f64, yaw: f64, dims: f64, vel: f64| {
            Mat10::from_diagonal(&Vec10::from_column_slice(&[
                pos, pos, pos, yaw, dims, dims, dims, vel, vel, vel,
            ]))
        };
        let q = noise.process_kinematic;
        Self {
            state,
            cov: diag(noise.init_position, noise.init_yaw, noise.init_dims, noise.init_velocity),
            transition,
            process: diag(q, q, noise.process_dims, q),
            measurement: Mat7::identity() * noise.measurement,
        }
    }

    pub fn state(&self) -> &Vec10 {
        &self.state
    }

    pub fn covariance(&self) -> &Mat10 {
        &self.cov
    }

    pub fn velocity(&self) -> [f64; 3] {
        [self.state[7], self.state[8], self.state[9]]
    }

    pub fn set_velocity(&mut self, v: [f64; 3]) {
        self.state[7] = v[0];
        self.state[8] = v[1];
        self.state[9] = v[2];
    }

    pub fn bbox(&self) -> Box3D {
        let s = &self.state;
        Box3D {
            x: s[0],
            y: s[1],
            z: s[2],
            yaw: s[3],
            l: s[4],
            w: s[5],
            h: s[6],
        }
    }

    /// Advances one frame and returns the predicted box.
    pub fn predict(&mut self) -> Box3D {
        self.state = self.transition * self.state;
        self.state[YAW] = wrap_angle(self.state[YAW]);
        self.cov = self.transition * self.cov * self.transition.transpose() + self.process;
        symmetrize(&mut self.cov);
        self.bbox()
    }

    /// Corrects with a detection; returns the yaw innovation that was applied.
    pub fn update(&mut self, det: &Box3D) -> f64 {
        let (yaw, yaw_innovation) = orientation_correction(self.state[YAW], det.yaw);
        self.state[YAW] = yaw;

        let h = observation_3d();
        let mut innovation = observe3d(det) - h * self.state;
        innovation[YAW] = yaw_innovation;

        let s = h * self.cov * h.transpose() + self.measurement;
        let Some(s_inv) = s.try_inverse() else {
            return yaw_innovation;
        };
        let gain = self.cov * h.transpose() * s_inv;
        self.state += gain * innovation;
        let ikh = Mat10::identity() - gain * h;
        self.cov = ikh * self.cov * ikh.transpose() + gain * self.measurement * gain.transpose();
        symmetrize(&mut self.cov);

        self.state[YAW] = wrap_angle(self.state[YAW]);
        for i in 4..7 {
            self.state[i] = self.state[i].max(MIN_DIM);
        }
        yaw_innovation
    }
}

fn observe3d(b: &Box3D) -> SVector<f64, 7> {
    SVector::<f64, 7>::from_column_slice(&[b.x, b.y, b.z, b.yaw, b.l, b.w, b.h])
}

fn observation_3d() -> Mat7x10 {
    let mut h = Mat7x10::zeros();
    for i in 0..7 {
        h[(i, i)] = 1.0;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise2D {
    pub init_position: f64,
    pub init_size: f64,
    pub init_velocity: f64,
    pub process_position: f64,
    pub process_velocity: f64,
    pub measurement: f64,
}

impl Default for Noise2D {
    fn default() -> Self {
        Self {
            init_position: 10.0,
            init_size: 10.0,
            init_velocity: 1000.0,
            process_position: 1.0,
            process_velocity: 0.1,
            measurement: 1.0,
        }
    }
}

/// How 2D-only tracks move between detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Motion2D {
    #[default]
    Kalman,
    /// No motion model: the track sits on its last detection.
    Snap,
}

/// Smallest width/height a 2D state may take after an update, pixels.
pub const MIN_SIZE_PX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Filter2D {
    state: Vec8,
    cov: Mat8,
    transition: Mat8,
    process: Mat8,
    measurement: Mat4,
    motion: Motion2D,
    clamped: u32,
}

impl Filter2D {
    pub fn new(det: &Box2D, noise: &Noise2D, motion: Motion2D) -> Self {
        let mut state = Vec8::zeros();
        state.fixed_rows_mut::<4>(0).copy_from(&observe2d(det));
        let mut transition = Mat8::identity();
        for i in 0..4 {
            transition[(i, i + 4)] = 1.0;
        }
        let d = |a: f64, b: f64, c: f64| {
            Mat8::from_diagonal(&Vec8::from_column_slice(&[a, a, b, b, c, c, c, c]))
        };
        Self {
            state,
            cov: d(noise.init_position, noise.init_size, noise.init_velocity),
            transition,
            process: d(noise.process_position, noise.process_position, noise.process_velocity),
            measurement: Mat4::identity() * noise.measurement,
            motion,
            clamped: 0,
        }
    }

    pub fn state(&self) -> &Vec8 {
        &self.state
    }

    pub fn covariance(&self) -> &Mat8 {
        &self.cov
    }

    pub fn set_velocity(&mut self, v: [f64; 4]) {
        for (i, vi) in v.iter().enumerate() {
            self.state[4 + i] = *vi;
        }
    }

    /// Number of updates whose width or height had to be floored.
    pub fn clamp_count(&self) -> u32 {
        self.clamped
    }

    pub fn bbox(&self) -> Box2D {
        Box2D::from_center_size(self.state[0], self.state[1], self.state[2], self.state[3])
    }

    pub fn predict(&mut self) -> Box2D {
        if self.motion == Motion2D::Kalman {
            self.state = self.transition * self.state;
            self.cov = self.transition * self.cov * self.transition.transpose() + self.process;
            symmetrize(&mut self.cov);
            self.floor_size();
        }
        self.bbox()
    }

    pub fn update(&mut self, det: &Box2D) {
        let z = observe2d(det);
        if self.motion == Motion2D::Snap {
            self.state.fixed_rows_mut::<4>(0).copy_from(&z);
            self.floor_size();
            return;
        }
        let mut h = Mat4x8::zeros();
        for i in 0..4 {
            h[(i, i)] = 1.0;
        }
        let s = h * self.cov * h.transpose() + self.measurement;
        let Some(s_inv) = s.try_inverse() else { return };
        let gain = self.cov * h.transpose() * s_inv;
        self.state += gain * (z - h * self.state);
        let ikh = Mat8::identity() - gain * h;
        self.cov = ikh * self.cov * ikh.transpose() + gain * self.measurement * gain.transpose();
        symmetrize(&mut self.cov);
        if self.floor_size() {
            self.clamped += 1;
        }
    }

    fn floor_size(&mut self) -> bool {
        let mut hit = false;
        for i in 2..4 {
            if self.state[i] < MIN_SIZE_PX {
                self.state[i] = MIN_SIZE_PX;
                hit = true;
            }
        }
        hit
    }
}

fn observe2d(b: &Box2D) -> SVector<f64, 4> {
    let (cx, cy) = b.center();
    SVector::<f64, 4>::new(cx, cy, b.width(), b.height())
}
