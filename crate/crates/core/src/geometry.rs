//! Box representations, projection into the image and overlap measures.
//!
//! Coordinates follow the KITTI rectified camera frame: x right, y down,
//! z forward. A [`Box3D`] is anchored at the center of its bottom face, so it
//! spans `[y - h, y]` vertically, and its footprint lives in the (x, z) plane.
//! At zero yaw the length runs along x and the width along z.

use crate::kitti::CalibrationSet;
use nalgebra::{Vector3, Vector4};

/// Corners closer to the camera than this are not projected.
pub const NEAR_PLANE: f64 = 0.1;

/// Axis-aligned image box in pixels, corner form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2D {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl Box2D {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn from_center_size(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.left + self.right) / 2.0,
            (self.top + self.bottom) / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.right > self.left && self.bottom > self.top
    }
}

/// Oriented 3D box in the rectified camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    /// Bottom-center position in meters.
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub h: f64,
    pub w: f64,
    pub l: f64,
    /// Rotation about the camera y axis, radians.
    pub yaw: f64,
}

impl Box3D {
    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn volume(&self) -> f64 {
        self.h * self.w * self.l
    }

    pub fn translated(&self, dx: f64, dy: f64, dz: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            z: self.z + dz,
            ..*self
        }
    }

    /// Footprint in the (x, z) plane, counterclockwise.
    pub fn footprint(&self) -> ConvexPolygon {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (self.l / 2.0, self.w / 2.0);
        let local = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)];
        ConvexPolygon {
            vertices: local
                .iter()
                .map(|&(dx, dz)| [self.x + c * dx + s * dz, self.z - s * dx + c * dz])
                .collect(),
        }
    }

    /// The eight vertices: bottom face first (y = `self.y`), then the top face
    /// (y = `self.y - h`) in the same footprint order.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let fp = self.footprint();
        let mut out = [Vector3::zeros(); 8];
        for (i, p) in fp.vertices.iter().enumerate() {
            out[i] = Vector3::new(p[0], self.y, p[1]);
            out[i + 4] = Vector3::new(p[0], self.y - self.h, p[1]);
        }
        out
    }

    /// `(top, bottom)` on the y axis; y grows downward.
    fn vertical_span(&self) -> (f64, f64) {
        (self.y - self.h, self.y)
    }
}

pub fn box3d_corners(b: &Box3D) -> [Vector3<f64>; 8] {
    b.corners()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    /// Left color camera resolution of most KITTI tracking sequences.
    pub const KITTI: ImageSize = ImageSize {
        width: 1242,
        height: 375,
    };
}

impl Default for ImageSize {
    fn default() -> Self {
        Self::KITTI
    }
}

/// Projects a 3D box through `P2` and returns the clipped axis-aligned hull of
/// its corners, or `None` when a corner lies behind the near plane or nothing
/// is left after clipping to the image.
pub fn project_box3d(b: &Box3D, calib: &CalibrationSet, image: ImageSize) -> Option<Box2D> {
    let p = &calib.p2;
    let (mut u0, mut v0) = (f64::INFINITY, f64::INFINITY);
    let (mut u1, mut v1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in b.corners() {
        let q = p * Vector4::new(c.x, c.y, c.z, 1.0);
        if q.z <= NEAR_PLANE {
            return None;
        }
        let (u, v) = (q.x / q.z, q.y / q.z);
        u0 = u0.min(u);
        v0 = v0.min(v);
        u1 = u1.max(u);
        v1 = v1.max(v);
    }
    let (w, h) = (image.width as f64, image.height as f64);
    let clipped = Box2D::new(u0.clamp(0.0, w), v0.clamp(0.0, h), u1.clamp(0.0, w), v1.clamp(0.0, h));
    clipped.is_valid().then_some(clipped)
}

pub fn iou_2d(a: &Box2D, b: &Box2D) -> f64 {
    let iw = a.right.min(b.right) - a.left.max(b.left);
    let ih = a.bottom.min(b.bottom) - a.top.max(b.top);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Convex polygon in the ground plane, vertices `[x, z]` counterclockwise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    pub vertices: Vec<[f64; 2]>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl ConvexPolygon {
    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace area; positive for counterclockwise order.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            acc += p[0] * q[1] - q[0] * p[1];
        }
        acc / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Intersection with another convex polygon by successive half-plane
    /// clipping against each edge of `clip`.
    pub fn intersection(&self, clip: &ConvexPolygon) -> ConvexPolygon {
        if self.is_empty() || clip.is_empty() {
            return ConvexPolygon::default();
        }
        let mut output = self.vertices.clone();
        let m = clip.vertices.len();
        for i in 0..m {
            if output.is_empty() {
                break;
            }
            let a = clip.vertices[i];
            let b = clip.vertices[(i + 1) % m];
            let input = std::mem::take(&mut output);
            let n = input.len();
            for j in 0..n {
                let cur = input[j];
                let prev = input[(j + n - 1) % n];
                let cur_in = cross(a, b, cur) >= 0.0;
                let prev_in = cross(a, b, prev) >= 0.0;
                if cur_in {
                    if !prev_in {
                        output.push(line_intersection(prev, cur, a, b));
                    }
                    output.push(cur);
                } else if prev_in {
                    output.push(line_intersection(prev, cur, a, b));
                }
            }
        }
        ConvexPolygon { vertices: output }
    }
}

/// Point where segment `p → q` crosses the infinite line through `a`, `b`.
fn line_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let denom = dp - dq;
    if denom.abs() < f64::EPSILON {
        return q;
    }
    let t = dp / denom;
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    a.footprint().intersection(&b.footprint()).area()
}

pub fn bev_iou(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_area(a, b);
    let union = a.l * a.w + b.l * b.w - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Volume IoU of two oriented boxes: BEV intersection area times vertical
/// overlap, over the union volume.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let (ta, ba) = a.vertical_span();
    let (tb, bb) = b.vertical_span();
    let overlap_h = ba.min(bb) - ta.max(tb);
    if overlap_h <= 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * overlap_h;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// `1 / (1 + ‖c_a − c_b‖)` over box centers.
pub fn normalized_distance(a: &Box3D, b: &Box3D) -> f64 {
    1.0 / (1.0 + center_distance(a, b))
}

pub fn center_distance(a: &Box3D, b: &Box3D) -> f64 {
    (a.center() - b.center()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3x4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn bx(x: f64, y: f64, z: f64, h: f64, w: f64, l: f64, yaw: f64) -> Box3D {
        Box3D { x, y, z, h, w, l, yaw }
    }

    fn pinhole(f: f64, cx: f64, cy: f64) -> CalibrationSet {
        CalibrationSet::from_p2(Matrix3x4::new(
            f, 0.0, cx, 0.0, 0.0, f, cy, 0.0, 0.0, 0.0, 1.0, 0.0,
        ))
    }

    fn corner_set(b: &Box3D) -> Vec<[i64; 3]> {
        let mut v: Vec<[i64; 3]> = b
            .corners()
            .iter()
            .map(|c| [(c.x * 1e6).round() as i64, (c.y * 1e6).round() as i64, (c.z * 1e6).round() as i64])
            .collect();
        v.sort();
        v
    }

    #[test]
    fn corners_axis_aligned() {
        let b = bx(0.0, 0.0, 10.0, 2.0, 2.0, 4.0, 0.0);
        for c in b.corners() {
            assert!(c.x == -2.0 || c.x == 2.0);
            assert!(c.y == -2.0 || c.y == 0.0);
            assert!((c.z - 9.0).abs() < 1e-12 || (c.z - 11.0).abs() < 1e-12);
        }
        assert_eq!(corner_set(&b).len(), 8);
    }

    #[test]
    fn corners_half_turn_and_translation() {
        let b = bx(1.0, 1.5, 12.0, 1.5, 1.6, 3.9, 0.3);
        let flipped = Box3D { yaw: 0.3 - PI, ..b };
        assert_eq!(corner_set(&b), corner_set(&flipped));
        let moved = b.translated(1.0, 0.0, 0.0);
        for (c, m) in b.corners().iter().zip(moved.corners().iter()) {
            assert_relative_eq!(m - c, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn project_point_like_box_hits_principal_point() {
        let calib = pinhole(721.5, 609.6, 172.9);
        let tiny = bx(0.0, 0.0005, 10.0, 0.001, 0.001, 0.001, 0.0);
        let p = project_box3d(&tiny, &calib, ImageSize::KITTI).unwrap();
        let (u, v) = p.center();
        assert!((u - 609.6).abs() < 0.1, "{u}");
        assert!((v - 172.9).abs() < 0.1, "{v}");
    }

    #[test]
    fn project_behind_camera() {
        let calib = pinhole(721.5, 609.6, 172.9);
        let b = bx(0.0, 1.0, -10.0, 1.5, 1.6, 3.9, 0.0);
        assert_eq!(project_box3d(&b, &calib, ImageSize::KITTI), None);
        // straddling the near plane is also rejected
        let b = bx(0.0, 1.0, 0.5, 1.5, 1.6, 3.9, 0.0);
        assert_eq!(project_box3d(&b, &calib, ImageSize::KITTI), None);
    }

    #[test]
    fn project_scales_inverse_with_depth() {
        let calib = pinhole(721.5, 609.6, 172.9);
        let near = bx(0.0, 0.75, 60.0, 1.5, 1.6, 1.6, 0.0);
        let far = Box3D { z: 120.0, ..near };
        let wn = project_box3d(&near, &calib, ImageSize::KITTI).unwrap().width();
        let wf = project_box3d(&far, &calib, ImageSize::KITTI).unwrap().width();
        assert!((wn / wf - 2.0).abs() < 0.02, "{}", wn / wf);
    }

    #[test]
    fn project_clips_to_image() {
        let calib = pinhole(721.5, 609.6, 172.9);
        let b = bx(-6.0, 1.7, 5.0, 1.5, 1.6, 3.9, 0.4);
        let p = project_box3d(&b, &calib, ImageSize::KITTI).unwrap();
        assert!(p.left >= 0.0 && p.top >= 0.0 && p.right <= 1242.0 && p.bottom <= 375.0);
        assert_eq!(p.left, 0.0);
    }

    // Counts unit-ish cells whose centers fall in both boxes.
    fn raster_iou(a: &Box2D, b: &Box2D, step: f64) -> f64 {
        let (x0, x1) = (a.left.min(b.left), a.right.max(b.right));
        let (y0, y1) = (a.top.min(b.top), a.bottom.max(b.bottom));
        let inside = |r: &Box2D, x: f64, y: f64| x > r.left && x < r.right && y > r.top && y < r.bottom;
        let (mut i, mut u) = (0usize, 0usize);
        let mut x = x0 + step / 2.0;
        while x < x1 {
            let mut y = y0 + step / 2.0;
            while y < y1 {
                let (ia, ib) = (inside(a, x, y), inside(b, x, y));
                i += (ia && ib) as usize;
                u += (ia || ib) as usize;
                y += step;
            }
            x += step;
        }
        i as f64 / u as f64
    }

    #[test]
    fn iou_2d_cases() {
        let a = Box2D::new(0.0, 0.0, 2.0, 2.0);
        let b = Box2D::new(1.0, 0.0, 3.0, 2.0);
        assert_eq!(iou_2d(&a, &a), 1.0);
        assert_eq!(iou_2d(&a, &Box2D::new(5.0, 5.0, 6.0, 6.0)), 0.0);
        let raster = raster_iou(&a, &b, 0.01);
        assert!((raster - 1.0 / 3.0).abs() < 1e-9);
        assert_relative_eq!(iou_2d(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn bev_area_cases() {
        let a = bx(0.0, 0.0, 0.0, 1.0, 2.0, 4.0, 0.0);
        assert_relative_eq!(bev_intersection_area(&a, &a), 8.0, epsilon = 1e-12);
        let sq = bx(3.0, 0.0, 7.0, 1.0, 2.0, 2.0, 0.2);
        let sq90 = Box3D { yaw: 0.2 + FRAC_PI_2, ..sq };
        assert_relative_eq!(bev_intersection_area(&sq, &sq90), 4.0, epsilon = 1e-9);
        // containment gives the smaller area
        let small = bx(0.2, 0.0, 0.1, 1.0, 0.5, 1.0, 0.7);
        assert_relative_eq!(bev_intersection_area(&a, &small), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn bev_rotated_unit_squares_match_monte_carlo() {
        let a = bx(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let b = Box3D { yaw: FRAC_PI_4, ..a };
        // Monte-Carlo oracle: sample the first square, test membership in the second.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 2_000_000;
        let (s, c) = (FRAC_PI_4).sin_cos();
        let mut hits = 0usize;
        for _ in 0..n {
            let x: f64 = rng.random_range(-0.5..0.5);
            let z: f64 = rng.random_range(-0.5..0.5);
            let lx = c * x - s * z;
            let lz = s * x + c * z;
            hits += (lx.abs() <= 0.5 && lz.abs() <= 0.5) as usize;
        }
        let mc = hits as f64 / n as f64;
        let closed = 2.0 * (2f64.sqrt() - 1.0);
        assert!((mc - closed).abs() < 2e-3, "mc {mc}");
        assert_relative_eq!(bev_intersection_area(&a, &b), closed, epsilon = 1e-12);
    }

    #[test]
    fn iou_3d_cases() {
        let a = bx(0.0, 0.0, 10.0, 2.0, 2.0, 4.0, 0.0);
        assert_relative_eq!(iou_3d(&a, &a), 1.0, epsilon = 1e-12);
        // closed form: overlap 3 (x) * 2 (z) * 2 (y) = 12, union 16 + 16 - 12
        let b = a.translated(1.0, 0.0, 0.0);
        assert_relative_eq!(iou_3d(&a, &b), 0.6, epsilon = 1e-12);
        let above = a.translated(0.0, -2.5, 0.0);
        assert_eq!(iou_3d(&a, &above), 0.0);
        assert_eq!(iou_3d(&a, &a.translated(0.0, 0.0, 5.0)), 0.0);
    }

    #[test]
    fn normalized_distance_values() {
        let a = bx(0.0, 0.0, 10.0, 2.0, 2.0, 4.0, 0.0);
        assert_eq!(normalized_distance(&a, &a), 1.0);
        assert_eq!(normalized_distance(&a, &a.translated(1.0, 0.0, 0.0)), 0.5);
        assert_eq!(normalized_distance(&a, &a.translated(3.0, 0.0, 0.0)), 0.25);
        let other = Box3D { h: 9.0, w: 0.1, l: 0.2, yaw: 1.0, ..a.translated(0.0, 0.0, 3.0) };
        assert_eq!(normalized_distance(&a, &other), 0.25);
    }
}
