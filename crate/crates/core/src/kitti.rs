//! Detection, calibration and label files.
//!
//! Detections are comma-separated, one per line:
//!
//! ```text
//! frame,left,top,right,bottom,score            (2D, pixels)
//! frame,h,w,l,x,y,z,rot_y,score                (3D, meters / radians)
//! ```
//!
//! Lines that parse but violate a box invariant are set aside as
//! [`RejectedLine`]s rather than failing the whole file. Calibration files use
//! the KITTI `KEY: v v v ...` layout and labels/results use the 17 (or 18,
//! with score) space-separated KITTI tracking columns.

use crate::geometry::{Box2D, Box3D};
use crate::tracker::FrameOutput;
use crate::{wrap_angle, Error, Result};
use nalgebra::{Matrix3, Matrix3x4, Vector4};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Value written into the 3D columns of rows that have no 3D box.
pub const MISSING_3D: f64 = -1000.0;
/// KITTI's "unknown" observation angle.
pub const MISSING_ALPHA: f64 = -10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection2D {
    pub frame: usize,
    pub bbox: Box2D,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection3D {
    pub frame: usize,
    pub bbox: Box3D,
    pub score: f64,
}

impl Detection3D {
    /// Re-expresses a box given in the LiDAR frame (x forward, y left, z up,
    /// yaw about z) in the rectified camera frame.
    pub fn lidar_to_camera(&self, calib: &CalibrationSet) -> Result<Detection3D> {
        let tr = calib
            .tr_velo_cam
            .ok_or(Error::MissingCalibration("Tr_velo_cam"))?;
        let b = &self.bbox;
        let cam = calib.r_rect * (tr * Vector4::new(b.x, b.y, b.z, 1.0));
        Ok(Detection3D {
            bbox: Box3D {
                x: cam.x,
                y: cam.y,
                z: cam.z,
                yaw: wrap_angle(-b.yaw - std::f64::consts::FRAC_PI_2),
                ..*b
            },
            ..*self
        })
    }
}

/// A line that parsed but was refused.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

/// Records grouped densely by frame: `frames[k]` holds frame `k` in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGroups<T> {
    pub frames: Vec<Vec<T>>,
    pub rejected: Vec<RejectedLine>,
}

impl<T> Default for FrameGroups<T> {
    fn default() -> Self {
        Self {
            frames: Vec::new(),
            rejected: Vec::new(),
        }
    }
}

impl<T> FrameGroups<T> {
    pub fn frame(&self, k: usize) -> &[T] {
        self.frames.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn accepted(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    fn push(&mut self, frame: usize, item: T) {
        if self.frames.len() <= frame {
            self.frames.resize_with(frame + 1, Vec::new);
        }
        self.frames[frame].push(item);
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_fields<const N: usize>(path: &Path, line_no: usize, line: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(Error::Parse {
            path: path.into(),
            line: line_no,
            message: format!("expected {N} comma-separated fields, found {}", parts.len()),
        });
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
            path: path.into(),
            line: line_no,
            message: format!("not a finite number: {p:?}"),
        })?;
    }
    Ok(out)
}

fn parse_frame(path: &Path, line_no: usize, v: f64) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Parse {
            path: path.into(),
            line: line_no,
            message: format!("frame index must be a nonnegative integer, got {v}"),
        });
    }
    Ok(v as usize)
}

pub fn parse_detections_2d(text: &str, path: &Path) -> Result<FrameGroups<Detection2D>> {
    let mut out = FrameGroups::default();
    for (line_no, line) in content_lines(text) {
        let [f, left, top, right, bottom, score] = parse_fields::<6>(path, line_no, line)?;
        let frame = parse_frame(path, line_no, f)?;
        let bbox = Box2D::new(left, top, right, bottom);
        if left >= right || top >= bottom {
            out.rejected.push(RejectedLine {
                line: line_no,
                reason: format!("degenerate box (left {left}, top {top}, right {right}, bottom {bottom})"),
            });
            continue;
        }
        out.push(frame, Detection2D { frame, bbox, score });
    }
    Ok(out)
}

pub fn read_detections_2d(path: impl AsRef<Path>) -> Result<FrameGroups<Detection2D>> {
    let path = path.as_ref();
    parse_detections_2d(&read_text(path)?, path)
}

pub fn parse_detections_3d(text: &str, path: &Path) -> Result<FrameGroups<Detection3D>> {
    let mut out = FrameGroups::default();
    for (line_no, line) in content_lines(text) {
        let [f, h, w, l, x, y, z, rot_y, score] = parse_fields::<9>(path, line_no, line)?;
        let frame = parse_frame(path, line_no, f)?;
        if h <= 0.0 || w <= 0.0 || l <= 0.0 {
            out.rejected.push(RejectedLine {
                line: line_no,
                reason: format!("nonpositive dimension (h {h}, w {w}, l {l})"),
            });
            continue;
        }
        let bbox = Box3D {
            x,
            y,
            z,
            h,
            w,
            l,
            yaw: wrap_angle(rot_y),
        };
        out.push(frame, Detection3D { frame, bbox, score });
    }
    Ok(out)
}

pub fn read_detections_3d(path: impl AsRef<Path>) -> Result<FrameGroups<Detection3D>> {
    let path = path.as_ref();
    parse_detections_3d(&read_text(path)?, path)
}

pub fn format_detections_2d(frames: &[Vec<Detection2D>]) -> String {
    let mut s = String::new();
    for d in frames.iter().flatten() {
        let b = &d.bbox;
        let _ = writeln!(s, "{},{},{},{},{},{}", d.frame, b.left, b.top, b.right, b.bottom, d.score);
    }
    s
}

pub fn format_detections_3d(frames: &[Vec<Detection3D>]) -> String {
    let mut s = String::new();
    for d in frames.iter().flatten() {
        let b = &d.bbox;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            d.frame, b.h, b.w, b.l, b.x, b.y, b.z, b.yaw, d.score
        );
    }
    s
}

pub fn write_detections_2d(path: impl AsRef<Path>, frames: &[Vec<Detection2D>]) -> Result<()> {
    write_text(path.as_ref(), &format_detections_2d(frames))
}

pub fn write_detections_3d(path: impl AsRef<Path>, frames: &[Vec<Detection3D>]) -> Result<()> {
    write_text(path.as_ref(), &format_detections_3d(frames))
}

/// Camera projection and LiDAR extrinsics for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    /// Rectified camera 2 projection, pixels.
    pub p2: Matrix3x4<f64>,
    pub r_rect: Matrix3<f64>,
    /// LiDAR to (unrectified) camera; only needed for LiDAR-frame inputs.
    pub tr_velo_cam: Option<Matrix3x4<f64>>,
}

impl CalibrationSet {
    pub fn from_p2(p2: Matrix3x4<f64>) -> Self {
        Self {
            p2,
            r_rect: Matrix3::identity(),
            tr_velo_cam: None,
        }
    }

    /// Pinhole `P2` with zero baseline.
    pub fn pinhole(f: f64, cx: f64, cy: f64) -> Self {
        Self::from_p2(Matrix3x4::new(
            f, 0.0, cx, 0.0, //
            0.0, f, cy, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ))
    }

    fn validate(&self) -> Result<()> {
        let finite = self.p2.iter().chain(self.r_rect.iter()).all(|v| v.is_finite())
            && self
                .tr_velo_cam
                .map_or(true, |t| t.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Config("calibration has non-finite entries".into()));
        }
        if self.p2[(0, 0)] <= 0.0 || self.p2[(1, 1)] <= 0.0 {
            return Err(Error::Config("calibration P2 focal lengths must be positive".into()));
        }
        Ok(())
    }

    pub fn to_kitti_string(&self) -> String {
        fn row(s: &mut String, key: &str, vals: impl Iterator<Item = f64>) {
            s.push_str(key);
            for v in vals {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        // nalgebra iterates column-major; KITTI rows are row-major.
        let mut s = String::new();
        row(&mut s, "P2:", self.p2.transpose().iter().copied());
        row(&mut s, "R_rect", self.r_rect.transpose().iter().copied());
        if let Some(t) = &self.tr_velo_cam {
            row(&mut s, "Tr_velo_cam", t.transpose().iter().copied());
        }
        s
    }
}

pub fn parse_calibration(text: &str, path: &Path) -> Result<CalibrationSet> {
    let mut p2 = None;
    let mut r_rect = None;
    let mut tr = None;
    for (line_no, line) in content_lines(text) {
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else { continue };
        let key = key.trim_end_matches(':');
        let vals: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: line_no,
                    message: format!("bad number {p:?} after {key}"),
                })
            })
            .collect::<Result<_>>()?;
        let expect = |n: usize| -> Result<()> {
            if vals.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    path: path.into(),
                    line: line_no,
                    message: format!("{key} needs {n} values, found {}", vals.len()),
                })
            }
        };
        match key {
            "P2" => {
                expect(12)?;
                p2 = Some(Matrix3x4::from_row_slice(&vals));
            }
            "R_rect" | "R0_rect" => {
                expect(9)?;
                r_rect = Some(Matrix3::from_row_slice(&vals));
            }
            "Tr_velo_cam" | "Tr_velo_to_cam" => {
                expect(12)?;
                tr = Some(Matrix3x4::from_row_slice(&vals));
            }
            _ => {}
        }
    }
    let calib = CalibrationSet {
        p2: p2.ok_or(Error::MissingCalibration("P2"))?,
        r_rect: r_rect.unwrap_or_else(Matrix3::identity),
        tr_velo_cam: tr,
    };
    calib.validate()?;
    Ok(calib)
}

pub fn read_calibration(path: impl AsRef<Path>) -> Result<CalibrationSet> {
    let path = path.as_ref();
    parse_calibration(&read_text(path)?, path)
}

pub fn write_calibration(path: impl AsRef<Path>, calib: &CalibrationSet) -> Result<()> {
    write_text(path.as_ref(), &calib.to_kitti_string())
}

/// One row of a KITTI tracking label or result file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub frame: usize,
    pub track_id: u64,
    pub category: String,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    pub bbox: Box2D,
    pub box3d: Option<Box3D>,
    pub score: Option<f64>,
}

/// Ground-truth rows are label rows with a real track id.
pub type GtAnnotation = LabelRow;

impl LabelRow {
    pub fn to_line(&self) -> String {
        let b = &self.bbox;
        let (alpha, [h, w, l, x, y, z, ry]) = match &self.box3d {
            Some(d) => (self.alpha, [d.h, d.w, d.l, d.x, d.y, d.z, d.yaw]),
            None => (MISSING_ALPHA, [MISSING_3D; 7]),
        };
        let mut s = format!(
            "{} {} {} {} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            self.frame,
            self.track_id,
            self.category,
            self.truncated,
            self.occluded,
            alpha,
            b.left,
            b.top,
            b.right,
            b.bottom,
            h,
            w,
            l,
            x,
            y,
            z,
            ry
        );
        if let Some(score) = self.score {
            let _ = write!(s, " {score:.6}");
        }
        s
    }
}

/// `rot_y − atan2(x, z)`: the observation angle KITTI stores next to `rot_y`.
pub fn observation_angle(b: &Box3D) -> f64 {
    b.yaw - b.x.atan2(b.z)
}

pub struct LabelFile {
    pub rows: Vec<LabelRow>,
    /// Rows with track id −1 (`DontCare` regions), which are not returned.
    pub skipped: usize,
}

pub fn parse_labels(text: &str, path: &Path) -> Result<LabelFile> {
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (line_no, line) in content_lines(text) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let err = |message: String| Error::Parse {
            path: path.into(),
            line: line_no,
            message,
        };
        if parts.len() != 17 && parts.len() != 18 {
            return Err(err(format!("expected 17 or 18 fields, found {}", parts.len())));
        }
        let num = |i: usize| -> Result<f64> {
            parts[i]
                .parse::<f64>()
                .map_err(|_| err(format!("field {} is not a number: {:?}", i + 1, parts[i])))
        };
        let frame = num(0)?;
        let id = num(1)?;
        if id < 0.0 {
            skipped += 1;
            continue;
        }
        let frame = parse_frame(path, line_no, frame)?;
        let v: Vec<f64> = (3..parts.len()).map(num).collect::<Result<_>>()?;
        let bbox = Box2D::new(v[3], v[4], v[5], v[6]);
        if !bbox.is_valid() {
            return Err(err("degenerate 2D box".into()));
        }
        let [h, w, l, x, y, z, yaw] = [v[7], v[8], v[9], v[10], v[11], v[12], v[13]];
        let box3d = (h > 0.0 && w > 0.0 && l > 0.0 && h != MISSING_3D).then(|| Box3D {
            x,
            y,
            z,
            h,
            w,
            l,
            yaw,
        });
        rows.push(LabelRow {
            frame,
            track_id: id as u64,
            category: parts[2].to_string(),
            truncated: v[0],
            occluded: v[1] as i32,
            alpha: v[2],
            bbox,
            box3d,
            score: v.get(14).copied(),
        });
    }
    Ok(LabelFile { rows, skipped })
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelFile> {
    let path = path.as_ref();
    parse_labels(&read_text(path)?, path)
}

pub fn format_labels(rows: &[LabelRow]) -> String {
    let mut s = String::new();
    for r in rows {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

pub fn write_labels(path: impl AsRef<Path>, rows: &[LabelRow]) -> Result<()> {
    write_text(path.as_ref(), &format_labels(rows))
}

/// Converts tracker output into label rows sorted by frame, then id.
pub fn track_rows(outputs: &[FrameOutput]) -> Vec<LabelRow> {
    let mut rows: Vec<LabelRow> = outputs
        .iter()
        .flat_map(|fo| {
            fo.tracks.iter().map(move |t| LabelRow {
                frame: fo.frame,
                track_id: t.id,
                category: t.category.clone(),
                truncated: 0.0,
                occluded: 0,
                alpha: t.box3d.as_ref().map_or(MISSING_ALPHA, observation_angle),
                bbox: t.box2d,
                box3d: t.box3d,
                score: Some(t.score),
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.frame, r.track_id));
    rows
}

pub fn format_tracks(outputs: &[FrameOutput]) -> String {
    format_labels(&track_rows(outputs))
}

pub fn write_tracks(path: impl AsRef<Path>, outputs: &[FrameOutput]) -> Result<()> {
    write_text(path.as_ref(), &format_tracks(outputs))
}

/// Groups rows densely by frame.
pub fn group_by_frame(rows: Vec<LabelRow>) -> Vec<Vec<LabelRow>> {
    let mut out: Vec<Vec<LabelRow>> = Vec::new();
    for r in rows {
        if out.len() <= r.frame {
            out.resize_with(r.frame + 1, Vec::new);
        }
        let f = r.frame;
        out[f].push(r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::TrackOutput;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p() -> &'static Path {
        Path::new("test.txt")
    }

    #[test]
    fn detection_2d_line() {
        let g = parse_detections_2d("3,100.0,50.0,180.0,120.0,0.93\n", p()).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(
            g.frame(3),
            &[Detection2D {
                frame: 3,
                bbox: Box2D::new(100.0, 50.0, 180.0, 120.0),
                score: 0.93
            }]
        );
        assert!(g.frame(0).is_empty());
    }

    #[test]
    fn empty_file_is_empty_grouping() {
        let g = parse_detections_2d("", p()).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.accepted(), 0);
    }

    #[test]
    fn degenerate_2d_is_rejected_not_fatal() {
        let g = parse_detections_2d("3,180,50,100,120,0.9\n3,100,50,180,120,0.9\n", p()).unwrap();
        assert_eq!(g.accepted(), 1);
        assert_eq!(g.rejected.len(), 1);
        assert_eq!(g.rejected[0].line, 1);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = parse_detections_2d("0,1,2,3,4,0.5\n\n0,1,2,three,4,0.5\n", p()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        assert!(parse_detections_2d("0,1,2,3,4\n", p()).is_err());
    }

    #[test]
    fn frame_order_and_line_order_kept() {
        let g = parse_detections_2d("2,0,0,1,1,0.1\n0,0,0,1,1,0.2\n2,0,0,1,1,0.3\n", p()).unwrap();
        let scores: Vec<f64> = g.frame(2).iter().map(|d| d.score).collect();
        assert_eq!(scores, vec![0.1, 0.3]);
        assert_eq!(g.frame(0)[0].score, 0.2);
    }

    #[test]
    fn detection_3d_line_and_wrap() {
        let g = parse_detections_3d("0,1.5,1.6,3.9,2.0,1.7,15.0,0.1,0.88\n", p()).unwrap();
        let d = g.frame(0)[0];
        assert_eq!(
            d.bbox,
            Box3D { x: 2.0, y: 1.7, z: 15.0, h: 1.5, w: 1.6, l: 3.9, yaw: 0.1 }
        );
        assert_eq!(d.score, 0.88);
        let g = parse_detections_3d("0,1.5,1.6,3.9,2.0,1.7,15.0,3.5,0.88\n", p()).unwrap();
        assert!((g.frame(0)[0].bbox.yaw - (3.5 - 2.0 * PI)).abs() < 1e-12);
        assert!((g.frame(0)[0].bbox.yaw + 2.783).abs() < 1e-3);
        let g = parse_detections_3d("0,0.0,1.6,3.9,2.0,1.7,15.0,0.1,0.88\n", p()).unwrap();
        assert_eq!(g.accepted(), 0);
        assert_eq!(g.rejected.len(), 1);
    }

    #[test]
    fn calibration_identity_like() {
        let text = "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nP2: 700 0 600 0 0 700 180 0 0 0 1 0\n";
        let c = parse_calibration(text, p()).unwrap();
        assert_eq!(c.p2, CalibrationSet::pinhole(700.0, 600.0, 180.0).p2);
        assert_eq!(c.r_rect, Matrix3::identity());
        assert!(c.tr_velo_cam.is_none());
    }

    #[test]
    fn calibration_missing_p2() {
        let err = parse_calibration("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n", p()).unwrap_err();
        assert_eq!(err.to_string(), "calibration missing P2");
    }

    const SEQ0000_CALIB: &str = "\
P0: 7.215377e+02 0.000000e+00 6.095593e+02 0.000000e+00 0.000000e+00 7.215377e+02 1.728540e+02 0.000000e+00 0.000000e+00 0.000000e+00 1.000000e+00 0.000000e+00
P1: 7.215377e+02 0.000000e+00 6.095593e+02 -3.875744e+02 0.000000e+00 7.215377e+02 1.728540e+02 0.000000e+00 0.000000e+00 0.000000e+00 1.000000e+00 0.000000e+00
P2: 7.215377e+02 0.000000e+00 6.095593e+02 4.485728e+01 0.000000e+00 7.215377e+02 1.728540e+02 2.163791e-01 0.000000e+00 0.000000e+00 1.000000e+00 2.745884e-03
P3: 7.215377e+02 0.000000e+00 6.095593e+02 -3.395242e+02 0.000000e+00 7.215377e+02 1.728540e+02 2.199936e+00 0.000000e+00 0.000000e+00 1.000000e+00 2.729905e-03
R_rect 9.999239e-01 9.837760e-03 -7.445048e-03 -9.869795e-03 9.999421e-01 -4.278459e-03 7.402527e-03 4.351614e-03 9.999631e-01
Tr_velo_cam 7.533745e-03 -9.999714e-01 -6.166020e-04 -4.069766e-03 1.480249e-02 7.280733e-04 -9.998902e-01 -7.631618e-02 9.998621e-01 7.523790e-03 1.480755e-02 -2.717806e-01
Tr_imu_velo 9.999976e-01 7.553071e-04 -2.035826e-03 -8.086759e-01 -7.854027e-04 9.998898e-01 -1.482298e-02 3.195559e-01 2.024406e-03 1.482454e-02 9.998881e-01 -7.997231e-01
";

    #[test]
    fn calibration_round_trip() {
        let c = parse_calibration(SEQ0000_CALIB, p()).unwrap();
        assert_eq!(c.p2[(0, 3)], 44.85728);
        assert_eq!(c.r_rect[(0, 1)], 9.837760e-03);
        assert!(c.tr_velo_cam.is_some());
        let again = parse_calibration(&c.to_kitti_string(), p()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn lidar_conversion_requires_extrinsics() {
        let c = CalibrationSet::pinhole(700.0, 600.0, 180.0);
        let d = Detection3D {
            frame: 0,
            bbox: Box3D { x: 10.0, y: 0.0, z: 0.0, h: 1.5, w: 1.6, l: 3.9, yaw: 0.0 },
            score: 1.0,
        };
        assert!(d.lidar_to_camera(&c).is_err());
        let c = parse_calibration(SEQ0000_CALIB, p()).unwrap();
        let cam = d.lidar_to_camera(&c).unwrap();
        // 10 m ahead of the LiDAR is roughly 10 m down the optical axis
        assert!((cam.bbox.z - 9.73).abs() < 0.1, "{}", cam.bbox.z);
        assert!((cam.bbox.yaw + PI / 2.0).abs() < 1e-12);
    }

    fn output(frame: usize, id: u64, box3d: Option<Box3D>) -> FrameOutput {
        FrameOutput {
            frame,
            tracks: vec![TrackOutput {
                id,
                category: "Car".into(),
                box2d: Box2D::new(10.0, 20.0, 110.0, 90.0),
                box3d,
                score: 0.9,
            }],
        }
    }

    #[test]
    fn track_output_lines() {
        let b = Box3D { x: 2.0, y: 1.7, z: 15.0, h: 1.5, w: 1.6, l: 3.9, yaw: 0.1 };
        let text = format_tracks(&[output(0, 0, Some(b))]);
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("0 0 Car 0 0 "));
        let alpha = observation_angle(&b);
        assert!((alpha - (0.1 - 2.0f64.atan2(15.0))).abs() < 1e-15);
        assert!((alpha + 0.03255).abs() < 1e-5);
        let rows = parse_labels(&text, p()).unwrap().rows;
        assert!((rows[0].alpha - alpha).abs() < 1e-6);
        assert_eq!(rows[0].score, Some(0.9));
        assert_eq!(format_tracks(&[]), "");
    }

    #[test]
    fn two_d_only_rows_carry_sentinels() {
        let text = format_tracks(&[output(4, 7, None)]);
        assert!(text.contains(" -1000.000000 -1000.000000 -1000.000000"));
        let rows = parse_labels(&text, p()).unwrap().rows;
        assert_eq!(rows[0].box3d, None);
        assert_eq!(rows[0].track_id, 7);
    }

    #[test]
    fn tracks_sorted_by_frame_then_id() {
        let mut outs = vec![output(1, 5, None), output(0, 9, None)];
        let dup = TrackOutput { id: 2, ..outs[0].tracks[0].clone() };
        outs[0].tracks.push(dup);
        let rows = track_rows(&outs);
        let keys: Vec<(usize, u64)> = rows.iter().map(|r| (r.frame, r.track_id)).collect();
        assert_eq!(keys, vec![(0, 9), (1, 2), (1, 5)]);
    }

    #[test]
    fn dont_care_rows_skipped() {
        let text = "0 -1 DontCare -1 -1 -10 500 150 520 170 -1000 -1000 -1000 -1000 -1000 -1000 -10\n\
                    0 0 Van 0 0 -1.79 296.7 161.7 455.2 292.0 2.0 1.8 4.4 -4.5 1.8 13.4 -2.1\n";
        let f = parse_labels(text, p()).unwrap();
        assert_eq!(f.skipped, 1);
        assert_eq!(f.rows.len(), 1);
        assert_eq!(f.rows[0].category, "Van");
        assert_eq!(f.rows[0].score, None);
    }

    #[test]
    fn write_to_unwritable_path_fails() {
        let err = write_tracks("/nonexistent-dir/x/y.txt", &[]).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    fn arb_box3d() -> impl Strategy<Value = Box3D> {
        (
            -20.0..20.0f64,
            -2.0..3.0f64,
            1.0..80.0f64,
            0.5..4.0f64,
            0.5..3.0f64,
            0.5..12.0f64,
            -PI..PI,
        )
            .prop_map(|(x, y, z, h, w, l, yaw)| Box3D { x, y, z, h, w, l, yaw })
    }

    proptest! {
        #[test]
        fn detection_files_round_trip(
            dets in prop::collection::vec((0usize..30, arb_box3d(), 0.0..1.0f64), 0..40)
        ) {
            let mut groups: Vec<Vec<Detection3D>> = Vec::new();
            for (frame, bbox, score) in &dets {
                if groups.len() <= *frame { groups.resize_with(frame + 1, Vec::new); }
                groups[*frame].push(Detection3D { frame: *frame, bbox: *bbox, score: *score });
            }
            let text = format_detections_3d(&groups);
            let parsed = parse_detections_3d(&text, p()).unwrap();
            prop_assert_eq!(parsed.accepted(), dets.len());
            prop_assert_eq!(&parsed.frames, &groups);
            prop_assert!(parsed.frames.iter().flatten().all(|d| d.bbox.yaw.abs() <= PI));
        }

        #[test]
        fn label_files_reach_a_fixed_point(
            rows in prop::collection::vec((0usize..30, 0u64..50, prop::option::of(arb_box3d())), 0..30)
        ) {
            let rows: Vec<LabelRow> = rows.into_iter().map(|(frame, id, b)| LabelRow {
                frame,
                track_id: id,
                category: "Car".into(),
                truncated: 0.0,
                occluded: 0,
                alpha: b.as_ref().map_or(MISSING_ALPHA, observation_angle),
                bbox: Box2D::new(1.5, 2.25, 100.125, 80.0),
                box3d: b,
                score: Some(0.5),
            }).collect();
            let once = format_labels(&rows);
            let parsed = parse_labels(&once, p()).unwrap().rows;
            prop_assert_eq!(parsed.len(), rows.len());
            let twice = format_labels(&parsed);
            prop_assert_eq!(&once, &twice);
            let parsed_again = parse_labels(&twice, p()).unwrap().rows;
            prop_assert_eq!(parsed, parsed_again);
        }
    }
}
