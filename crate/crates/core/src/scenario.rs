//! Deterministic synthetic scenes: ground truth plus simulated camera and
//! LiDAR detections.
//!
//! Objects move at constant velocity in the rectified camera frame. Every
//! frame an object is labeled when it projects into the image and lies within
//! camera range. It is seen by the camera unless occluded or dropped, and by
//! the LiDAR when additionally within LiDAR range. Randomness is drawn from a
//! generator keyed by `(seed, object, frame)`: the dropout draw comes first,
//! then the noise, so changing one object or one probability leaves every
//! other draw untouched.
//!
//! Scenario files are flat `key = value` text:
//!
//! ```text
//! frames = 120
//! seed = 7
//! camera_range = 80
//! lidar_range = 40
//! noise_px = 1
//! noise_m = 0.05
//! dropout = 0
//! object = birth=7 x=1.5 y=1.7 z=73.5 yaw=-1.5708 vz=-1.3 h=1.5 w=1.6 l=3.9
//! occlusion = 0 65 70
//! ```
//!
//! `object` lines accept `birth death x y z yaw vx vy vz h w l`, all optional
//! (defaults: born at 0, never removed, a 1.5 × 1.6 × 3.9 m car at the origin
//! facing +z, at rest). Objects are numbered in file order. `occlusion` takes
//! an object number and an inclusive frame interval. `image_width` and
//! `image_height` default to the KITTI image size.

use crate::geometry::{project_box3d, Box2D, Box3D, ImageSize};
use crate::kitti::{
    observation_angle, write_calibration, write_detections_2d, write_detections_3d, write_labels, CalibrationSet,
    Detection2D, Detection3D, LabelRow,
};
use crate::{Error, Result};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

/// Camera intrinsics of the synthetic rig (KITTI camera 2 focal length and
/// principal point).
pub const FOCAL: f64 = 721.5377;
pub const PRINCIPAL: (f64, f64) = (609.5593, 172.854);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub birth: usize,
    /// First frame the object no longer exists.
    pub death: Option<usize>,
    pub pose: Box3D,
    /// Displacement per frame, meters.
    pub velocity: Vector3<f64>,
}

impl ObjectSpec {
    pub fn car(x: f64, z: f64, velocity: [f64; 3]) -> Self {
        Self {
            birth: 0,
            death: None,
            pose: Box3D { x, y: 1.7, z, h: 1.5, w: 1.6, l: 3.9, yaw: -FRAC_PI_2 },
            velocity: Vector3::from(velocity),
        }
    }

    pub fn alive(&self, frame: usize) -> bool {
        frame >= self.birth && self.death.map_or(true, |d| frame < d)
    }

    pub fn box_at(&self, frame: usize) -> Box3D {
        let dt = frame as f64 - self.birth as f64;
        let v = self.velocity * dt;
        self.pose.translated(v.x, v.y, v.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occlusion {
    pub object: usize,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub frames: usize,
    pub objects: Vec<ObjectSpec>,
    /// Largest depth (m) at which the camera detects an object.
    pub camera_range: f64,
    /// Largest depth (m) at which the LiDAR detects an object.
    pub lidar_range: f64,
    pub occlusions: Vec<Occlusion>,
    /// Per-edge noise sigma of 2D boxes, pixels.
    pub noise_px: f64,
    /// Per-axis noise sigma of 3D box centers, meters.
    pub noise_m: f64,
    pub dropout: f64,
    pub seed: u64,
    pub image: ImageSize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            frames: 100,
            objects: Vec::new(),
            camera_range: 80.0,
            lidar_range: 40.0,
            occlusions: Vec::new(),
            noise_px: 0.0,
            noise_m: 0.0,
            dropout: 0.0,
            seed: 0,
            image: ImageSize::KITTI,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    /// Ground truth per frame; `track_id` is the object number.
    pub gt: Vec<Vec<LabelRow>>,
    pub dets2d: Vec<Vec<Detection2D>>,
    pub dets3d: Vec<Vec<Detection3D>>,
    /// Object number behind each entry of `dets2d`.
    pub sources2d: Vec<Vec<usize>>,
    pub sources3d: Vec<Vec<usize>>,
    pub calib: CalibrationSet,
    pub image: ImageSize,
}

pub fn synthetic_calibration() -> CalibrationSet {
    CalibrationSet::pinhole(FOCAL, PRINCIPAL.0, PRINCIPAL.1)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(self.lidar_range <= self.camera_range) {
            return err(format!(
                "lidar_range {} must not exceed camera_range {}",
                self.lidar_range, self.camera_range
            ));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return err(format!("dropout {} outside [0, 1]", self.dropout));
        }
        if !(self.noise_px >= 0.0 && self.noise_m >= 0.0) {
            return err("noise sigmas must be nonnegative".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            let b = &o.pose;
            if !(b.h > 0.0 && b.w > 0.0 && b.l > 0.0) {
                return err(format!("object {i}: dimensions must be positive"));
            }
            let finite = [b.x, b.y, b.z, b.yaw, o.velocity.x, o.velocity.y, o.velocity.z];
            if finite.iter().any(|v| !v.is_finite()) {
                return err(format!("object {i}: non-finite pose or velocity"));
            }
        }
        for w in &self.occlusions {
            if w.object >= self.objects.len() || w.start > w.end {
                return err(format!("bad occlusion window {} {} {}", w.object, w.start, w.end));
            }
        }
        Ok(())
    }

    fn occluded(&self, object: usize, frame: usize) -> bool {
        self.occlusions
            .iter()
            .any(|w| w.object == object && (w.start..=w.end).contains(&frame))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |m: String| Error::Config(format!("scenario line {}: {m}", n + 1));
            let (k, v) = crate::config::split_assignment(line).map_err(fail)?;
            let f64_of = |v: &str| v.parse::<f64>().map_err(|_| fail(format!("`{v}` is not a number")));
            let usize_of = |v: &str| v.parse::<usize>().map_err(|_| fail(format!("`{v}` is not a count")));
            match k {
                "frames" => cfg.frames = usize_of(v)?,
                "seed" => cfg.seed = v.parse().map_err(|_| fail(format!("`{v}` is not a seed")))?,
                "camera_range" => cfg.camera_range = f64_of(v)?,
                "lidar_range" => cfg.lidar_range = f64_of(v)?,
                "noise_px" => cfg.noise_px = f64_of(v)?,
                "noise_m" => cfg.noise_m = f64_of(v)?,
                "dropout" => cfg.dropout = f64_of(v)?,
                "image_width" => cfg.image.width = v.parse().map_err(|_| fail(format!("`{v}` is not a width")))?,
                "image_height" => cfg.image.height = v.parse().map_err(|_| fail(format!("`{v}` is not a height")))?,
                "object" => {
                    let mut o = ObjectSpec::car(0.0, 0.0, [0.0; 3]);
                    for field in v.split_whitespace() {
                        let (fk, fv) = field
                            .split_once('=')
                            .ok_or_else(|| fail(format!("expected name=value, got `{field}`")))?;
                        match fk {
                            "birth" => o.birth = usize_of(fv)?,
                            "death" => o.death = Some(usize_of(fv)?),
                            "x" => o.pose.x = f64_of(fv)?,
                            "y" => o.pose.y = f64_of(fv)?,
                            "z" => o.pose.z = f64_of(fv)?,
                            "yaw" => o.pose.yaw = f64_of(fv)?,
                            "h" => o.pose.h = f64_of(fv)?,
                            "w" => o.pose.w = f64_of(fv)?,
                            "l" => o.pose.l = f64_of(fv)?,
                            "vx" => o.velocity.x = f64_of(fv)?,
                            "vy" => o.velocity.y = f64_of(fv)?,
                            "vz" => o.velocity.z = f64_of(fv)?,
                            _ => return Err(fail(format!("unknown object field `{fk}`"))),
                        }
                    }
                    cfg.objects.push(o);
                }
                "occlusion" => {
                    let parts: Vec<&str> = v.split_whitespace().collect();
                    let [o, s, e] = parts[..] else {
                        return Err(fail("occlusion takes: object start end".into()));
                    };
                    cfg.occlusions.push(Occlusion {
                        object: usize_of(o)?,
                        start: usize_of(s)?,
                        end: usize_of(e)?,
                    });
                }
                _ => return Err(fail(format!("unknown key `{k}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "frames = {}\nseed = {}\ncamera_range = {}\nlidar_range = {}\nnoise_px = {}\nnoise_m = {}\ndropout = {}\nimage_width = {}\nimage_height = {}\n",
            self.frames,
            self.seed,
            self.camera_range,
            self.lidar_range,
            self.noise_px,
            self.noise_m,
            self.dropout,
            self.image.width,
            self.image.height
        );
        for o in &self.objects {
            let (b, v) = (&o.pose, &o.velocity);
            let _ = write!(s, "object = birth={}", o.birth);
            if let Some(d) = o.death {
                let _ = write!(s, " death={d}");
            }
            let _ = writeln!(
                s,
                " x={} y={} z={} yaw={} vx={} vy={} vz={} h={} w={} l={}",
                b.x, b.y, b.z, b.yaw, v.x, v.y, v.z, b.h, b.w, b.l
            );
        }
        for w in &self.occlusions {
            let _ = writeln!(s, "occlusion = {} {} {}", w.object, w.start, w.end);
        }
        s
    }
}

fn frame_rng(seed: u64, object: usize, frame: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(object as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(frame as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Standard normal draw rejected outside ±3.
fn truncated_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v: f64 = StandardNormal.sample(rng);
        if v.abs() <= 3.0 {
            return v;
        }
    }
}

pub fn generate(cfg: &ScenarioConfig) -> ScenarioBundle {
    let calib = synthetic_calibration();
    let n = cfg.frames;
    let mut b = ScenarioBundle {
        gt: vec![Vec::new(); n],
        dets2d: vec![Vec::new(); n],
        dets3d: vec![Vec::new(); n],
        sources2d: vec![Vec::new(); n],
        sources3d: vec![Vec::new(); n],
        calib,
        image: cfg.image,
    };
    for frame in 0..n {
        for (id, obj) in cfg.objects.iter().enumerate() {
            if !obj.alive(frame) {
                continue;
            }
            let truth = obj.box_at(frame);
            let Some(proj) = project_box3d(&truth, &b.calib, cfg.image) else { continue };
            if truth.z > cfg.camera_range {
                continue;
            }
            let occluded = cfg.occluded(id, frame);
            b.gt[frame].push(LabelRow {
                frame,
                track_id: id as u64,
                category: "Car".into(),
                truncated: 0.0,
                occluded: if occluded { 2 } else { 0 },
                alpha: observation_angle(&truth),
                bbox: proj,
                box3d: Some(truth),
                score: None,
            });

            let mut rng = frame_rng(cfg.seed, id, frame);
            let dropped = rng.random::<f64>() < cfg.dropout;
            if occluded || dropped {
                continue;
            }
            let mut jitter = |sigma: f64| if sigma > 0.0 { sigma * truncated_normal(&mut rng) } else { 0.0 };
            let noisy = Box2D::new(
                proj.left + jitter(cfg.noise_px),
                proj.top + jitter(cfg.noise_px),
                proj.right + jitter(cfg.noise_px),
                proj.bottom + jitter(cfg.noise_px),
            );
            if noisy.is_valid() {
                b.dets2d[frame].push(Detection2D { frame, bbox: noisy, score: 1.0 });
                b.sources2d[frame].push(id);
            }
            if truth.z <= cfg.lidar_range {
                let shifted = truth.translated(jitter(cfg.noise_m), jitter(cfg.noise_m), jitter(cfg.noise_m));
                b.dets3d[frame].push(Detection3D { frame, bbox: shifted, score: 1.0 });
                b.sources3d[frame].push(id);
            }
        }
    }
    b
}

impl ScenarioBundle {
    /// Writes `dets2d/`, `dets3d/`, `calib/` and `label_02/` files named
    /// `<seq>.txt` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, seq: &str) -> Result<()> {
        let dir = dir.as_ref();
        for sub in ["dets2d", "dets3d", "calib", "label_02"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let file = format!("{seq}.txt");
        write_detections_2d(dir.join("dets2d").join(&file), &self.dets2d)?;
        write_detections_3d(dir.join("dets3d").join(&file), &self.dets3d)?;
        write_calibration(dir.join("calib").join(&file), &self.calib)?;
        let rows: Vec<LabelRow> = self.gt.iter().flatten().cloned().collect();
        write_labels(dir.join("label_02").join(&file), &rows)
    }
}

/// Ready-made scenes used by the tests, the guide and `synth --preset`.
pub mod presets {
    use super::*;

    /// One car approaching from beyond LiDAR range: first labeled at frame 7,
    /// first inside LiDAR range at frame 33.
    pub fn handover() -> ScenarioConfig {
        ScenarioConfig {
            frames: 60,
            objects: vec![ObjectSpec {
                birth: 7,
                ..ObjectSpec::car(1.5, 73.5, [0.0, 0.0, -1.3])
            }],
            noise_px: 1.0,
            noise_m: 0.05,
            seed: 3,
            ..ScenarioConfig::default()
        }
    }

    /// One car crossing the view at 20 m, hidden for frames 65..=70.
    pub fn occlusion() -> ScenarioConfig {
        ScenarioConfig {
            frames: 90,
            objects: vec![ObjectSpec::car(-9.0, 20.0, [0.2, 0.0, 0.0])],
            occlusions: vec![Occlusion { object: 0, start: 65, end: 70 }],
            noise_px: 1.0,
            noise_m: 0.05,
            seed: 4,
            ..ScenarioConfig::default()
        }
    }

    /// Two cars crossing each other's line of sight at different depths.
    pub fn crossing() -> ScenarioConfig {
        ScenarioConfig {
            frames: 80,
            objects: vec![
                ObjectSpec::car(-8.0, 18.0, [0.2, 0.0, 0.0]),
                ObjectSpec::car(8.0, 28.0, [-0.2, 0.0, 0.0]),
            ],
            ..ScenarioConfig::default()
        }
    }

    /// Five cars in separate lanes that stay within LiDAR range for 200
    /// frames; no noise, no dropout.
    pub fn perfect() -> ScenarioConfig {
        ScenarioConfig {
            frames: 200,
            objects: vec![
                ObjectSpec::car(-6.0, 12.0, [0.0, 0.0, 0.1]),
                ObjectSpec::car(-2.0, 30.0, [0.0, 0.0, -0.08]),
                ObjectSpec::car(3.0, 15.0, [0.0, 0.0, 0.05]),
                ObjectSpec::car(8.0, 35.0, [0.0, 0.0, -0.1]),
                ObjectSpec::car(12.0, 25.0, [0.0, 0.0, 0.02]),
            ],
            ..ScenarioConfig::default()
        }
    }

    /// `objects` slow cars on a grid of lanes and depths, all visible to both
    /// sensors for the whole run.
    pub fn traffic(objects: usize, frames: usize, seed: u64) -> ScenarioConfig {
        let lanes = [-10.5, -7.0, -3.5, 0.0, 3.5, 7.0, 10.5];
        let objects = (0..objects)
            .map(|i| {
                let lane = lanes[i % lanes.len()];
                let row = (i / lanes.len()) as f64;
                let z = 12.0 + 8.0 * row;
                let vz = if i % 2 == 0 { 0.005 } else { -0.005 };
                ObjectSpec::car(lane, z, [0.0, 0.0, vz])
            })
            .collect();
        ScenarioConfig {
            frames,
            objects,
            camera_range: 80.0,
            lidar_range: 80.0,
            noise_px: 1.0,
            noise_m: 0.05,
            seed,
            ..ScenarioConfig::default()
        }
    }
}
