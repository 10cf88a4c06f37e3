//! Flat `key = value` run configuration.
//!
//! Every recognised key is listed in [`KEYS`] with its default; anything else
//! is rejected. Files may contain blank lines and `#` comments.

use crate::filter::Motion2D;
use crate::geometry::ImageSize;
use crate::tracker::TrackerConfig;
use crate::{Error, Result};

/// Coordinate frame of the 3D detection files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFrame {
    /// Rectified camera coordinates, the KITTI label convention.
    #[default]
    Camera,
    /// LiDAR coordinates; converted with the calibration's `Tr_velo_cam`.
    Lidar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fusion_iou_threshold: f64,
    pub tracker: TrackerConfig,
    pub input_frame: InputFrame,
    pub image: ImageSize,
    pub eval_iou_gate: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fusion_iou_threshold: crate::fusion::DEFAULT_IOU_THRESHOLD,
            tracker: TrackerConfig::default(),
            input_frame: InputFrame::Camera,
            image: ImageSize::KITTI,
            eval_iou_gate: crate::metrics::DEFAULT_IOU_GATE,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KeyDoc {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const KEYS: &[KeyDoc] = &[
    KeyDoc { key: "fusion.iou_threshold", default: "0.5", help: "minimum 2D IoU between a projected 3D detection and a 2D detection to fuse them" },
    KeyDoc { key: "assoc.iou3d_gate", default: "0.1", help: "minimum 3D IoU for an overlap match" },
    KeyDoc { key: "assoc.dist_gate_m", default: "4", help: "maximum center distance (m) for a non-overlapping match" },
    KeyDoc { key: "assoc.iou2d_gate", default: "0.3", help: "minimum 2D IoU for image-domain matches and 2D/3D merges" },
    KeyDoc { key: "track.min_hits", default: "3", help: "consecutive matches before a tentative track is confirmed" },
    KeyDoc { key: "track.miss_to_reappear", default: "2", help: "misses a confirmed track tolerates before it turns reappeared" },
    KeyDoc { key: "track.max_age", default: "30", help: "misses after which a reappeared track is dropped" },
    KeyDoc { key: "output.coasting", default: "false", help: "also emit predicted boxes for unmatched confirmed/reappeared tracks" },
    KeyDoc { key: "2d_motion", default: "kalman", help: "motion model of image-only tracks: kalman or snap" },
    KeyDoc { key: "input_frame", default: "camera", help: "frame of the 3D detection files: camera or lidar" },
    KeyDoc { key: "category", default: "Car", help: "category label written to the result files" },
    KeyDoc { key: "image.width", default: "1242", help: "image width in pixels" },
    KeyDoc { key: "image.height", default: "375", help: "image height in pixels" },
    KeyDoc { key: "eval.iou_gate", default: "0.5", help: "minimum 2D IoU for a ground-truth match during evaluation" },
];

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = {value}: expected {what}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, what))
}

fn ratio(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value, "a number in [0, 1]")?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(bad(key, value, "a number in [0, 1]"))
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.tracker;
        match key {
            "fusion.iou_threshold" => self.fusion_iou_threshold = ratio(key, value)?,
            "assoc.iou3d_gate" => t.gates.iou3d = ratio(key, value)?,
            "assoc.dist_gate_m" => {
                let v: f64 = num(key, value, "a nonnegative distance")?;
                if !(v >= 0.0) {
                    return Err(bad(key, value, "a nonnegative distance"));
                }
                t.gates.max_distance = v;
            }
            "assoc.iou2d_gate" => t.iou2d_gate = ratio(key, value)?,
            "track.min_hits" => {
                t.min_hits = num(key, value, "a positive integer")?;
                if t.min_hits == 0 {
                    return Err(bad(key, value, "a positive integer"));
                }
            }
            "track.miss_to_reappear" => t.miss_to_reappear = num(key, value, "an integer")?,
            "track.max_age" => t.max_age = num(key, value, "an integer")?,
            "output.coasting" => t.coasting = num(key, value, "true or false")?,
            "2d_motion" => {
                t.motion_2d = match value {
                    "kalman" => Motion2D::Kalman,
                    "snap" => Motion2D::Snap,
                    _ => return Err(bad(key, value, "kalman or snap")),
                }
            }
            "input_frame" => {
                self.input_frame = match value {
                    "camera" => InputFrame::Camera,
                    "lidar" => InputFrame::Lidar,
                    _ => return Err(bad(key, value, "camera or lidar")),
                }
            }
            "category" => {
                if value.is_empty() || value.contains(char::is_whitespace) {
                    return Err(bad(key, value, "a single word"));
                }
                t.category = value.to_string();
            }
            "image.width" => self.image.width = positive_px(key, value)?,
            "image.height" => self.image.height = positive_px(key, value)?,
            "eval.iou_gate" => self.eval_iou_gate = ratio(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Current value of `key`, formatted the way [`RunConfig::set`] reads it.
    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.tracker;
        Some(match key {
            "fusion.iou_threshold" => self.fusion_iou_threshold.to_string(),
            "assoc.iou3d_gate" => t.gates.iou3d.to_string(),
            "assoc.dist_gate_m" => t.gates.max_distance.to_string(),
            "assoc.iou2d_gate" => t.iou2d_gate.to_string(),
            "track.min_hits" => t.min_hits.to_string(),
            "track.miss_to_reappear" => t.miss_to_reappear.to_string(),
            "track.max_age" => t.max_age.to_string(),
            "output.coasting" => t.coasting.to_string(),
            "2d_motion" => match t.motion_2d {
                Motion2D::Kalman => "kalman",
                Motion2D::Snap => "snap",
            }
            .to_string(),
            "input_frame" => match self.input_frame {
                InputFrame::Camera => "camera",
                InputFrame::Lidar => "lidar",
            }
            .to_string(),
            "category" => t.category.clone(),
            "image.width" => self.image.width.to_string(),
            "image.height" => self.image.height.to_string(),
            "eval.iou_gate" => self.eval_iou_gate.to_string(),
            _ => return None,
        })
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_assignment(line).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{} = {}\n", k.key, self.get(k.key).expect("listed key")))
            .collect()
    }
}

fn positive_px(key: &str, value: &str) -> Result<u32> {
    match value.parse::<u32>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(bad(key, value, "a positive pixel count")),
    }
}

/// Splits `key=value` (whitespace around either side is ignored).
pub fn split_assignment(s: &str) -> std::result::Result<(&str, &str), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(format!("missing key in `{s}`"));
    }
    Ok((k, v))
}
