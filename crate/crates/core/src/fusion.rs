//! Per-frame pairing of camera and LiDAR detections.
//!
//! Every 3D detection is projected into the image; projected boxes and 2D
//! detections are paired one-to-one by max-weight assignment on 2D IoU, and a
//! pair is fused when its IoU exceeds the threshold. Everything else is
//! reported as camera-only or LiDAR-only.

use crate::assignment::max_weight_matching;
use crate::geometry::{iou_2d, project_box3d, Box2D, ImageSize};
use crate::kitti::{CalibrationSet, Detection2D, Detection3D};
use nalgebra::DMatrix;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedDetection {
    pub det3d: Detection3D,
    pub det2d: Detection2D,
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameDetections {
    pub fused: Vec<FusedDetection>,
    pub only_2d: Vec<Detection2D>,
    pub only_3d: Vec<Detection3D>,
}

impl FrameDetections {
    pub fn is_empty(&self) -> bool {
        self.fused.is_empty() && self.only_2d.is_empty() && self.only_3d.is_empty()
    }
}

pub fn fuse_frame(
    dets2d: &[Detection2D],
    dets3d: &[Detection3D],
    calib: &CalibrationSet,
    image: ImageSize,
    iou_threshold: f64,
) -> FrameDetections {
    let projected: Vec<Option<Box2D>> = dets3d
        .iter()
        .map(|d| project_box3d(&d.bbox, calib, image))
        .collect();
    // Only projectable 3D detections take part in the assignment.
    let candidates: Vec<usize> = (0..dets3d.len()).filter(|&i| projected[i].is_some()).collect();

    let iou = DMatrix::from_fn(candidates.len(), dets2d.len(), |r, c| {
        let p = projected[candidates[r]].as_ref().expect("filtered above");
        iou_2d(p, &dets2d[c].bbox)
    });

    let mut used3d = vec![false; dets3d.len()];
    let mut used2d = vec![false; dets2d.len()];
    let mut fused = Vec::new();
    for (r, c) in max_weight_matching(&iou) {
        let v = iou[(r, c)];
        if v > iou_threshold {
            let i = candidates[r];
            used3d[i] = true;
            used2d[c] = true;
            fused.push(FusedDetection {
                det3d: dets3d[i],
                det2d: dets2d[c],
                iou: v,
            });
        }
    }

    FrameDetections {
        fused,
        only_2d: dets2d
            .iter()
            .zip(&used2d)
            .filter(|(_, &u)| !u)
            .map(|(d, _)| *d)
            .collect(),
        only_3d: dets3d
            .iter()
            .zip(&used3d)
            .filter(|(_, &u)| !u)
            .map(|(d, _)| *d)
            .collect(),
    }
}
