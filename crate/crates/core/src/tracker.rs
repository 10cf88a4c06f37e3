//! The per-frame association cascade and track lifecycle.
//!
//! Each [`Tracker::step`] runs, in order:
//!
//! 1. predict every filter once;
//! 2. **level 1**: 3D tracks against fused detections (3D IoU, falling back to
//!    center distance); unmatched fused detections start confirmed 3D tracks;
//! 3. **level 2**: the 3D tracks left over against LiDAR-only detections with
//!    the same affinity; unmatched LiDAR-only detections start tentative 3D
//!    tracks;
//! 4. **level 3**: image-only tracks against camera-only detections (2D IoU);
//!    unmatched camera-only detections start tentative image-only tracks;
//! 5. **level 4**: 3D tracks not matched to an existing detection this frame,
//!    including the ones just born, are projected into the image and paired
//!    with image-only tracks by 2D IoU; each pair merges into one 3D track that
//!    keeps the older identity;
//! 6. lifecycle update and output.

use crate::association::{build_similarity, solve_gated_assignment, solve_iou_assignment, Gates};
use crate::filter::{Filter2D, Filter3D, Motion2D, Noise2D, Noise3D};
use crate::fusion::{fuse_frame, FrameDetections};
use crate::geometry::{iou_2d, project_box3d, Box2D, Box3D, ImageSize};
use crate::kitti::{CalibrationSet, Detection2D, Detection3D};
use crate::{Error, Result};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackState {
    Tentative,
    Confirmed,
    /// Confirmed track that has gone unmatched for a while and is waiting to
    /// be picked up again.
    Reappeared,
    Dead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackMode {
    /// Image-only trajectory driven by a 2D filter.
    TwoD,
    ThreeD,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub gates: Gates,
    pub iou2d_gate: f64,
    pub min_hits: u32,
    pub miss_to_reappear: u32,
    pub max_age: u32,
    /// Emit predicted boxes for confirmed/reappeared tracks that went
    /// unmatched this frame.
    pub coasting: bool,
    pub motion_2d: Motion2D,
    pub noise_3d: Noise3D,
    pub noise_2d: Noise2D,
    pub category: String,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            gates: Gates::default(),
            iou2d_gate: 0.3,
            min_hits: 3,
            miss_to_reappear: 2,
            max_age: 30,
            coasting: false,
            motion_2d: Motion2D::Kalman,
            noise_3d: Noise3D::default(),
            noise_2d: Noise2D::default(),
            category: "Car".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    pub filter3d: Option<Filter3D>,
    pub filter2d: Option<Filter2D>,
    /// Consecutive frames matched.
    pub hits: u32,
    /// Consecutive frames unmatched.
    pub misses: u32,
    /// Frames since birth.
    pub age: u32,
    pub birth_frame: usize,
    /// Current image box: detection, filter estimate or projection.
    pub box2d: Option<Box2D>,
    pub box3d: Option<Box3D>,
    pub category: String,
    pub score: f64,
    matched: bool,
    born: bool,
}

impl Track {
    pub fn mode(&self) -> TrackMode {
        if self.filter3d.is_some() {
            TrackMode::ThreeD
        } else {
            TrackMode::TwoD
        }
    }

    /// Whether a detection was associated to this track in the last step.
    pub fn matched(&self) -> bool {
        self.matched
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub id: u64,
    pub category: String,
    pub box2d: Box2D,
    pub box3d: Option<Box3D>,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutput {
    pub frame: usize,
    pub tracks: Vec<TrackOutput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub id: u64,
    pub from: TrackState,
    pub to: TrackState,
}

/// Bookkeeping of the most recent step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepSummary {
    pub level1_matches: usize,
    pub level2_matches: usize,
    pub level3_matches: usize,
    pub merges: usize,
    /// Ids retired by level-4 merges.
    pub retired: Vec<u64>,
    pub births: Vec<u64>,
    pub transitions: Vec<Transition>,
}

pub struct Tracker {
    config: TrackerConfig,
    calib: CalibrationSet,
    image: ImageSize,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<usize>,
    summary: StepSummary,
}

impl Tracker {
    pub fn new(config: TrackerConfig, calib: CalibrationSet, image: ImageSize) -> Self {
        Self {
            config,
            calib,
            image,
            tracks: Vec::new(),
            next_id: 0,
            last_frame: None,
            summary: StepSummary::default(),
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live tracks after the last step, in birth order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn last_summary(&self) -> &StepSummary {
        &self.summary
    }

    pub fn step(&mut self, frame: usize, fd: &FrameDetections) -> Result<FrameOutput> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::FrameOrder { last, got: frame });
            }
        }
        self.last_frame = Some(frame);
        self.summary = StepSummary::default();

        self.predict();
        let level4_3d = self.level1_and_2(frame, fd);
        self.level3(frame, &fd.only_2d);
        self.level4(level4_3d);
        self.update_lifecycle();
        Ok(self.output(frame))
    }

    fn project(&self, b: &Box3D) -> Option<Box2D> {
        project_box3d(b, &self.calib, self.image)
    }

    fn predict(&mut self) {
        for i in 0..self.tracks.len() {
            let t = &mut self.tracks[i];
            t.matched = false;
            t.born = false;
            t.age += 1;
            if let Some(f) = t.filter3d.as_mut() {
                let b = f.predict();
                t.box3d = Some(b);
                let p = project_box3d(&b, &self.calib, self.image);
                self.tracks[i].box2d = p;
            } else if let Some(f) = t.filter2d.as_mut() {
                t.box2d = Some(f.predict());
            }
        }
    }

    fn spawn_3d(&mut self, frame: usize, det: &Detection3D, box2d: Option<Box2D>, state: TrackState) -> usize {
        let id = self.next_id;
        self.next_id += 1;
        self.summary.births.push(id);
        let box2d = box2d.or_else(|| self.project(&det.bbox));
        self.tracks.push(Track {
            id,
            state,
            filter3d: Some(Filter3D::new(&det.bbox, &self.config.noise_3d)),
            filter2d: None,
            hits: 0,
            misses: 0,
            age: 0,
            birth_frame: frame,
            box2d,
            box3d: Some(det.bbox),
            category: self.config.category.clone(),
            score: det.score,
            matched: true,
            born: true,
        });
        self.tracks.len() - 1
    }

    fn spawn_2d(&mut self, frame: usize, det: &Detection2D) {
        let id = self.next_id;
        self.next_id += 1;
        self.summary.births.push(id);
        self.tracks.push(Track {
            id,
            state: TrackState::Tentative,
            filter3d: None,
            filter2d: Some(Filter2D::new(&det.bbox, &self.config.noise_2d, self.config.motion_2d)),
            hits: 0,
            misses: 0,
            age: 0,
            birth_frame: frame,
            box2d: Some(det.bbox),
            box3d: None,
            category: self.config.category.clone(),
            score: det.score,
            matched: true,
            born: true,
        });
    }

    fn update_3d(&mut self, idx: usize, det: &Detection3D, box2d: Option<Box2D>) {
        let t = &mut self.tracks[idx];
        let f = t.filter3d.as_mut().expect("3D track has a 3D filter");
        f.update(&det.bbox);
        let b = f.bbox();
        t.box3d = Some(b);
        t.score = det.score;
        t.matched = true;
        t.box2d = box2d.or_else(|| project_box3d(&b, &self.calib, self.image));
    }

    /// Runs levels 1 and 2; returns the indices of 3D tracks that enter level 4.
    fn level1_and_2(&mut self, frame: usize, fd: &FrameDetections) -> Vec<usize> {
        let tracks3d: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].mode() == TrackMode::ThreeD)
            .collect();
        let mut level4 = Vec::new();

        // Level 1: fused detections.
        let dets: Vec<Box3D> = fd.fused.iter().map(|f| f.det3d.bbox).collect();
        let preds: Vec<Box3D> = tracks3d.iter().map(|&i| self.predicted_3d(i)).collect();
        let r1 = solve_gated_assignment(&build_similarity(&dets, &preds), &self.config.gates);
        for &(d, t) in &r1.matches {
            let f = &fd.fused[d];
            self.update_3d(tracks3d[t], &f.det3d, Some(f.det2d.bbox));
        }
        self.summary.level1_matches = r1.matches.len();
        for &d in &r1.unmatched_dets {
            let f = &fd.fused[d];
            let idx = self.spawn_3d(frame, &f.det3d, Some(f.det2d.bbox), TrackState::Confirmed);
            level4.push(idx);
        }

        // Level 2: LiDAR-only detections against what level 1 left over.
        let pool: Vec<usize> = r1.unmatched_tracks.iter().map(|&t| tracks3d[t]).collect();
        let dets: Vec<Box3D> = fd.only_3d.iter().map(|d| d.bbox).collect();
        let preds: Vec<Box3D> = pool.iter().map(|&i| self.predicted_3d(i)).collect();
        let r2 = solve_gated_assignment(&build_similarity(&dets, &preds), &self.config.gates);
        for &(d, t) in &r2.matches {
            self.update_3d(pool[t], &fd.only_3d[d], None);
        }
        self.summary.level2_matches = r2.matches.len();
        level4.extend(r2.unmatched_tracks.iter().map(|&t| pool[t]));
        for &d in &r2.unmatched_dets {
            let idx = self.spawn_3d(frame, &fd.only_3d[d], None, TrackState::Tentative);
            level4.push(idx);
        }
        level4
    }

    fn predicted_3d(&self, idx: usize) -> Box3D {
        self.tracks[idx].box3d.expect("3D track has a box")
    }

    fn level3(&mut self, frame: usize, only_2d: &[Detection2D]) {
        let tracks2d: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].mode() == TrackMode::TwoD)
            .collect();
        let iou = DMatrix::from_fn(only_2d.len(), tracks2d.len(), |d, t| {
            self.tracks[tracks2d[t]]
                .box2d
                .map_or(0.0, |b| iou_2d(&only_2d[d].bbox, &b))
        });
        let r = solve_iou_assignment(&iou, self.config.iou2d_gate);
        for &(d, t) in &r.matches {
            let track = &mut self.tracks[tracks2d[t]];
            let f = track.filter2d.as_mut().expect("2D track has a 2D filter");
            f.update(&only_2d[d].bbox);
            track.box2d = Some(f.bbox());
            track.score = only_2d[d].score;
            track.matched = true;
        }
        self.summary.level3_matches = r.matches.len();
        for &d in &r.unmatched_dets {
            self.spawn_2d(frame, &only_2d[d]);
        }
    }

    fn level4(&mut self, candidates: Vec<usize>) {
        let tracks2d: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].mode() == TrackMode::TwoD)
            .collect();
        if candidates.is_empty() || tracks2d.is_empty() {
            return;
        }
        let projected: Vec<Option<Box2D>> = candidates
            .iter()
            .map(|&i| self.project(&self.predicted_3d(i)))
            .collect();
        let iou = DMatrix::from_fn(candidates.len(), tracks2d.len(), |c, t| {
            match (&projected[c], &self.tracks[tracks2d[t]].box2d) {
                (Some(p), Some(b)) => iou_2d(p, b),
                _ => 0.0,
            }
        });
        let r = solve_iou_assignment(&iou, self.config.iou2d_gate);
        let mut retired = Vec::new();
        for &(c, t) in &r.matches {
            let (i3, i2) = (candidates[c], tracks2d[t]);
            retired.push(self.merge(i3, i2));
        }
        self.summary.merges = r.matches.len();
        retired.sort_unstable_by(|a, b| b.cmp(a));
        for idx in retired {
            let t = self.tracks.remove(idx);
            self.summary.retired.push(t.id);
        }
    }

    /// Folds a 3D track and an image-only track into one 3D track; returns the
    /// index of the track to drop.
    fn merge(&mut self, i3: usize, i2: usize) -> usize {
        let two = self.tracks[i2].clone();
        let three = &self.tracks[i3];
        // The older trajectory carries the identity; on a tie, the image one.
        let keep_2d_identity = two.birth_frame <= three.birth_frame;
        let (keeper, donor) = if keep_2d_identity { (i2, i3) } else { (i3, i2) };

        let filter3d = self.tracks[i3].filter3d.clone();
        let box3d = self.tracks[i3].box3d;
        let box2d = if two.matched { two.box2d } else { self.tracks[i3].box2d };
        let matched = two.matched || self.tracks[i3].matched;
        let score = if self.tracks[i3].matched || !two.matched {
            self.tracks[i3].score
        } else {
            two.score
        };

        let k = &mut self.tracks[keeper];
        k.filter3d = filter3d;
        k.filter2d = None;
        k.box3d = box3d;
        k.box2d = box2d;
        k.matched = matched;
        k.score = score;
        donor
    }

    fn update_lifecycle(&mut self) {
        let cfg = &self.config;
        for t in &mut self.tracks {
            let from = t.state;
            if t.matched {
                t.misses = 0;
                t.hits += 1;
                t.state = match t.state {
                    TrackState::Tentative if t.hits >= cfg.min_hits => TrackState::Confirmed,
                    TrackState::Reappeared => TrackState::Confirmed,
                    s => s,
                };
            } else {
                t.hits = 0;
                t.misses += 1;
                t.state = match t.state {
                    TrackState::Tentative => TrackState::Dead,
                    TrackState::Confirmed if t.misses > cfg.miss_to_reappear => TrackState::Reappeared,
                    TrackState::Reappeared if t.misses > cfg.max_age => TrackState::Dead,
                    s => s,
                };
            }
            if from != t.state && !t.born {
                self.summary.transitions.push(Transition {
                    id: t.id,
                    from,
                    to: t.state,
                });
            }
        }
        self.tracks.retain(|t| t.state != TrackState::Dead);
    }

    fn output(&self, frame: usize) -> FrameOutput {
        let mut tracks: Vec<TrackOutput> = self
            .tracks
            .iter()
            .filter(|t| match t.state {
                TrackState::Confirmed => t.matched || self.config.coasting,
                TrackState::Reappeared => self.config.coasting,
                _ => false,
            })
            .filter_map(|t| {
                Some(TrackOutput {
                    id: t.id,
                    category: t.category.clone(),
                    box2d: t.box2d?,
                    box3d: t.box3d,
                    score: t.score,
                })
            })
            .collect();
        tracks.sort_by_key(|t| t.id);
        FrameOutput { frame, tracks }
    }
}

/// Fuses and tracks a whole sequence, one step per frame index from 0 to the
/// last frame that has any detection.
pub fn run_sequence(
    dets2d: &[Vec<Detection2D>],
    dets3d: &[Vec<Detection3D>],
    calib: &CalibrationSet,
    image: ImageSize,
    fusion_threshold: f64,
    config: &TrackerConfig,
) -> Vec<FrameOutput> {
    let frames = dets2d.len().max(dets3d.len());
    let mut tracker = Tracker::new(config.clone(), calib.clone(), image);
    let empty2d: Vec<Detection2D> = Vec::new();
    let empty3d: Vec<Detection3D> = Vec::new();
    (0..frames)
        .map(|k| {
            let d2 = dets2d.get(k).unwrap_or(&empty2d);
            let d3 = dets3d.get(k).unwrap_or(&empty3d);
            let fd = fuse_frame(d2, d3, calib, image, fusion_threshold);
            tracker.step(k, &fd).expect("frames are visited in increasing order")
        })
        .collect()
}
