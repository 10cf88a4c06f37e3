//! Detection-to-track affinities and gated assignment.
//!
//! 3D affinity is the volume IoU when the boxes overlap and falls back to the
//! normalized center distance `1 / (1 + d)` when they do not, so fast movers
//! whose predicted box no longer overlaps the detection can still be matched.
//! The two branches live on different scales and are gated separately.

use crate::assignment::max_weight_matching;
use crate::geometry::{center_distance, iou_3d, Box3D};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Iou,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affinity {
    pub score: f64,
    pub branch: Branch,
    /// Center distance in meters; kept for the distance-branch gate.
    pub distance: f64,
}

pub fn cost_fused(det: &Box3D, track: &Box3D) -> Affinity {
    let iou = iou_3d(det, track);
    let distance = center_distance(det, track);
    if iou > 0.0 {
        Affinity {
            score: iou,
            branch: Branch::Iou,
            distance,
        }
    } else {
        Affinity {
            score: 1.0 / (1.0 + distance),
            branch: Branch::Distance,
            distance,
        }
    }
}

/// Rows are detections, columns are tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Affinity>,
}

impl SimilarityMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Affinity) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, det: usize, track: usize) -> &Affinity {
        &self.entries[det * self.cols + track]
    }

    pub fn scores(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).score)
    }
}

pub fn build_similarity(dets: &[Box3D], tracks: &[Box3D]) -> SimilarityMatrix {
    SimilarityMatrix::from_fn(dets.len(), tracks.len(), |i, j| cost_fused(&dets[i], &tracks[j]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gates {
    /// Minimum IoU for an IoU-branch pair.
    pub iou3d: f64,
    /// Maximum center distance (m) for a distance-branch pair.
    pub max_distance: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            iou3d: 0.1,
            max_distance: 4.0,
        }
    }
}

impl Gates {
    pub fn accepts(&self, a: &Affinity) -> bool {
        match a.branch {
            Branch::Iou => a.score >= self.iou3d,
            Branch::Distance => a.distance <= self.max_distance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssignmentResult {
    /// `(detection, track)` pairs sorted by detection.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_dets: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

impl AssignmentResult {
    /// Splits a raw matching into accepted pairs and leftovers.
    fn from_pairs(
        rows: usize,
        cols: usize,
        pairs: Vec<(usize, usize)>,
        mut accept: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        let mut matches = Vec::with_capacity(pairs.len());
        for (r, c) in pairs {
            if accept(r, c) {
                row_used[r] = true;
                col_used[c] = true;
                matches.push((r, c));
            }
        }
        Self {
            matches,
            unmatched_dets: (0..rows).filter(|&r| !row_used[r]).collect(),
            unmatched_tracks: (0..cols).filter(|&c| !col_used[c]).collect(),
        }
    }
}

/// Max-weight assignment over the raw scores, then demotion of every pair that
/// fails its branch gate.
pub fn solve_gated_assignment(s: &SimilarityMatrix, gates: &Gates) -> AssignmentResult {
    let (rows, cols) = s.shape();
    let pairs = max_weight_matching(&s.scores());
    AssignmentResult::from_pairs(rows, cols, pairs, |r, c| gates.accepts(s.get(r, c)))
}

/// Same contract on a plain IoU matrix with a single minimum-IoU gate.
pub fn solve_iou_assignment(iou: &DMatrix<f64>, gate: f64) -> AssignmentResult {
    let (rows, cols) = iou.shape();
    let pairs = max_weight_matching(iou);
    AssignmentResult::from_pairs(rows, cols, pairs, |r, c| iou[(r, c)] > 0.0 && iou[(r, c)] >= gate)
}
