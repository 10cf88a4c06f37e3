//! CLEAR-MOT evaluation in the image plane.
//!
//! Ground truth is taken as-is: there is no don't-care region and truncated or
//! occluded boxes count like any other.

use crate::assignment::max_weight_matching;
use crate::geometry::{iou_2d, Box2D};
use crate::kitti::LabelRow;
use crate::tracker::{FrameOutput, TrackOutput};
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::fmt::Write as _;

pub const DEFAULT_IOU_GATE: f64 = 0.5;

/// Anything with an identity and an image box.
pub trait Labeled {
    fn track_id(&self) -> u64;
    fn bbox(&self) -> Box2D;
}

impl Labeled for LabelRow {
    fn track_id(&self) -> u64 {
        self.track_id
    }
    fn bbox(&self) -> Box2D {
        self.bbox
    }
}

impl Labeled for TrackOutput {
    fn track_id(&self) -> u64 {
        self.id
    }
    fn bbox(&self) -> Box2D {
        self.box2d
    }
}

impl AsRef<[TrackOutput]> for FrameOutput {
    fn as_ref(&self) -> &[TrackOutput] {
        &self.tracks
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameMetrics {
    pub frame: usize,
    pub gt: usize,
    pub matches: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub iou_sum: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub mota: f64,
    pub motp: f64,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub gt: usize,
    pub matches: usize,
    pub iou_sum: f64,
    pub frames: Vec<FrameMetrics>,
}

impl MetricsReport {
    fn finish(mut self) -> Self {
        let errors = self.false_negatives + self.false_positives + self.id_switches;
        // With no ground truth the ratio is taken over one box.
        self.mota = 1.0 - errors as f64 / self.gt.max(1) as f64;
        self.motp = if self.matches == 0 {
            0.0
        } else {
            self.iou_sum / self.matches as f64
        };
        self
    }

    /// Count-wise sum of several reports, ratios recomputed. Per-frame rows
    /// are concatenated.
    pub fn combine<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> MetricsReport {
        let mut total = MetricsReport::default();
        for r in reports {
            total.false_positives += r.false_positives;
            total.false_negatives += r.false_negatives;
            total.id_switches += r.id_switches;
            total.gt += r.gt;
            total.matches += r.matches;
            total.iou_sum += r.iou_sum;
            total.frames.extend_from_slice(&r.frames);
        }
        total.finish()
    }

    /// `key=value` lines, one per aggregate field.
    pub fn to_key_values(&self) -> String {
        format!(
            "mota={}\nmotp={}\nfp={}\nfn={}\nidsw={}\ngt={}\nmatches={}\n",
            self.mota,
            self.motp,
            self.false_positives,
            self.false_negatives,
            self.id_switches,
            self.gt,
            self.matches
        )
    }

    /// Aligned text table: one row per named report.
    pub fn table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a MetricsReport)>) -> String {
        let mut s = format!(
            "{:<12} {:>8} {:>8} {:>7} {:>7} {:>6} {:>7}\n",
            "sequence", "MOTA", "MOTP", "FP", "FN", "IDSW", "GT"
        );
        for (name, r) in rows {
            let _ = writeln!(
                s,
                "{:<12} {:>8.4} {:>8.4} {:>7} {:>7} {:>6} {:>7}",
                name, r.mota, r.motp, r.false_positives, r.false_negatives, r.id_switches, r.gt
            );
        }
        s
    }
}

/// Scores `hyp` against `gt` frame by frame.
///
/// Correspondences from the previous frame are kept while their IoU stays at
/// or above `iou_gate`; the remaining boxes are paired by an assignment that
/// maximizes the number of pairs passing the same gate, then their IoU sum. A ground-truth id whose match differs
/// from the hypothesis id it was last matched to counts as an id switch.
pub fn evaluate_clear<G, H>(gt: &[G], hyp: &[H], iou_gate: f64) -> Result<MetricsReport>
where
    G: FrameItems + AsRef<[G::Item]>,
    H: FrameItems + AsRef<[H::Item]>,
{
    if gt.len() != hyp.len() {
        return Err(Error::FrameCountMismatch {
            gt: gt.len(),
            hyp: hyp.len(),
        });
    }
    let mut report = MetricsReport::default();
    let mut previous: HashMap<u64, u64> = HashMap::new();
    let mut last_match: HashMap<u64, u64> = HashMap::new();

    for (k, (g, h)) in gt.iter().zip(hyp).enumerate() {
        let (g, h) = (g.as_ref(), h.as_ref());
        let mut fm = FrameMetrics {
            frame: k,
            gt: g.len(),
            ..Default::default()
        };
        let mut g_used = vec![false; g.len()];
        let mut h_used = vec![false; h.len()];
        let mut current: HashMap<u64, u64> = HashMap::new();
        let mut record = |gi: usize, hi: usize, iou: f64, fm: &mut FrameMetrics| {
            let (gid, hid) = (g[gi].track_id(), h[hi].track_id());
            if last_match.get(&gid).is_some_and(|&old| old != hid) {
                fm.id_switches += 1;
            }
            last_match.insert(gid, hid);
            current.insert(gid, hid);
            fm.matches += 1;
            fm.iou_sum += iou;
        };

        // Carry forward still-valid correspondences.
        for gi in 0..g.len() {
            let Some(&hid) = previous.get(&g[gi].track_id()) else { continue };
            let Some(hi) = (0..h.len()).find(|&hi| !h_used[hi] && h[hi].track_id() == hid) else {
                continue;
            };
            let iou = iou_2d(&g[gi].bbox(), &h[hi].bbox());
            if iou >= iou_gate && iou > 0.0 {
                g_used[gi] = true;
                h_used[hi] = true;
                record(gi, hi, iou, &mut fm);
            }
        }

        let gs: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let hs: Vec<usize> = (0..h.len()).filter(|&i| !h_used[i]).collect();
        let iou = DMatrix::from_fn(gs.len(), hs.len(), |r, c| iou_2d(&g[gs[r]].bbox(), &h[hs[c]].bbox()));
        // As many matches as the gate allows first, then the highest IoU sum.
        let bonus = gs.len().min(hs.len()) as f64 + 1.0;
        let weights = iou.map(|v| if v > 0.0 && v >= iou_gate { bonus + v } else { 0.0 });
        for (a, b) in max_weight_matching(&weights) {
            if weights[(a, b)] > 0.0 {
                record(gs[a], hs[b], iou[(a, b)], &mut fm);
            }
        }

        fm.false_negatives = fm.gt - fm.matches;
        fm.false_positives = h.len() - fm.matches;
        report.gt += fm.gt;
        report.matches += fm.matches;
        report.iou_sum += fm.iou_sum;
        report.false_positives += fm.false_positives;
        report.false_negatives += fm.false_negatives;
        report.id_switches += fm.id_switches;
        report.frames.push(fm);
        previous = current;
    }
    Ok(report.finish())
}

/// Names the element type of one frame's list.
pub trait FrameItems {
    type Item: Labeled;
}

impl<T: Labeled> FrameItems for Vec<T> {
    type Item = T;
}

impl FrameItems for FrameOutput {
    type Item = TrackOutput;
}
