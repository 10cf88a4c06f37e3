use crate::{pool, sequences, TrackArgs};
use anyhow::{Context, Result};
use fusemot::config::{InputFrame, RunConfig};
use fusemot::kitti::{read_calibration, read_detections_2d, read_detections_3d, write_tracks, Detection3D};
use fusemot::tracker::run_sequence;
use rayon::prelude::*;
use std::time::Instant;

pub struct SequenceRun {
    pub frames: usize,
    pub seconds: f64,
}

pub fn track_sequence(seq: &str, a: &TrackArgs, cfg: &RunConfig) -> Result<SequenceRun> {
    let file = format!("{seq}.txt");
    let d2 = read_detections_2d(a.dets2d.join(&file))?;
    let d3 = read_detections_3d(a.dets3d.join(&file))?;
    let calib = read_calibration(a.calib.join(&file))?;
    for r in d2.rejected.iter().chain(&d3.rejected) {
        eprintln!("{seq}: line {} skipped: {}", r.line, r.reason);
    }
    let d3 = match cfg.input_frame {
        InputFrame::Camera => d3.frames,
        InputFrame::Lidar => d3
            .frames
            .iter()
            .map(|f| f.iter().map(|d| d.lidar_to_camera(&calib)).collect::<fusemot::Result<Vec<Detection3D>>>())
            .collect::<fusemot::Result<_>>()?,
    };

    let start = Instant::now();
    let outputs = run_sequence(&d2.frames, &d3, &calib, cfg.image, cfg.fusion_iou_threshold, &cfg.tracker);
    let seconds = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_tracks(a.out.join(&file), &outputs)?;
    Ok(SequenceRun {
        frames: outputs.len(),
        seconds,
    })
}

pub fn fps(frames: usize, seconds: f64) -> f64 {
    frames as f64 / seconds.max(1e-9)
}

pub fn run(a: &TrackArgs) -> Result<bool> {
    let cfg = a.cfg.resolve()?;
    let seqs = sequences(&a.seqs, &a.dets2d)?;
    let results: Vec<Result<SequenceRun>> =
        pool(a.jobs)?.install(|| seqs.par_iter().map(|s| track_sequence(s, a, &cfg)).collect());

    let mut ok = true;
    for (seq, r) in seqs.iter().zip(results) {
        match r {
            Ok(r) => println!("{seq}: {} frames, {:.1} FPS", r.frames, fps(r.frames, r.seconds)),
            Err(e) => {
                ok = false;
                eprintln!("{seq}: error: {e:#}");
            }
        }
    }
    Ok(ok)
}
