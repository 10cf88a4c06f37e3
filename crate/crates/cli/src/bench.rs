use crate::track::fps;
use crate::BenchArgs;
use anyhow::{Context, Result};
use fusemot::fusion::fuse_frame;
use fusemot::kitti::{read_calibration, read_detections_2d, read_detections_3d, write_tracks};
use fusemot::scenario::{generate, presets};
use fusemot::tracker::{run_sequence, Tracker};
use std::time::Instant;

pub fn run(a: &BenchArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let bundle = generate(&presets::traffic(a.objects, a.frames, a.seed));

    // Pipeline only: fusion and tracking on in-memory detections.
    let start = Instant::now();
    let mut tracker = Tracker::new(cfg.tracker.clone(), bundle.calib.clone(), bundle.image);
    let mut emitted = 0;
    for k in 0..a.frames {
        let fd = fuse_frame(&bundle.dets2d[k], &bundle.dets3d[k], &bundle.calib, bundle.image, cfg.fusion_iou_threshold);
        emitted += tracker.step(k, &fd)?.tracks.len();
    }
    let pipeline = start.elapsed().as_secs_f64();

    // End to end: read the files back, track, write results.
    let dir = tempfile::tempdir().context("creating scratch directory")?;
    bundle.write(dir.path(), "bench")?;
    let start = Instant::now();
    let mut d2 = read_detections_2d(dir.path().join("dets2d/bench.txt"))?.frames;
    let mut d3 = read_detections_3d(dir.path().join("dets3d/bench.txt"))?.frames;
    // Trailing empty frames leave no trace in the files.
    d2.resize_with(a.frames, Vec::new);
    d3.resize_with(a.frames, Vec::new);
    let calib = read_calibration(dir.path().join("calib/bench.txt"))?;
    let outputs = run_sequence(&d2, &d3, &calib, cfg.image, cfg.fusion_iou_threshold, &cfg.tracker);
    write_tracks(dir.path().join("results.txt"), &outputs)?;
    let end_to_end = start.elapsed().as_secs_f64();

    println!("frames = {}", a.frames);
    println!("objects = {}", a.objects);
    println!("emitted = {emitted}");
    println!("pipeline_seconds = {pipeline:.6}");
    println!("pipeline_fps = {:.1}", fps(a.frames, pipeline));
    println!("end_to_end_seconds = {end_to_end:.6}");
    println!("end_to_end_fps = {:.1}", fps(a.frames, end_to_end));
    Ok(())
}
