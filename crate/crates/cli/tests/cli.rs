use fusemot::config::KEYS;
use std::path::Path;
use std::process::{Command, Output};

fn fusemot() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fusemot"));
    c.env_remove("FUSEMOT_CONFIG");
    c
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{:?}: {}", cmd, String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn synth(root: &Path, preset: &str, seq: &str) {
    ok(fusemot().args(["synth", "--preset", preset, "--seq", seq, "--out"]).arg(root));
}

fn track(root: &Path, out: &Path, extra: &[&str]) -> Output {
    fusemot()
        .arg("track")
        .arg("--dets2d")
        .arg(root.join("dets2d"))
        .arg("--dets3d")
        .arg(root.join("dets3d"))
        .arg("--calib")
        .arg(root.join("calib"))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn first_frame(result: &Path) -> usize {
    let text = std::fs::read_to_string(result).unwrap();
    text.lines().next().unwrap().split(' ').next().unwrap().parse().unwrap()
}

#[test]
fn help_lists_every_config_key_with_default() {
    for args in [vec!["--help"], vec!["track", "--help"]] {
        let help = ok(fusemot().args(&args));
        for k in KEYS {
            assert!(help.contains(&format!("{} = {}", k.key, k.default)), "{} missing from {args:?}", k.key);
        }
    }
}

#[test]
fn min_hits_override_changes_confirmation_latency() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "handover", "0000");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(track(tmp.path(), &a, &[]).status.success());
    assert!(track(tmp.path(), &b, &["--set", "track.min_hits=1"]).status.success());
    assert_eq!(first_frame(&a.join("0000.txt")), 9);
    assert_eq!(first_frame(&b.join("0000.txt")), 7);
}

#[test]
fn config_file_env_fallback_and_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "handover", "0000");
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# lower latency\ntrack.min_hits = 2\n").unwrap();

    let out = tmp.path().join("env");
    let mut cmd = fusemot();
    cmd.env("FUSEMOT_CONFIG", &cfg)
        .arg("track")
        .arg("--dets2d")
        .arg(tmp.path().join("dets2d"))
        .arg("--dets3d")
        .arg(tmp.path().join("dets3d"))
        .arg("--calib")
        .arg(tmp.path().join("calib"))
        .arg("--out")
        .arg(&out);
    ok(&mut cmd);
    assert_eq!(first_frame(&out.join("0000.txt")), 8);

    let out = tmp.path().join("cli");
    let cfg_arg = cfg.to_str().unwrap();
    assert!(track(tmp.path(), &out, &["--config", cfg_arg, "--set", "track.min_hits=1"]).status.success());
    assert_eq!(first_frame(&out.join("0000.txt")), 7);
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "handover", "0000");
    let out = track(tmp.path(), &tmp.path().join("r"), &["--set", "track.minhits=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn missing_sequence_fails_but_others_complete() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "crossing", "0000");
    let r = tmp.path().join("r");
    let out = track(tmp.path(), &r, &["--seqs", "0000,0042", "--jobs", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("0042"));
    assert!(r.join("0000.txt").exists());
}

#[test]
fn eval_reports_perfect_and_empty_runs() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "perfect", "0000");
    let r = tmp.path().join("r");
    assert!(track(tmp.path(), &r, &[]).status.success());
    let report = tmp.path().join("report");
    let stdout = ok(fusemot()
        .arg("eval")
        .arg("--results")
        .arg(&r)
        .arg("--gt")
        .arg(tmp.path().join("label_02"))
        .arg("--out")
        .arg(&report));
    assert!(stdout.contains("1.0000"), "{stdout}");
    let kv = std::fs::read_to_string(report.join("summary.kv")).unwrap();
    assert!(kv.contains("mota=1\n") && kv.contains("idsw=0\n"), "{kv}");

    std::fs::write(r.join("0000.txt"), "").unwrap();
    ok(fusemot()
        .arg("eval")
        .arg("--results")
        .arg(&r)
        .arg("--gt")
        .arg(tmp.path().join("label_02"))
        .arg("--out")
        .arg(&report));
    let kv = std::fs::read_to_string(report.join("0000.kv")).unwrap();
    assert!(kv.contains("mota=0\n"), "{kv}");
}

#[test]
fn eval_counts_the_id_switch_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt, res) = (tmp.path().join("gt"), tmp.path().join("res"));
    std::fs::create_dir_all(&gt).unwrap();
    std::fs::create_dir_all(&res).unwrap();
    let line = |f: usize, id: u64| {
        format!("{f} {id} Car 0 0 -10 100 100 150 140 -1000 -1000 -1000 -1000 -1000 -1000 -1000\n")
    };
    std::fs::write(gt.join("0000.txt"), (0..3).map(|f| line(f, 1)).collect::<String>()).unwrap();
    std::fs::write(res.join("0000.txt"), [line(0, 5), line(1, 6), line(2, 6)].concat()).unwrap();
    let out = tmp.path().join("rep");
    ok(fusemot().arg("eval").arg("--results").arg(&res).arg("--gt").arg(&gt).arg("--out").arg(&out));
    let kv = std::fs::read_to_string(out.join("0000.kv")).unwrap();
    assert!(kv.contains("idsw=1\n"), "{kv}");
}

#[test]
fn eval_rejects_results_past_the_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt, res) = (tmp.path().join("gt"), tmp.path().join("res"));
    std::fs::create_dir_all(&gt).unwrap();
    std::fs::create_dir_all(&res).unwrap();
    std::fs::write(gt.join("0000.txt"), "0 1 Car 0 0 -10 100 100 150 140 -1000 -1000 -1000 -1000 -1000 -1000 -1000\n").unwrap();
    std::fs::write(res.join("0000.txt"), "4 1 Car 0 0 -10 100 100 150 140 -1000 -1000 -1000 -1000 -1000 -1000 -1000\n").unwrap();
    let out = fusemot().arg("eval").arg("--results").arg(&res).arg("--gt").arg(&gt).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn synth_from_scenario_file_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("scene.txt");
    std::fs::write(
        &sc,
        "frames = 20\nseed = 1\nnoise_px = 0.5\nobject = x=2 z=30 vz=-0.5\nobject = birth=5 x=-4 z=50\n",
    )
    .unwrap();
    let out = tmp.path().join("data");
    let stdout = ok(fusemot().arg("synth").arg("--scenario").arg(&sc).arg("--out").arg(&out));
    assert!(stdout.contains("20 frames"), "{stdout}");
    let d2 = fusemot::kitti::read_detections_2d(out.join("dets2d/0000.txt")).unwrap();
    assert_eq!(d2.accepted(), 35);
    let back = std::fs::read_to_string(out.join("scenarios/0000.txt")).unwrap();
    assert!(fusemot::scenario::ScenarioConfig::parse(&back).is_ok());
}

#[test]
fn bench_handles_empty_frames() {
    let out = ok(fusemot().args(["bench", "--frames", "50", "--objects", "0"]));
    for key in ["pipeline_fps", "end_to_end_fps"] {
        let v: f64 = out
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap()
            .parse()
            .unwrap();
        assert!(v.is_finite() && v > 0.0, "{key} = {v}");
    }
}

#[test]
fn bench_slows_down_with_more_objects() {
    let fps = |objects: &str| -> f64 {
        let out = ok(fusemot().args(["bench", "--frames", "300", "--objects", objects]));
        out.lines().find_map(|l| l.strip_prefix("pipeline_fps = ")).unwrap().parse().unwrap()
    };
    // a fourfold workload leaves room for timer noise
    assert!(fps("40") < fps("10"));
}
