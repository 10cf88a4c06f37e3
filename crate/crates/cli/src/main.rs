mod bench;
mod eval;
mod synth;
mod track;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use fusemot::config::{split_assignment, RunConfig, KEYS};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "fusemot", version, about = "Camera-LiDAR fusion multi-object tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track every sequence and write KITTI tracking results.
    Track(TrackArgs),
    /// Score results against ground truth with CLEAR-MOT.
    Eval(EvalArgs),
    /// Generate a synthetic sequence (detections, calibration, labels).
    Synth(SynthArgs),
    /// Measure tracking throughput on a synthetic workload.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long, env = "FUSEMOT_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "K=V", global = true)]
    set: Vec<String>,
}

impl ConfigArgs {
    /// Defaults, then the config file, then `--set` overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in config {}", path.display()))?;
        }
        for kv in &self.set {
            let (k, v) = split_assignment(kv).map_err(anyhow::Error::msg)?;
            cfg.set(k, v).with_context(|| format!("--set {kv}"))?;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    /// Directory of 2D detection files `<seq>.txt`.
    #[arg(long)]
    dets2d: PathBuf,
    /// Directory of 3D detection files `<seq>.txt`.
    #[arg(long)]
    dets3d: PathBuf,
    /// Directory of calibration files `<seq>.txt`.
    #[arg(long)]
    calib: PathBuf,
    /// Output directory for `<seq>.txt` results.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated sequence names; default: every file in --dets2d.
    #[arg(long, value_delimiter = ',')]
    seqs: Vec<String>,
    /// Sequences processed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of result files `<seq>.txt`.
    #[arg(long)]
    results: PathBuf,
    /// Directory of ground-truth label files `<seq>.txt`.
    #[arg(long)]
    gt: PathBuf,
    /// Where to write the report; default: print only.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated sequence names; default: every file in --gt.
    #[arg(long, value_delimiter = ',')]
    seqs: Vec<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scenario file; see the guide for the format.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scene: handover, occlusion, crossing, perfect or traffic.
    #[arg(long)]
    preset: Option<String>,
    /// Replace the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; files go to dets2d/, dets3d/, calib/, label_02/.
    #[arg(long)]
    out: PathBuf,
    /// Sequence name used for the file names.
    #[arg(long, default_value = "0000")]
    seq: String,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    frames: usize,
    /// Objects visible in every frame.
    #[arg(long, default_value_t = 20)]
    objects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Accepted for symmetry with the other commands; the benchmark runs one
    /// sequence.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    cfg: ConfigArgs,
}

fn config_help() -> String {
    let width = KEYS.iter().map(|k| k.key.len() + k.default.len() + 3).max().unwrap_or(0);
    let mut s = String::from("Config keys (file via --config or FUSEMOT_CONFIG, overridden by --set K=V):\n");
    for k in KEYS {
        let kv = format!("{} = {}", k.key, k.default);
        s.push_str(&format!("  {kv:<width$}  {}\n", k.help));
    }
    s
}

/// Sequence names: the explicit list, or the stems of `*.txt` files in `dir`.
pub fn sequences(explicit: &[String], dir: &Path) -> Result<Vec<String>> {
    if !explicit.is_empty() {
        return Ok(explicit.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                out.push(stem.to_string());
            }
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("no sequence files in {}", dir.display());
    }
    Ok(out)
}

pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("starting worker pool")
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Track(a) => track::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Synth(a) => synth::run(&a).map(|()| true),
        Command::Bench(a) => bench::run(&a).map(|()| true),
    }
}

fn main() -> ExitCode {
    let help = config_help();
    let mut cmd = Cli::command().after_help(help.clone());
    for sub in ["track", "eval", "bench"] {
        cmd = cmd.mut_subcommand(sub, |c| c.after_help(help.clone()));
    }
    let cli = match Cli::from_arg_matches(&cmd.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
