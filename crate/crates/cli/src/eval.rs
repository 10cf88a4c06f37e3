use crate::{pool, sequences, EvalArgs};
use anyhow::{bail, Context, Result};
use fusemot::kitti::{group_by_frame, read_labels, LabelRow};
use fusemot::metrics::{evaluate_clear, MetricsReport};
use rayon::prelude::*;
use std::path::Path;

fn load(path: &Path, category: &str) -> Result<Vec<Vec<LabelRow>>> {
    let file = read_labels(path)?;
    Ok(group_by_frame(file.rows.into_iter().filter(|r| r.category == category).collect()))
}

pub fn evaluate_sequence(seq: &str, a: &EvalArgs, category: &str, gate: f64) -> Result<MetricsReport> {
    let file = format!("{seq}.txt");
    let gt = load(&a.gt.join(&file), category)?;
    let mut hyp = load(&a.results.join(&file), category)?;
    if hyp.len() > gt.len() {
        bail!("results reach frame {} but ground truth ends at frame {}", hyp.len() - 1, gt.len().saturating_sub(1));
    }
    hyp.resize_with(gt.len(), Vec::new);
    Ok(evaluate_clear(&gt, &hyp, gate)?)
}

pub fn run(a: &EvalArgs) -> Result<bool> {
    let cfg = a.cfg.resolve()?;
    let category = cfg.tracker.category.as_str();
    let seqs = sequences(&a.seqs, &a.gt)?;
    let results: Vec<Result<MetricsReport>> = pool(a.jobs)?
        .install(|| seqs.par_iter().map(|s| evaluate_sequence(s, a, category, cfg.eval_iou_gate)).collect());

    let mut ok = true;
    let mut done: Vec<(&str, MetricsReport)> = Vec::new();
    for (seq, r) in seqs.iter().zip(results) {
        match r {
            Ok(r) => done.push((seq, r)),
            Err(e) => {
                ok = false;
                eprintln!("{seq}: error: {e:#}");
            }
        }
    }
    let total = MetricsReport::combine(done.iter().map(|(_, r)| r));
    let table = MetricsReport::table(done.iter().map(|(s, r)| (*s, r)).chain([("all", &total)]));
    print!("{table}");

    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let write = |name: String, text: &str| {
            let p = out.join(name);
            std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
        };
        write("summary.txt".into(), &table)?;
        write("summary.kv".into(), &total.to_key_values())?;
        for (seq, r) in &done {
            write(format!("{seq}.kv"), &r.to_key_values())?;
        }
    }
    Ok(ok)
}
