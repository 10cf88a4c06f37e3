use crate::SynthArgs;
use anyhow::{bail, Context, Result};
use fusemot::scenario::{generate, presets, ScenarioConfig};

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    Ok(match name {
        "handover" => presets::handover(),
        "occlusion" => presets::occlusion(),
        "crossing" => presets::crossing(),
        "perfect" => presets::perfect(),
        "traffic" => presets::traffic(20, 200, 0),
        _ => bail!("unknown preset `{name}` (handover, occlusion, crossing, perfect, traffic)"),
    })
}

fn count<T>(v: &[Vec<T>]) -> usize {
    v.iter().map(Vec::len).sum()
}

pub fn run(a: &SynthArgs) -> Result<()> {
    let mut cfg = match (&a.scenario, &a.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => bail!("give --scenario or --preset"),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let bundle = generate(&cfg);
    bundle.write(&a.out, &a.seq)?;
    let dir = a.out.join("scenarios");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join(format!("{}.txt", a.seq)), cfg.to_text())?;

    println!(
        "{}: {} frames, {} labels, {} 2D and {} 3D detections",
        a.seq,
        cfg.frames,
        count(&bundle.gt),
        count(&bundle.dets2d),
        count(&bundle.dets3d)
    );
    Ok(())
}
