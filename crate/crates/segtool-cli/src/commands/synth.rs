use segtool::noise::{synthesize_gamma, NoiseMode, NoiseParams};
use segtool::seed::rng_for_unit;
use segtool::Result;

use super::{load_instances, store_instances};
use crate::manifest::{manifest_path_for, RunManifest};
use crate::settings::Settings;
use crate::SynthArgs;

pub fn synth(args: &SynthArgs, settings: &Settings, seed: u64) -> Result<()> {
    let params = NoiseParams {
        under_rate: settings.resolve("under_rate", args.under_rate, 0.25)?,
        over_rate: settings.resolve("over_rate", args.over_rate, 0.25)?,
        mode: settings.resolve("noise_mode", args.noise_mode, NoiseMode::Both)?,
        seed,
    };
    params.validate()?;

    let mut instances = load_instances(&args.input)?;
    for inst in &mut instances {
        let mut rng = rng_for_unit(seed, "noise", &format!("{}:{}", inst.doc_id, inst.index));
        inst.gamma = Some(synthesize_gamma(&inst.labels, &params, &mut rng));
    }

    let mut manifest = RunManifest::new("synth", seed);
    manifest
        .set("under_rate", params.under_rate)
        .set("over_rate", params.over_rate)
        .set("noise_mode", params.mode);
    manifest.input(&args.input).output(&args.output);
    manifest.write(&manifest_path_for(&args.output))?;

    store_instances(&args.output, &instances)?;
    println!("synth: instances={} mode={}", instances.len(), params.mode);
    Ok(())
}
