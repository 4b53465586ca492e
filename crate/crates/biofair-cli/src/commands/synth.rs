use anyhow::{bail, Context, Result};
use biofair_core::score::write_scores;
use biofair_core::synth::{generate, preset_unequal_base_rates, PopulationSpec, GENERATOR_NAME};

use crate::manifest::RunManifest;
use crate::util::{atomic_write, out_file};
use crate::SynthArgs;

pub fn run(args: &SynthArgs, command_line: &[String]) -> Result<i32> {
    let mut spec = match (&args.spec, &args.preset) {
        (Some(path), None) => PopulationSpec::from_path(path)
            .with_context(|| format!("loading population spec {}", path.display()))?,
        (None, Some(name)) => match name.as_str() {
            "unequal-base-rates" => {
                let seed = args
                    .seed
                    .context("--seed is required with --preset")?;
                preset_unequal_base_rates(seed)
            }
            other => bail!("unknown preset `{other}` (expected `unequal-base-rates`)"),
        },
        _ => bail!("exactly one of --spec or --preset is required"),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }

    let records = generate(&spec)?;
    let schema = spec.schema()?;
    let csv = write_scores(&records, &schema)?;

    let scores_path = out_file(&args.out, "scores.csv");
    let spec_path = out_file(&args.out, "spec.json");
    let schema_path = out_file(&args.out, "schema.json");
    atomic_write(&scores_path, csv.as_bytes())?;
    atomic_write(&spec_path, spec.to_canonical_json().as_bytes())?;
    atomic_write(&schema_path, schema.to_canonical_json().as_bytes())?;

    let mut manifest = RunManifest::new(command_line);
    if let Some(path) = &args.spec {
        manifest.add_input(path)?;
    }
    manifest.seed = Some(spec.seed);
    manifest.generator = Some(GENERATOR_NAME.to_string());
    for (cell, rate) in spec.base_rates() {
        manifest.notes.insert(format!("base_rate.{cell}"), format!("{rate}"));
    }
    manifest
        .notes
        .insert("records".into(), records.len().to_string());
    manifest.add_output(&scores_path)?;
    manifest.add_output(&spec_path)?;
    manifest.add_output(&schema_path)?;
    manifest.write(&args.out)?;
    Ok(0)
}
