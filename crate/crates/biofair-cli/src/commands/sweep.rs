use anyhow::{Context, Result};
use biofair_core::rates::rate_curve;
use biofair_core::schema::{partition, AttributeSchema};
use biofair_core::score::load_scores;

use crate::manifest::RunManifest;
use crate::util::{atomic_write, out_file, parse_axes, sanitize};
use crate::SweepArgs;

pub fn run(args: &SweepArgs, command_line: &[String]) -> Result<i32> {
    let schema = AttributeSchema::from_path(&args.schema)
        .with_context(|| format!("loading schema {}", args.schema.display()))?;
    let loaded = load_scores(&args.scores, &schema)
        .with_context(|| format!("loading scores {}", args.scores.display()))?;

    let mut manifest = RunManifest::new(command_line);
    manifest.add_input(&args.scores)?;
    manifest.add_input(&args.schema)?;

    let pooled = rate_curve(&loaded.records)?;
    let pooled_path = out_file(&args.out, "det.csv");
    atomic_write(&pooled_path, pooled.to_det_csv().as_bytes())?;
    manifest.add_output(&pooled_path)?;

    if let Some(token) = &args.group_by {
        let part = partition(&loaded.records, &schema, &parse_axes(token))
            .with_context(|| format!("building partition `{token}`"))?;
        for cell in &part.cells {
            if cell.indices.is_empty() {
                continue;
            }
            let subset: Vec<_> = cell.indices.iter().map(|&i| loaded.records[i].clone()).collect();
            match rate_curve(&subset) {
                Ok(curve) => {
                    let path = out_file(&args.out, &format!("det-{}.csv", sanitize(&cell.label)));
                    atomic_write(&path, curve.to_det_csv().as_bytes())?;
                    manifest.add_output(&path)?;
                }
                Err(err) => {
                    eprintln!("warning: skipping cell `{}`: {err}", cell.label);
                }
            }
        }
    }

    manifest.write(&args.out)?;
    Ok(0)
}
