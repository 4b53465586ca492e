use anyhow::{Context, Result};
use biofair_core::rates::OperatingPointKind;
use biofair_core::schema::{partition, AttributeSchema, GroupPartition};
use biofair_core::score::load_scores;

use crate::manifest::RunManifest;
use crate::util::{atomic_write, out_file, parse_axes, sha256_file};
use crate::AuditArgs;

pub fn run(args: &AuditArgs, command_line: &[String]) -> Result<i32> {
    let schema = AttributeSchema::from_path(&args.schema)
        .with_context(|| format!("loading schema {}", args.schema.display()))?;
    let loaded = load_scores(&args.scores, &schema)
        .with_context(|| format!("loading scores {}", args.scores.display()))?;

    let kinds: Vec<OperatingPointKind> = args
        .operating_points
        .iter()
        .map(|s| s.parse::<OperatingPointKind>().map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    let partitions: Vec<GroupPartition> = args
        .partitions
        .iter()
        .map(|token| {
            partition(&loaded.records, &schema, &parse_axes(token))
                .with_context(|| format!("building partition `{token}`"))
        })
        .collect::<Result<_>>()?;

    // The raw command line (with its output paths) and the timestamp live
    // in manifest.json; report.json carries only input-derived provenance
    // so reruns over identical inputs are byte-identical.
    let mut report =
        biofair_core::fairness::audit(&loaded.records, &schema, &partitions, &kinds, args.epsilon)?;
    report
        .provenance
        .insert("scores_path".into(), args.scores.display().to_string());
    report.provenance.insert("scores_sha256".into(), loaded.sha256);
    report
        .provenance
        .insert("schema_path".into(), args.schema.display().to_string());
    report
        .provenance
        .insert("schema_sha256".into(), sha256_file(&args.schema)?);

    let report_json = out_file(&args.out, "report.json");
    let report_csv = out_file(&args.out, "report.csv");
    atomic_write(&report_json, report.to_json()?.as_bytes())?;
    atomic_write(&report_csv, report.to_csv().as_bytes())?;

    let mut manifest = RunManifest::new(command_line);
    manifest.add_input(&args.scores)?;
    manifest.add_input(&args.schema)?;
    manifest.add_output(&report_json)?;
    manifest.add_output(&report_csv)?;
    manifest.write(&args.out)?;

    if args.gate && report.any_unfair() {
        eprintln!("gate: at least one criterion exceeds epsilon {}", args.epsilon);
        return Ok(2);
    }
    Ok(0)
}
