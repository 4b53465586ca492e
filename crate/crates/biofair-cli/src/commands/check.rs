use anyhow::{Context, Result};
use biofair_core::impossibility::{run_synthetic_trials, verify};
use biofair_core::schema::{partition, AttributeSchema};
use biofair_core::score::load_scores;
use serde::Serialize;

use crate::manifest::FileDigest;
use crate::util::{atomic_write, parse_axes, sha256_file};
use crate::CheckArgs;

/// Verdict JSON wrapper carrying deterministic provenance. The raw command
/// line and timestamp are deliberately absent (they would break byte-level
/// reproducibility across output locations); both are recoverable from the
/// run's manifest conventions.
#[derive(Serialize)]
struct VerdictDocument<T: Serialize> {
    tool_version: String,
    epsilon: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    verdict: T,
}

pub fn run(args: &CheckArgs, _command_line: &[String]) -> Result<i32> {
    if args.synthetic {
        run_synthetic(args)
    } else {
        run_dataset(args)
    }
}

fn run_synthetic(args: &CheckArgs) -> Result<i32> {
    let seed = args.seed.context("--seed is required with --synthetic")?;
    if args.trials == 0 {
        anyhow::bail!("--trials must be at least 1");
    }
    let report = run_synthetic_trials(args.trials, seed, args.epsilon)?;
    let confirmed_all = report.counterexamples == 0;
    println!(
        "{} ({}/{} trials confirmed)",
        if confirmed_all {
            "IMPOSSIBLE-CONFIRMED".to_string()
        } else {
            "SATISFIABLE (Unclassified)".to_string()
        },
        report.confirmed,
        report.trials
    );
    if let Some(out) = &args.out {
        let doc = VerdictDocument {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            epsilon: args.epsilon,
            inputs: Vec::new(),
            seed: Some(seed),
            verdict: &report,
        };
        atomic_write(out, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    Ok(if confirmed_all { 0 } else { 3 })
}

fn run_dataset(args: &CheckArgs) -> Result<i32> {
    let (scores, schema_path, group_by) = match (&args.scores, &args.schema, &args.group_by) {
        (Some(s), Some(sc), Some(g)) => (s, sc, g),
        _ => anyhow::bail!("dataset mode requires --scores, --schema, and --group-by (or use --synthetic)"),
    };
    let schema = AttributeSchema::from_path(schema_path)
        .with_context(|| format!("loading schema {}", schema_path.display()))?;
    let loaded = load_scores(scores, &schema)
        .with_context(|| format!("loading scores {}", scores.display()))?;
    let part = partition(&loaded.records, &schema, &parse_axes(group_by))
        .with_context(|| format!("building partition `{group_by}`"))?;
    let verdict = verify(&loaded.records, &part, args.epsilon)?;
    println!("{}", verdict.summary);
    if let Some(out) = &args.out {
        let doc = VerdictDocument {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            epsilon: args.epsilon,
            inputs: vec![
                FileDigest {
                    path: scores.display().to_string(),
                    sha256: loaded.sha256.clone(),
                },
                FileDigest {
                    path: schema_path.display().to_string(),
                    sha256: sha256_file(schema_path)?,
                },
            ],
            seed: None,
            verdict: &verdict,
        };
        atomic_write(out, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    Ok(if verdict.counterexample { 3 } else { 0 })
}
