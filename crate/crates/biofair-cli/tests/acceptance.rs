//! Acceptance suite: every release gate runs here, one test per criterion,
//! each printing a PASS line (run with `--nocapture` to see them).
//!
//! The gates are property-based plus qualitative-pattern reproduction on
//! synthetic data; expected values come from independent naive-loop oracles
//! computed inside this file, never from the library code under test.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use biofair_core::fairness::audit;
use biofair_core::impossibility::{bayes_residual, verify, SatisfactionClass};
use biofair_core::rates::{count_confusion, rate_curve, OperatingPointKind};
use biofair_core::schema::{partition, AttributeSchema, GroupPartition};
use biofair_core::score::{AttrValue, Label, ScoreRecord};
use biofair_core::synth::{generate, preset_unequal_base_rates};

const EPSILON: f64 = 0.05;

// ---------------------------------------------------------------------
// Test-corpus generation, independent of the library's generator.
// ---------------------------------------------------------------------

struct TestRng(u64);

impl TestRng {
    fn next(&mut self) -> u64 {
        // splitmix64
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / 9_007_199_254_740_992.0
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

fn corpus_record(idx: usize, score: f64, genuine: bool, group_a: bool) -> ScoreRecord {
    ScoreRecord {
        pair_id: format!("p{idx}"),
        score,
        label: if genuine { Label::Genuine } else { Label::Impostor },
        attributes: BTreeMap::from([(
            "group".to_string(),
            AttrValue::Str(if group_a { "a" } else { "b" }.to_string()),
        )]),
    }
}

/// Random dataset with both labels present; scores mix a coarse grid (to
/// force ties) with continuous draws.
fn random_dataset(rng: &mut TestRng, max_records: usize) -> Vec<ScoreRecord> {
    let n = 2 + rng.below(max_records - 2);
    let mut records = Vec::with_capacity(n + 2);
    for i in 0..n {
        let score = if rng.below(2) == 0 {
            (rng.below(33) as f64 - 16.0) / 8.0
        } else {
            rng.unit() * 4.0 - 2.0
        };
        records.push(corpus_record(i, score, rng.below(2) == 0, rng.below(2) == 0));
    }
    records.push(corpus_record(n, 1.31, true, true));
    records.push(corpus_record(n + 1, -1.27, false, false));
    records
}

fn group_schema() -> AttributeSchema {
    AttributeSchema::from_json(
        r#"{
          "attributes": [
            {
              "name": "group", "kind": "categorical", "values": ["a", "b"],
              "bins": [
                {"name": "a", "values": ["a"]},
                {"name": "b", "values": ["b"]}
              ]
            }
          ]
        }"#,
    )
    .unwrap()
}

/// Independent naive-loop oracle: per-record counting and direct-quotient
/// rates, written without reference to the library implementation.
fn oracle(records: &[ScoreRecord], tau: f64) -> (u64, u64, u64, u64, f64, f64, f64, f64) {
    let (mut tg, mut ti, mut fg, mut fi) = (0u64, 0u64, 0u64, 0u64);
    for r in records {
        match (r.label, r.score > tau) {
            (Label::Genuine, true) => tg += 1,
            (Label::Genuine, false) => fi += 1,
            (Label::Impostor, true) => fg += 1,
            (Label::Impostor, false) => ti += 1,
        }
    }
    let fir = fi as f64 / (tg + fi) as f64;
    let fgr = fg as f64 / (ti + fg) as f64;
    (tg, ti, fg, fi, fgr, fir, 1.0 - fir, 1.0 - fgr)
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_biofair")
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(bin())
        .args(args)
        .output()
        .expect("spawn biofair");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).to_string(),
        String::from_utf8_lossy(&output.stderr).to_string(),
    )
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("biofair-acceptance-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

// ---------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------

/// 1000 random datasets (at most 200 records): confusion counts and all
/// four rates match the naive oracle exactly at every candidate threshold,
/// in under 30 seconds.
#[test]
fn oracle_equivalence() {
    let start = Instant::now();
    let mut rng = TestRng(0xACCE5501);
    for _ in 0..1000 {
        let records = random_dataset(&mut rng, 200);
        let curve = rate_curve(&records).unwrap();
        for p in &curve.points {
            let (tg, ti, fg, fi, fgr, fir, tgr, tir) = oracle(&records, p.threshold);
            assert_eq!((p.counts.tg, p.counts.ti, p.counts.fg, p.counts.fi), (tg, ti, fg, fi));
            assert_eq!(p.fgr.unwrap().to_bits(), fgr.to_bits());
            assert_eq!(p.fir.unwrap().to_bits(), fir.to_bits());
            assert_eq!(p.tgr.unwrap().to_bits(), tgr.to_bits());
            assert_eq!(p.tir.unwrap().to_bits(), tir.to_bits());
            let direct = count_confusion(&records, p.threshold);
            assert_eq!(direct, p.counts);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("acceptance oracle-equivalence (1000 datasets, {elapsed:?}): PASS");
}

/// tgr + fir = 1 and tir + fgr = 1 on every cell of every audit in the
/// corpus; count-level identities with zero tolerance.
#[test]
fn rate_identities() {
    let schema = group_schema();
    let mut rng = TestRng(0xACCE5502);
    let mut audits = 0;
    let mut cells_checked = 0;

    let mut check_report = |records: &[ScoreRecord], parts: &[GroupPartition]| {
        let kinds = [
            OperatingPointKind::Eer,
            OperatingPointKind::FgrTarget(0.01),
            OperatingPointKind::NearZfir,
        ];
        let report = audit(records, &schema, parts, &kinds, EPSILON).unwrap();
        for p in &report.partitions {
            for at in &p.at {
                for cell_rates in &at.cell_rates {
                    let r = &cell_rates.rates;
                    let size = p.cells.iter().find(|c| c.cell == cell_rates.cell).unwrap();
                    assert_eq!(r.counts.tg + r.counts.fi, size.genuine);
                    assert_eq!(r.counts.ti + r.counts.fg, size.impostor);
                    if let (Some(tgr), Some(fir)) = (r.tgr, r.fir) {
                        assert_eq!(tgr + fir, 1.0);
                    }
                    if let (Some(tir), Some(fgr)) = (r.tir, r.fgr) {
                        assert_eq!(tir + fgr, 1.0);
                    }
                    cells_checked += 1;
                }
            }
        }
        audits += 1;
    };

    for _ in 0..40 {
        let records = random_dataset(&mut rng, 160);
        let parts = vec![partition(&records, &schema, &["group"]).unwrap()];
        check_report(&records, &parts);
    }
    for seed in 1..=10 {
        let spec = preset_unequal_base_rates(seed);
        let records = generate(&spec).unwrap();
        let parts = vec![partition(&records, &spec.schema().unwrap(), &["group"]).unwrap()];
        check_report(&records, &parts);
    }
    println!("acceptance rate-identities ({audits} audits, {cells_checked} cells): PASS");
}

/// Precision identity residual stays below 1e-12 at every defined cell and
/// candidate threshold across the property corpus.
#[test]
fn bayes_identity() {
    let schema = group_schema();
    let mut rng = TestRng(0xACCE5503);
    let mut checked = 0u64;
    for _ in 0..100 {
        let records = random_dataset(&mut rng, 200);
        let part = partition(&records, &schema, &["group"]).unwrap();
        let curve = rate_curve(&records).unwrap();
        for p in &curve.points {
            for r in bayes_residual(&records, &part, p.threshold).unwrap() {
                if let Some(residual) = r.residual {
                    assert!(residual < 1e-12, "residual {residual} in cell {}", r.cell);
                    checked += 1;
                }
            }
        }
    }
    println!("acceptance bayes-identity ({checked} defined cells): PASS");
}

/// The synthetic impossibility harness confirms 100/100 trials at seed 42
/// in under 60 seconds, exiting 0.
#[test]
fn impossibility_at_desk_scale() {
    let start = Instant::now();
    let out = tmp("check").join("trials.json");
    let (code, stdout, stderr) = run_cli(&[
        "check-impossibility",
        "--synthetic",
        "--trials",
        "100",
        "--seed",
        "42",
        "--epsilon",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    let elapsed = start.elapsed();
    assert_eq!(code, 0, "stdout: {stdout} stderr: {stderr}");
    assert!(stdout.contains("IMPOSSIBLE-CONFIRMED"), "{stdout}");
    assert!(stdout.contains("100/100"), "{stdout}");
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["verdict"]["counterexamples"], 0);
    println!("acceptance impossibility-desk-scale (100 trials, {elapsed:?}): PASS");
}

/// Escape clauses, deterministic and exact: equal-base-rate populations
/// with identical per-cell distributions yield non-trivial satisfying
/// thresholds classified EqualBaseRates; perfectly separated populations
/// yield PerfectSystem classifications.
#[test]
fn escape_clauses() {
    let schema = group_schema();

    // Identical explicit score lists per cell, equal base rates.
    let mut records = Vec::new();
    let mut idx = 0;
    for group_a in [true, false] {
        for &s in &[0.4, 0.6, 0.8, 0.9] {
            records.push(corpus_record(idx, s, true, group_a));
            idx += 1;
        }
        for &s in &[0.1, 0.3, 0.5, 0.7] {
            records.push(corpus_record(idx, s, false, group_a));
            idx += 1;
        }
    }
    let part = partition(&records, &schema, &["group"]).unwrap();
    let verdict = verify(&records, &part, EPSILON).unwrap();
    assert!(!verdict.counterexample);
    let equal: Vec<_> = verdict
        .satisfying
        .iter()
        .filter(|s| s.class == SatisfactionClass::EqualBaseRates)
        .collect();
    assert!(!equal.is_empty(), "no EqualBaseRates thresholds found");
    for s in &equal {
        assert!(s.predicted_rate > EPSILON && s.predicted_rate < 1.0 - EPSILON);
    }

    // Perfect separation in both cells, equal base rates.
    let mut records = Vec::new();
    let mut idx = 0;
    for group_a in [true, false] {
        for &s in &[0.8, 0.9] {
            records.push(corpus_record(idx, s, true, group_a));
            idx += 1;
        }
        for &s in &[0.1, 0.2] {
            records.push(corpus_record(idx, s, false, group_a));
            idx += 1;
        }
    }
    let part = partition(&records, &schema, &["group"]).unwrap();
    let verdict = verify(&records, &part, EPSILON).unwrap();
    assert!(!verdict.counterexample);
    assert!(
        verdict
            .satisfying
            .iter()
            .any(|s| s.class == SatisfactionClass::PerfectSystem),
        "no PerfectSystem classification found"
    );
    println!("acceptance escape-clauses: PASS");
}

/// Threshold-dependence pattern on the unequal-base-rates preset, seeds
/// 1-10: at fgr@0.001 the predictive-parity gap stays below epsilon while
/// equalised odds or statistical parity exceeds it; at near-zfir the
/// predictive-parity gap exceeds epsilon.
#[test]
fn threshold_dependence_pattern() {
    for seed in 1..=10u64 {
        let spec = preset_unequal_base_rates(seed);
        let records = generate(&spec).unwrap();
        let schema = spec.schema().unwrap();
        let parts = vec![partition(&records, &schema, &["group"]).unwrap()];
        let kinds = [OperatingPointKind::FgrTarget(0.001), OperatingPointKind::NearZfir];
        let report = audit(&records, &schema, &parts, &kinds, EPSILON).unwrap();
        let p = &report.partitions[0];

        let gap = |at_idx: usize, criterion_idx: usize| -> f64 {
            p.at[at_idx].criteria[criterion_idx]
                .gap
                .as_ref()
                .and_then(|g| g.max_abs_gap)
                .unwrap_or_else(|| panic!("seed {seed}: undefined gap at {at_idx}/{criterion_idx}"))
        };
        // criteria order: equalised-odds, statistical-parity, predictive-parity
        let (eo_low_fgr, sp_low_fgr, pp_low_fgr) = (gap(0, 0), gap(0, 1), gap(0, 2));
        let pp_near_zfir = gap(1, 2);
        assert!(pp_low_fgr < EPSILON, "seed {seed}: pp gap {pp_low_fgr} at fgr target");
        assert!(
            eo_low_fgr > EPSILON || sp_low_fgr > EPSILON,
            "seed {seed}: eo {eo_low_fgr} sp {sp_low_fgr} at fgr target"
        );
        assert!(pp_near_zfir > EPSILON, "seed {seed}: pp gap {pp_near_zfir} at near-zfir");
    }
    println!("acceptance threshold-dependence-pattern (seeds 1-10): PASS");
}

/// fgr non-increasing and fir non-decreasing along every generated curve
/// (1000 datasets).
#[test]
fn monotonicity() {
    let mut rng = TestRng(0xACCE5507);
    for _ in 0..1000 {
        let records = random_dataset(&mut rng, 200);
        let curve = rate_curve(&records).unwrap();
        for w in curve.points.windows(2) {
            assert!(w[1].fgr.unwrap() <= w[0].fgr.unwrap());
            assert!(w[1].fir.unwrap() >= w[0].fir.unwrap());
        }
    }
    println!("acceptance monotonicity (1000 datasets): PASS");
}

/// Identical inputs and seed produce byte-identical analytical JSON and CSV
/// payloads across reruns of every command.
#[test]
fn reproducibility() {
    let dir_a = tmp("repro-a");
    let dir_b = tmp("repro-b");

    for dir in [&dir_a, &dir_b] {
        let (code, _, stderr) = run_cli(&[
            "synth",
            "--preset",
            "unequal-base-rates",
            "--seed",
            "9",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stderr}");
    }
    let scores_a = std::fs::read(dir_a.join("scores.csv")).unwrap();
    let scores_b = std::fs::read(dir_b.join("scores.csv")).unwrap();
    assert_eq!(scores_a, scores_b, "synth scores differ across reruns");

    let audit_args = |out: &Path| {
        vec![
            "audit".to_string(),
            "--scores".into(),
            dir_a.join("scores.csv").display().to_string(),
            "--schema".into(),
            dir_a.join("schema.json").display().to_string(),
            "--partitions".into(),
            "group".into(),
            "--operating-points".into(),
            "eer,fgr@0.001,near-zfir".into(),
            "--epsilon".into(),
            "0.05".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let out_a = tmp("repro-audit-a");
    let out_b = tmp("repro-audit-b");
    for out in [&out_a, &out_b] {
        let args = audit_args(out);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, _, stderr) = run_cli(&refs);
        assert_eq!(code, 0, "{stderr}");
    }
    let report_a = std::fs::read(out_a.join("report.json")).unwrap();
    let report_b = std::fs::read(out_b.join("report.json")).unwrap();
    assert_eq!(report_a, report_b, "audit report.json differs across reruns");
    let csv_a = std::fs::read(out_a.join("report.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("report.csv")).unwrap();
    assert_eq!(csv_a, csv_b);

    let verdict_a = tmp("repro-check-a").join("v.json");
    let verdict_b = tmp("repro-check-b").join("v.json");
    for out in [&verdict_a, &verdict_b] {
        let (code, _, stderr) = run_cli(&[
            "check-impossibility",
            "--synthetic",
            "--trials",
            "10",
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stderr}");
    }
    assert_eq!(
        std::fs::read(&verdict_a).unwrap(),
        std::fs::read(&verdict_b).unwrap(),
        "verdict JSON differs across reruns"
    );
    println!("acceptance reproducibility: PASS");
}

/// A strictly increasing affine transform of all scores, with fixed
/// thresholds transformed identically, leaves every count, rate, and gap
/// unchanged.
#[test]
fn scale_invariance() {
    let spec = preset_unequal_base_rates(4);
    let records = generate(&spec).unwrap();
    let schema = spec.schema().unwrap();
    let transform = |s: f64| 2.0 * s + 3.0;
    let transformed: Vec<ScoreRecord> = records
        .iter()
        .map(|r| ScoreRecord { score: transform(r.score), ..r.clone() })
        .collect();

    let curve = rate_curve(&records).unwrap();
    let base_points = [
        biofair_core::rates::resolve_operating_point(&curve, OperatingPointKind::Eer)
            .unwrap()
            .threshold,
        biofair_core::rates::resolve_operating_point(&curve, OperatingPointKind::FgrTarget(0.001))
            .unwrap()
            .threshold,
    ];

    let parts = vec![partition(&records, &schema, &["group"]).unwrap()];
    let parts_t = vec![partition(&transformed, &schema, &["group"]).unwrap()];
    let kinds: Vec<OperatingPointKind> =
        base_points.iter().map(|&t| OperatingPointKind::Fixed(t)).collect();
    let kinds_t: Vec<OperatingPointKind> = base_points
        .iter()
        .map(|&t| OperatingPointKind::Fixed(transform(t)))
        .collect();

    let original = audit(&records, &schema, &parts, &kinds, EPSILON).unwrap();
    let moved = audit(&transformed, &schema, &parts_t, &kinds_t, EPSILON).unwrap();

    for (a, b) in original.partitions[0]
        .at
        .iter()
        .zip(&moved.partitions[0].at)
    {
        for (ra, rb) in a.cell_rates.iter().zip(&b.cell_rates) {
            assert_eq!(ra.cell, rb.cell);
            assert_eq!(ra.rates.counts, rb.rates.counts);
            assert_eq!(ra.rates.fgr, rb.rates.fgr);
            assert_eq!(ra.rates.fir, rb.rates.fir);
            assert_eq!(ra.rates.tgr, rb.rates.tgr);
            assert_eq!(ra.rates.tir, rb.rates.tir);
        }
        for (ca, cb) in a.criteria.iter().zip(&b.criteria) {
            assert_eq!(ca.criterion, cb.criterion);
            match (&ca.gap, &cb.gap) {
                (Some(ga), Some(gb)) => {
                    assert_eq!(ga.max_abs_gap, gb.max_abs_gap);
                    assert_eq!(ga.max_rel_gap, gb.max_rel_gap);
                    assert_eq!(ga.unfair, gb.unfair);
                    for (pa, pb) in ga.components.iter().zip(&gb.components) {
                        for (xa, xb) in pa.pairs.iter().zip(&pb.pairs) {
                            assert_eq!(xa.abs.to_bits(), xb.abs.to_bits());
                        }
                    }
                }
                (None, None) => {}
                other => panic!("gap definedness diverged: {other:?}"),
            }
        }
    }
    println!("acceptance scale-invariance: PASS");
}
