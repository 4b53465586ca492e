//! Audit report structure and its JSON / flat-CSV serializations.
//!
//! JSON field order follows struct declaration order and maps use sorted
//! keys, so two audits over identical inputs serialize byte-identically.
//! Floats use the shortest decimal form that round-trips the exact value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fairness::{Criterion, CriterionGap, GroupScoreStats};
use crate::rates::RateSet;
use crate::schema::DemographicSummary;

/// A threshold-selection rule resolved on the pooled curve, echoed in the
/// report together with the pooled rates it achieves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedOperatingPoint {
    pub label: String,
    pub threshold: f64,
    pub pooled: RateSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSize {
    pub cell: String,
    pub records: usize,
    pub genuine: u64,
    pub impostor: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRates {
    pub cell: String,
    pub rates: RateSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub criterion: Criterion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<CriterionGap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One partition evaluated at one resolved operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAtPoint {
    pub operating_point: String,
    pub threshold: f64,
    pub cell_rates: Vec<CellRates>,
    pub criteria: Vec<CriterionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub partition: String,
    pub axes: Vec<String>,
    pub cells: Vec<CellSize>,
    pub score_stats: GroupScoreStats,
    pub at: Vec<PartitionAtPoint>,
}

/// Complete audit output. The `provenance` map is filled by callers that
/// know input paths, file digests, and seeds; everything else is derived
/// from the records and configuration and is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub protocol: String,
    pub epsilon: f64,
    pub record_count: usize,
    pub records_digest: String,
    pub provenance: BTreeMap<String, String>,
    pub demographics: DemographicSummary,
    pub operating_points: Vec<ResolvedOperatingPoint>,
    pub partitions: Vec<PartitionReport>,
}

impl FairnessReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<FairnessReport> {
        Ok(serde_json::from_str(json)?)
    }

    /// True when any criterion at any (partition, operating point) is
    /// flagged unfair.
    pub fn any_unfair(&self) -> bool {
        self.partitions.iter().any(|p| {
            p.at.iter().any(|at| {
                at.criteria
                    .iter()
                    .any(|c| c.gap.as_ref().is_some_and(|g| g.unfair))
            })
        })
    }

    /// Flat export with one row per (partition, operating point, criterion,
    /// cell pair). For equalised odds the `abs_gap`/`rel_gap` columns carry
    /// the tgr component and `fgr_abs_gap`/`fgr_rel_gap` the fgr component;
    /// the latter are empty for the other criteria. Undefined relative gaps
    /// serialize as empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "partition,operating_point,threshold,criterion,cell_a,cell_b,abs_gap,rel_gap,fgr_abs_gap,fgr_rel_gap,unfair\n",
        );
        for p in &self.partitions {
            for at in &p.at {
                for outcome in &at.criteria {
                    let Some(gap) = &outcome.gap else { continue };
                    append_gap_rows(&mut out, &p.partition, at, gap);
                }
            }
        }
        out
    }
}

fn append_gap_rows(out: &mut String, partition: &str, at: &PartitionAtPoint, gap: &CriterionGap) {
    let opt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
    match gap.criterion {
        Criterion::EqualisedOdds => {
            // Pair up the tgr and fgr components by cell pair; a pair can be
            // present in one component only (a cell may lack one label).
            let tgr = &gap.components[0];
            let fgr = &gap.components[1];
            let mut keys: Vec<(String, String)> = Vec::new();
            for pair in tgr.pairs.iter().chain(fgr.pairs.iter()) {
                let key = (pair.cell_a.clone(), pair.cell_b.clone());
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
            for (cell_a, cell_b) in keys {
                let find = |component: &'_ crate::fairness::ComponentGap| -> Option<crate::fairness::PairGap> {
                    component
                        .pairs
                        .iter()
                        .find(|p| p.cell_a == cell_a && p.cell_b == cell_b)
                        .cloned()
                };
                let t = find(tgr);
                let f = find(fgr);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    partition,
                    at.operating_point,
                    at.threshold,
                    gap.criterion,
                    cell_a,
                    cell_b,
                    opt(t.as_ref().map(|p| p.abs)),
                    opt(t.as_ref().and_then(|p| p.rel)),
                    opt(f.as_ref().map(|p| p.abs)),
                    opt(f.as_ref().and_then(|p| p.rel)),
                    gap.unfair
                ));
            }
        }
        _ => {
            for pair in &gap.components[0].pairs {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},,,{}\n",
                    partition,
                    at.operating_point,
                    at.threshold,
                    gap.criterion,
                    pair.cell_a,
                    pair.cell_b,
                    pair.abs,
                    opt(pair.rel),
                    gap.unfair
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::audit;
    use crate::rates::OperatingPointKind;
    use crate::schema::{partition, test_fixtures};
    use crate::score::Label;

    fn sample_report() -> FairnessReport {
        let schema = test_fixtures::demo_schema();
        let mut records = Vec::new();
        for i in 0..16 {
            let age = if i % 2 == 0 { 30 } else { 50 };
            let gender = if i % 4 < 2 { "M" } else { "F" };
            let label = if i % 3 == 0 { Label::Impostor } else { Label::Genuine };
            let score = 0.05 * i as f64 + if label == Label::Genuine { 0.2 } else { 0.0 };
            records.push(test_fixtures::record(&format!("p{i}"), score, label, age, gender));
        }
        let parts = vec![
            partition(&records, &schema, &["age"]).unwrap(),
            partition(&records, &schema, &["age", "gender"]).unwrap(),
        ];
        let mut report = audit(
            &records,
            &schema,
            &parts,
            &[OperatingPointKind::Eer, OperatingPointKind::FgrTarget(0.25)],
            0.05,
        )
        .unwrap();
        report.provenance.insert("scores_path".into(), "test.csv".into());
        report
    }

    #[test]
    fn json_round_trips() {
        let report = sample_report();
        let json = report.to_json().unwrap();
        let back = FairnessReport::from_json(&json).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn json_serialization_is_deterministic() {
        let a = sample_report().to_json().unwrap();
        let b = sample_report().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_has_rows_for_every_pair() {
        let report = sample_report();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert!(lines[0].starts_with("partition,operating_point,threshold,criterion"));
        // age partition: 1 pair x 3 criteria x 2 points = 6 rows; the
        // age+gender partition contributes C(4,2) = 6 pairs per criterion
        // where defined.
        let age_rows = lines.iter().filter(|l| l.starts_with("age,")).count();
        assert_eq!(age_rows, 6);
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 11, "{line}");
        }
    }
}
