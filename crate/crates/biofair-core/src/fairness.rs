//! The three group-fairness criteria at a shared decision threshold, plus
//! descriptive per-group score statistics and the full audit.
//!
//! All criteria compare cells pairwise and summarize by the maximum pairwise
//! gap. Both absolute and relative gaps are reported; the unfairness flag
//! uses the absolute gap against the configured tolerance (default 0.05).
//! The relative gap normalizes by the symmetric mean, |a-b| / ((a+b)/2),
//! and is undefined when a + b = 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rates::{
    count_confusion_indexed, rate_curve, resolve_operating_point, ConfusionCounts,
    OperatingPointKind, RateSet,
};
use crate::report::{
    CellRates, CellSize, CriterionOutcome, FairnessReport, PartitionAtPoint, PartitionReport,
    ResolvedOperatingPoint,
};
use crate::schema::{demographic_summary, AttributeSchema, GroupPartition};
use crate::score::{records_digest, Label, ScoreRecord};

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    EqualisedOdds,
    StatisticalParity,
    PredictiveParity,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [
        Criterion::EqualisedOdds,
        Criterion::StatisticalParity,
        Criterion::PredictiveParity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::EqualisedOdds => "equalised-odds",
            Criterion::StatisticalParity => "statistical-parity",
            Criterion::PredictiveParity => "predictive-parity",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gap between one pair of cells on one rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub cell_a: String,
    pub cell_b: String,
    pub value_a: f64,
    pub value_b: f64,
    pub abs: f64,
    /// |a-b| / ((a+b)/2); undefined when a + b = 0.
    pub rel: Option<f64>,
}

/// Pairwise gaps on one rate across all cells where it is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentGap {
    /// Which rate is compared: `tgr`, `fgr`, `predicted-rate`, or `precision`.
    pub component: String,
    pub pairs: Vec<PairGap>,
    /// Cells where the rate is undefined, excluded from the pairs.
    pub undefined_cells: Vec<String>,
    pub max_abs: Option<f64>,
    pub max_rel: Option<f64>,
}

/// One fairness criterion evaluated on a partition at a shared threshold.
/// Equalised odds carries two components (tgr and fgr); the other criteria
/// carry one. The top-level maxima are taken componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionGap {
    pub criterion: Criterion,
    pub epsilon: f64,
    pub components: Vec<ComponentGap>,
    pub max_abs_gap: Option<f64>,
    pub max_rel_gap: Option<f64>,
    /// True when any component's max absolute gap exceeds epsilon.
    pub unfair: bool,
}

fn component_gap(component: &str, values: &[(String, Option<f64>)]) -> ComponentGap {
    let defined: Vec<(&String, f64)> = values
        .iter()
        .filter_map(|(label, v)| v.map(|v| (label, v)))
        .collect();
    let undefined_cells = values
        .iter()
        .filter(|(_, v)| v.is_none())
        .map(|(label, _)| label.clone())
        .collect();

    let mut pairs = Vec::new();
    for i in 0..defined.len() {
        for j in (i + 1)..defined.len() {
            let (cell_a, value_a) = (defined[i].0.clone(), defined[i].1);
            let (cell_b, value_b) = (defined[j].0.clone(), defined[j].1);
            let abs = (value_a - value_b).abs();
            let mean = (value_a + value_b) / 2.0;
            let rel = if mean == 0.0 { None } else { Some(abs / mean) };
            pairs.push(PairGap {
                cell_a,
                cell_b,
                value_a,
                value_b,
                abs,
                rel,
            });
        }
    }
    let max_abs = pairs.iter().map(|p| p.abs).fold(None, |acc: Option<f64>, v| {
        Some(acc.map_or(v, |a| a.max(v)))
    });
    let max_rel = pairs.iter().filter_map(|p| p.rel).fold(None, |acc: Option<f64>, v| {
        Some(acc.map_or(v, |a| a.max(v)))
    });
    ComponentGap {
        component: component.to_string(),
        pairs,
        undefined_cells,
        max_abs,
        max_rel,
    }
}

fn criterion_gap(criterion: Criterion, epsilon: f64, components: Vec<ComponentGap>) -> CriterionGap {
    let max_abs_gap = components
        .iter()
        .filter_map(|c| c.max_abs)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let max_rel_gap = components
        .iter()
        .filter_map(|c| c.max_rel)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let unfair = components
        .iter()
        .any(|c| c.max_abs.is_some_and(|g| g > epsilon));
    CriterionGap {
        criterion,
        epsilon,
        components,
        max_abs_gap,
        max_rel_gap,
        unfair,
    }
}

fn check_partition(records: &[ScoreRecord], partition: &GroupPartition) -> Result<()> {
    let mut seen = vec![false; records.len()];
    for cell in &partition.cells {
        for &idx in &cell.indices {
            if idx >= records.len() {
                return Err(Error::Partition(format!(
                    "partition `{}` references record index {idx} out of bounds",
                    partition.name
                )));
            }
            if seen[idx] {
                return Err(Error::Partition(format!(
                    "partition `{}` assigns record {idx} to two cells",
                    partition.name
                )));
            }
            seen[idx] = true;
        }
    }
    if partition.total_records() != records.len() {
        return Err(Error::Partition(format!(
            "partition `{}` covers {} of {} records",
            partition.name,
            partition.total_records(),
            records.len()
        )));
    }
    Ok(())
}

fn cell_counts_at(
    records: &[ScoreRecord],
    partition: &GroupPartition,
    tau: f64,
) -> Vec<(String, ConfusionCounts)> {
    partition
        .cells
        .iter()
        .map(|cell| {
            (
                cell.label.clone(),
                count_confusion_indexed(records, &cell.indices, tau),
            )
        })
        .collect()
}

/// TGR and FGR compared across cells at a shared threshold. A cell lacking
/// genuine records has undefined tgr (and likewise impostors/fgr); such
/// cells are excluded from that component's pairs and flagged.
pub fn equalised_odds(
    records: &[ScoreRecord],
    partition: &GroupPartition,
    tau: f64,
    epsilon: f64,
) -> Result<CriterionGap> {
    check_partition(records, partition)?;
    let cells = cell_counts_at(records, partition, tau);
    let tgr: Vec<(String, Option<f64>)> = cells
        .iter()
        .map(|(label, counts)| (label.clone(), RateSet::from_counts(tau, *counts).tgr))
        .collect();
    let fgr: Vec<(String, Option<f64>)> = cells
        .iter()
        .map(|(label, counts)| (label.clone(), RateSet::from_counts(tau, *counts).fgr))
        .collect();
    Ok(criterion_gap(
        Criterion::EqualisedOdds,
        epsilon,
        vec![component_gap("tgr", &tgr), component_gap("fgr", &fgr)],
    ))
}

/// Predicted-genuine rate (tg + fg) / cell size compared across cells.
pub fn statistical_parity(
    records: &[ScoreRecord],
    partition: &GroupPartition,
    tau: f64,
    epsilon: f64,
) -> Result<CriterionGap> {
    check_partition(records, partition)?;
    let values: Vec<(String, Option<f64>)> = cell_counts_at(records, partition, tau)
        .into_iter()
        .map(|(label, counts)| {
            let n = counts.total();
            let rate = if n > 0 {
                Some(counts.predicted_genuine() as f64 / n as f64)
            } else {
                None
            };
            (label, rate)
        })
        .collect();
    Ok(criterion_gap(
        Criterion::StatisticalParity,
        epsilon,
        vec![component_gap("predicted-rate", &values)],
    ))
}

/// Precision tg / (tg + fg) compared across cells. Undefined in a cell with
/// no predicted-genuine records; errors when undefined in every cell.
pub fn predictive_parity(
    records: &[ScoreRecord],
    partition: &GroupPartition,
    tau: f64,
    epsilon: f64,
) -> Result<CriterionGap> {
    check_partition(records, partition)?;
    let values: Vec<(String, Option<f64>)> = cell_counts_at(records, partition, tau)
        .into_iter()
        .map(|(label, counts)| {
            let predicted = counts.predicted_genuine();
            let precision = if predicted > 0 {
                Some(counts.tg as f64 / predicted as f64)
            } else {
                None
            };
            (label, precision)
        })
        .collect();
    let any_defined = values.iter().any(|(_, v)| v.is_some());
    let any_records = partition.cells.iter().any(|c| !c.indices.is_empty());
    if !any_defined && any_records {
        return Err(Error::Criterion(format!(
            "predictive parity is undefined in every cell at threshold {tau} \
             (no predicted-genuine records); use near-zfir instead of zfir"
        )));
    }
    Ok(criterion_gap(
        Criterion::PredictiveParity,
        epsilon,
        vec![component_gap("precision", &values)],
    ))
}

/// Mean and sample standard deviation of scores per (cell, label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub count: usize,
    pub mean: Option<f64>,
    /// Sample (n-1) standard deviation; undefined below 2 records.
    pub std_dev: Option<f64>,
}

fn label_stats(scores: &[f64]) -> LabelStats {
    let n = scores.len();
    if n == 0 {
        return LabelStats { count: 0, mean: None, std_dev: None };
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let std_dev = if n >= 2 {
        let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
        Some((ss / (n - 1) as f64).sqrt())
    } else {
        None
    };
    LabelStats { count: n, mean: Some(mean), std_dev }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScoreStats {
    pub cell: String,
    pub genuine: LabelStats,
    pub impostor: LabelStats,
}

/// Standardized mean difference between two cells on one label's scores,
/// using the pooled sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmdEntry {
    pub cell_a: String,
    pub cell_b: String,
    pub label: Label,
    pub smd: Option<f64>,
}

/// Descriptive score-distribution statistics per cell: the baseline style of
/// group comparison that ignores the decision threshold entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScoreStats {
    pub cells: Vec<CellScoreStats>,
    pub standardized_mean_differences: Vec<SmdEntry>,
}

pub fn group_score_stats(records: &[ScoreRecord], partition: &GroupPartition) -> Result<GroupScoreStats> {
    check_partition(records, partition)?;
    let mut per_cell: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for cell in &partition.cells {
        let mut genuine = Vec::new();
        let mut impostor = Vec::new();
        for &idx in &cell.indices {
            match records[idx].label {
                Label::Genuine => genuine.push(records[idx].score),
                Label::Impostor => impostor.push(records[idx].score),
            }
        }
        per_cell.push((cell.label.clone(), genuine, impostor));
    }

    let cells: Vec<CellScoreStats> = per_cell
        .iter()
        .map(|(label, genuine, impostor)| CellScoreStats {
            cell: label.clone(),
            genuine: label_stats(genuine),
            impostor: label_stats(impostor),
        })
        .collect();

    let mut smds = Vec::new();
    for i in 0..per_cell.len() {
        for j in (i + 1)..per_cell.len() {
            for label in [Label::Genuine, Label::Impostor] {
                let pick = |idx: usize| -> &Vec<f64> {
                    match label {
                        Label::Genuine => &per_cell[idx].1,
                        Label::Impostor => &per_cell[idx].2,
                    }
                };
                let (a, b) = (pick(i), pick(j));
                smds.push(SmdEntry {
                    cell_a: per_cell[i].0.clone(),
                    cell_b: per_cell[j].0.clone(),
                    label,
                    smd: standardized_mean_difference(a, b),
                });
            }
        }
    }
    Ok(GroupScoreStats {
        cells,
        standardized_mean_differences: smds,
    })
}

fn standardized_mean_difference(a: &[f64], b: &[f64]) -> Option<f64> {
    let (sa, sb) = (label_stats(a), label_stats(b));
    let (mean_a, mean_b) = (sa.mean?, sb.mean?);
    let (std_a, std_b) = (sa.std_dev, sb.std_dev);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if na + nb < 3.0 {
        return None;
    }
    let ss = std_a.map_or(0.0, |s| (na - 1.0) * s * s) + std_b.map_or(0.0, |s| (nb - 1.0) * s * s);
    let pooled = (ss / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        None
    } else {
        Some((mean_a - mean_b) / pooled)
    }
}

/// Precision recomputed through the genuine-acceptance rate, the genuine
/// base rate, and the predicted-genuine rate. Agrees with the direct
/// quotient tg/(tg+fg) up to floating-point rounding; the audit asserts the
/// residual stays below 1e-12.
pub(crate) fn precision_via_base_rate(counts: &ConfusionCounts) -> Option<f64> {
    let n = counts.total();
    let ng = counts.genuine_total();
    let predicted = counts.predicted_genuine();
    if n == 0 || ng == 0 || predicted == 0 {
        return None;
    }
    let tgr = counts.tg as f64 / ng as f64;
    let base_rate = ng as f64 / n as f64;
    let predicted_rate = predicted as f64 / n as f64;
    Some(tgr * base_rate / predicted_rate)
}

/// Run the full audit: resolve each operating point on the pooled curve,
/// then evaluate every (partition, operating point, criterion) combination
/// at that shared threshold. Per-entry failures are annotated rather than
/// aborting the audit.
pub fn audit(
    records: &[ScoreRecord],
    schema: &AttributeSchema,
    partitions: &[GroupPartition],
    kinds: &[OperatingPointKind],
    epsilon: f64,
) -> Result<FairnessReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if kinds.is_empty() {
        return Err(Error::Parameter("no operating points requested".into()));
    }
    for partition in partitions {
        check_partition(records, partition)?;
    }
    let curve = rate_curve(records)?;
    let resolved: Vec<_> = kinds
        .iter()
        .map(|&kind| resolve_operating_point(&curve, kind))
        .collect::<Result<_>>()?;
    let operating_points: Vec<ResolvedOperatingPoint> = resolved
        .iter()
        .map(|op| ResolvedOperatingPoint {
            label: op.kind.to_string(),
            threshold: op.threshold,
            pooled: op.achieved,
            eer: op.eer,
            warning: op.warning.clone(),
        })
        .collect();

    let partition_reports: Vec<PartitionReport> = par::map_indexed(partitions.len(), |p_idx| {
        let partition = &partitions[p_idx];
        let cells: Vec<CellSize> = partition
            .cells
            .iter()
            .map(|cell| {
                let genuine = cell
                    .indices
                    .iter()
                    .filter(|&&i| records[i].label == Label::Genuine)
                    .count() as u64;
                CellSize {
                    cell: cell.label.clone(),
                    records: cell.indices.len(),
                    genuine,
                    impostor: cell.indices.len() as u64 - genuine,
                }
            })
            .collect();
        let score_stats = group_score_stats(records, partition).expect("partition already checked");
        let at = resolved
            .iter()
            .map(|op| partition_at_point(records, partition, op.kind.to_string(), op.threshold, epsilon))
            .collect();
        PartitionReport {
            partition: partition.name.clone(),
            axes: partition.axes.clone(),
            cells,
            score_stats,
            at,
        }
    });

    Ok(FairnessReport {
        schema_version: 1,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        protocol: "shared decision threshold across all demographic groups".to_string(),
        epsilon,
        record_count: records.len(),
        records_digest: records_digest(records, schema)?,
        provenance: Default::default(),
        demographics: demographic_summary(records, schema)?,
        operating_points,
        partitions: partition_reports,
    })
}

fn partition_at_point(
    records: &[ScoreRecord],
    partition: &GroupPartition,
    operating_point: String,
    tau: f64,
    epsilon: f64,
) -> PartitionAtPoint {
    let cell_rates: Vec<CellRates> = partition
        .cells
        .iter()
        .map(|cell| {
            let counts = count_confusion_indexed(records, &cell.indices, tau);
            // Identity check on counts (Bayes rule applied to the cell).
            let direct = if counts.predicted_genuine() > 0 && counts.genuine_total() > 0 {
                Some(counts.tg as f64 / counts.predicted_genuine() as f64)
            } else {
                None
            };
            if let (Some(direct), Some(via)) = (direct, precision_via_base_rate(&counts)) {
                let residual = (direct - via).abs();
                assert!(
                    residual < 1e-12,
                    "precision identity violated in cell `{}` at tau {tau}: residual {residual}",
                    cell.label
                );
            }
            CellRates {
                cell: cell.label.clone(),
                rates: RateSet::from_counts(tau, counts),
            }
        })
        .collect();

    let note = if partition.non_empty_cells() < 2 {
        Some("no pairs: partition has fewer than two non-empty cells".to_string())
    } else {
        None
    };

    let criteria = Criterion::ALL
        .iter()
        .map(|&criterion| {
            let result = match criterion {
                Criterion::EqualisedOdds => equalised_odds(records, partition, tau, epsilon),
                Criterion::StatisticalParity => statistical_parity(records, partition, tau, epsilon),
                Criterion::PredictiveParity => predictive_parity(records, partition, tau, epsilon),
            };
            match result {
                Ok(gap) => CriterionOutcome {
                    criterion,
                    gap: Some(gap),
                    error: None,
                    note: note.clone(),
                },
                Err(err) => CriterionOutcome {
                    criterion,
                    gap: None,
                    error: Some(err.to_string()),
                    note: note.clone(),
                },
            }
        })
        .collect();

    PartitionAtPoint {
        operating_point,
        threshold: tau,
        cell_rates,
        criteria,
    }
}
