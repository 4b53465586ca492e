//! Brute-force verification that the three fairness criteria cannot hold
//! simultaneously at any non-degenerate threshold when base rates differ.
//!
//! For every candidate threshold of the pooled score set, the verifier
//! evaluates equalised odds (both components), statistical parity, and
//! predictive parity across the partition's cells. Any threshold where all
//! three hold is classified against the known escape hatches:
//!
//! 1. `PerfectSystem`: pooled fgr = 0 and fir = 0.
//! 2. `TrivialAcceptAll` / `TrivialRejectAll`: pooled predicted-genuine
//!    rate at or beyond 1-epsilon / epsilon.
//! 3. `EqualBaseRates`: the cells' genuine base rates differ by less than
//!    epsilon.
//! 4. `TrivialRejectAll` (low genuine signal): pooled tgr times the base
//!    rate gap is at most epsilon. At such thresholds the genuine-acceptance
//!    rate is too small for precision to separate the groups by more than
//!    epsilon, the same degenerate regime as a classifier that rejects
//!    (almost) everything.
//!
//! A satisfying threshold that matches no escape hatch is `Unclassified`
//! and marks the verdict as a counterexample; it should never occur.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rates::{ConfusionCounts, GroupSweep, RateSet};
use crate::schema::GroupPartition;
use crate::score::ScoreRecord;
use crate::synth::{generate, random_unequal_population};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SatisfactionClass {
    TrivialAcceptAll,
    TrivialRejectAll,
    PerfectSystem,
    EqualBaseRates,
    Unclassified,
}

impl std::fmt::Display for SatisfactionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SatisfactionClass::TrivialAcceptAll => "TrivialAcceptAll",
            SatisfactionClass::TrivialRejectAll => "TrivialRejectAll",
            SatisfactionClass::PerfectSystem => "PerfectSystem",
            SatisfactionClass::EqualBaseRates => "EqualBaseRates",
            SatisfactionClass::Unclassified => "Unclassified",
        };
        f.write_str(s)
    }
}

/// Criteria outcomes at one candidate threshold. `pp_holds` is `None` when
/// predictive parity is undefined in some cell at this threshold; such
/// thresholds never satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOutcome {
    pub threshold: f64,
    pub eo_holds: bool,
    pub sp_holds: bool,
    pub pp_holds: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatisfyingThreshold {
    pub threshold: f64,
    pub class: SatisfactionClass,
    /// Pooled predicted-genuine rate at this threshold.
    pub predicted_rate: f64,
    /// Pooled genuine-acceptance rate at this threshold.
    pub pooled_tgr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellBaseRate {
    pub cell: String,
    pub genuine: u64,
    pub impostor: u64,
    pub base_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityVerdict {
    pub epsilon: f64,
    pub partition: String,
    pub cells: Vec<CellBaseRate>,
    pub base_rate_gap: f64,
    pub per_threshold: Vec<ThresholdOutcome>,
    pub satisfying: Vec<SatisfyingThreshold>,
    /// True when any satisfying threshold is Unclassified.
    pub counterexample: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub summary: String,
}

impl ImpossibilityVerdict {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One-line human summary. Trivial-only (or empty) satisfaction
    /// confirms the impossibility; otherwise the non-trivial classes are
    /// listed, most significant first.
    fn summarize(satisfying: &[SatisfyingThreshold]) -> String {
        let has = |class: SatisfactionClass| satisfying.iter().any(|s| s.class == class);
        let mut classes = Vec::new();
        for class in [
            SatisfactionClass::Unclassified,
            SatisfactionClass::EqualBaseRates,
            SatisfactionClass::PerfectSystem,
        ] {
            if has(class) {
                classes.push(class.to_string());
            }
        }
        if classes.is_empty() {
            "IMPOSSIBLE-CONFIRMED".to_string()
        } else {
            format!("SATISFIABLE ({})", classes.join(", "))
        }
    }
}

fn max_pairwise_gap(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// Sweep every candidate threshold of the pooled records and evaluate all
/// three criteria per cell. Requires at least two cells, each containing
/// both labels. With more than two cells the pairwise quantifier is
/// evaluated over every pair and aggregated by the maximum gap, noted in
/// the verdict.
pub fn verify(records: &[ScoreRecord], partition: &GroupPartition, epsilon: f64) -> Result<ImpossibilityVerdict> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    let populated: Vec<&crate::schema::PartitionCell> = partition
        .cells
        .iter()
        .filter(|c| !c.indices.is_empty())
        .collect();
    if populated.len() < 2 {
        return Err(Error::Partition(format!(
            "impossibility check needs at least two non-empty cells, got {}",
            populated.len()
        )));
    }
    let mut cell_of = vec![usize::MAX; records.len()];
    for (c, cell) in populated.iter().enumerate() {
        for &idx in &cell.indices {
            if idx >= records.len() || cell_of[idx] != usize::MAX {
                return Err(Error::Partition(format!(
                    "partition `{}` is not a disjoint cover of the records",
                    partition.name
                )));
            }
            cell_of[idx] = c;
        }
    }
    if cell_of.contains(&usize::MAX) {
        return Err(Error::Partition(format!(
            "partition `{}` does not cover every record",
            partition.name
        )));
    }

    let sweep = GroupSweep::build(records, &cell_of, populated.len());
    let cells: Vec<CellBaseRate> = populated
        .iter()
        .zip(&sweep.cells)
        .map(|(cell, counts)| CellBaseRate {
            cell: cell.label.clone(),
            genuine: counts.genuine_total,
            impostor: counts.impostor_total,
            base_rate: counts.genuine_total as f64
                / (counts.genuine_total + counts.impostor_total) as f64,
        })
        .collect();
    for cell in &cells {
        if cell.genuine == 0 || cell.impostor == 0 {
            let missing = if cell.genuine == 0 { "genuine" } else { "impostor" };
            return Err(Error::Partition(format!(
                "cell `{}` has no {missing} records; both labels are required per cell",
                cell.cell
            )));
        }
    }
    let base_rate_gap = max_pairwise_gap(&cells.iter().map(|c| c.base_rate).collect::<Vec<_>>());

    let evaluated: Vec<(ThresholdOutcome, Option<SatisfyingThreshold>)> =
        par::map_indexed(sweep.thresholds.len(), |j| {
            let threshold = sweep.thresholds[j];
            let per_cell: Vec<ConfusionCounts> =
                sweep.cells.iter().map(|c| c.confusion_at(j)).collect();

            let tgr: Vec<f64> = per_cell
                .iter()
                .map(|c| RateSet::from_counts(threshold, *c).tgr.expect("both labels per cell"))
                .collect();
            let fgr: Vec<f64> = per_cell
                .iter()
                .map(|c| RateSet::from_counts(threshold, *c).fgr.expect("both labels per cell"))
                .collect();
            let predicted: Vec<f64> = per_cell
                .iter()
                .map(|c| c.predicted_genuine() as f64 / c.total() as f64)
                .collect();

            let eo_holds = max_pairwise_gap(&tgr) < epsilon && max_pairwise_gap(&fgr) < epsilon;
            let sp_holds = max_pairwise_gap(&predicted) < epsilon;
            let precision: Vec<Option<f64>> = per_cell
                .iter()
                .map(|c| {
                    let predicted = c.predicted_genuine();
                    (predicted > 0).then(|| c.tg as f64 / predicted as f64)
                })
                .collect();
            let pp_holds = if precision.iter().any(|p| p.is_none()) {
                None
            } else {
                let values: Vec<f64> = precision.iter().map(|p| p.unwrap()).collect();
                Some(max_pairwise_gap(&values) < epsilon)
            };

            let outcome = ThresholdOutcome {
                threshold,
                eo_holds,
                sp_holds,
                pp_holds,
            };
            let satisfying = if eo_holds && sp_holds && pp_holds == Some(true) {
                let pooled = sweep.pooled_confusion_at(j);
                Some(classify(threshold, &pooled, base_rate_gap, epsilon))
            } else {
                None
            };
            (outcome, satisfying)
        });

    let per_threshold: Vec<ThresholdOutcome> = evaluated.iter().map(|(o, _)| *o).collect();
    let satisfying: Vec<SatisfyingThreshold> =
        evaluated.into_iter().filter_map(|(_, s)| s).collect();
    let counterexample = satisfying
        .iter()
        .any(|s| s.class == SatisfactionClass::Unclassified);
    let note = (populated.len() > 2).then(|| {
        format!(
            "{} cells: pairwise criteria aggregated by the maximum gap over all pairs",
            populated.len()
        )
    });
    let summary = ImpossibilityVerdict::summarize(&satisfying);
    Ok(ImpossibilityVerdict {
        epsilon,
        partition: partition.name.clone(),
        cells,
        base_rate_gap,
        per_threshold,
        satisfying,
        counterexample,
        note,
        summary,
    })
}

fn classify(
    threshold: f64,
    pooled: &ConfusionCounts,
    base_rate_gap: f64,
    epsilon: f64,
) -> SatisfyingThreshold {
    let n = pooled.total() as f64;
    let predicted_rate = pooled.predicted_genuine() as f64 / n;
    let pooled_tgr = pooled.tg as f64 / pooled.genuine_total() as f64;
    let class = if pooled.fg == 0 && pooled.fi == 0 {
        SatisfactionClass::PerfectSystem
    } else if predicted_rate >= 1.0 - epsilon {
        SatisfactionClass::TrivialAcceptAll
    } else if predicted_rate <= epsilon {
        SatisfactionClass::TrivialRejectAll
    } else if base_rate_gap < epsilon {
        SatisfactionClass::EqualBaseRates
    } else if pooled_tgr * base_rate_gap <= epsilon {
        // Too little genuine acceptance for precision to separate groups by
        // more than epsilon: the low-genuine-signal degenerate regime.
        SatisfactionClass::TrivialRejectAll
    } else {
        SatisfactionClass::Unclassified
    };
    SatisfyingThreshold {
        threshold,
        class,
        predicted_rate,
        pooled_tgr,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResidual {
    pub cell: String,
    /// |direct precision - precision via the base-rate identity|; `None`
    /// when a constituent is undefined.
    pub residual: Option<f64>,
}

/// Per-cell residual of the precision identity
/// `tg/(tg+fg) = [tg/(tg+fi)] * [(tg+fi)/n] / [(tg+fg)/n]`
/// evaluated on counts at threshold `tau`. Exact arithmetic gives zero; the
/// floating-point residual stays below 1e-12.
pub fn bayes_residual(
    records: &[ScoreRecord],
    partition: &GroupPartition,
    tau: f64,
) -> Result<Vec<CellResidual>> {
    let mut out = Vec::new();
    for cell in &partition.cells {
        let counts = crate::rates::count_confusion_indexed(records, &cell.indices, tau);
        let n = counts.total();
        let ng = counts.genuine_total();
        let predicted = counts.predicted_genuine();
        let residual = if n == 0 || ng == 0 || predicted == 0 {
            None
        } else {
            let direct = counts.tg as f64 / predicted as f64;
            let tgr = counts.tg as f64 / ng as f64;
            let base_rate = ng as f64 / n as f64;
            let predicted_rate = predicted as f64 / n as f64;
            Some((direct - tgr * base_rate / predicted_rate).abs())
        };
        out.push(CellResidual {
            cell: cell.label.clone(),
            residual,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u32,
    pub population_seed: u64,
    pub base_rate_gap: f64,
    pub thresholds_evaluated: usize,
    pub satisfying_thresholds: usize,
    pub confirmed: bool,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsReport {
    pub epsilon: f64,
    pub master_seed: u64,
    pub trials: u32,
    pub confirmed: u32,
    pub counterexamples: u32,
    pub generator: String,
    pub outcomes: Vec<TrialOutcome>,
}

impl TrialsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Generate `trials` random unequal-base-rate populations and verify each.
/// A trial is confirmed when no satisfying threshold is Unclassified.
pub fn run_synthetic_trials(trials: u32, master_seed: u64, epsilon: f64) -> Result<TrialsReport> {
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    let mut seed_rng = rand_chacha::ChaCha8Rng::seed_from_u64(master_seed);
    let trial_seeds: Vec<u64> = (0..trials).map(|_| seed_rng.next_u64()).collect();

    let outcomes: Vec<Result<TrialOutcome>> = par::map_indexed(trials as usize, |t| {
        let population_seed = trial_seeds[t];
        let spec = random_unequal_population(population_seed);
        let records = generate(&spec)?;
        let schema = spec.schema()?;
        let partition = crate::schema::partition(&records, &schema, &["group"])?;
        let verdict = verify(&records, &partition, epsilon)?;
        Ok(TrialOutcome {
            trial: t as u32,
            population_seed,
            base_rate_gap: verdict.base_rate_gap,
            thresholds_evaluated: verdict.per_threshold.len(),
            satisfying_thresholds: verdict.satisfying.len(),
            confirmed: !verdict.counterexample,
            summary: verdict.summary,
        })
    });
    let outcomes: Vec<TrialOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    let confirmed = outcomes.iter().filter(|o| o.confirmed).count() as u32;
    Ok(TrialsReport {
        epsilon,
        master_seed,
        trials,
        confirmed,
        counterexamples: trials - confirmed,
        generator: crate::synth::GENERATOR_NAME.to_string(),
        outcomes,
    })
}
