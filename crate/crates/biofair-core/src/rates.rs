//! Confusion counting, rate curves over all achievable thresholds, and
//! operating-point selection.
//!
//! The decision rule is strict: a record with score `s` is predicted genuine
//! iff `s > τ`; ties at the threshold are predicted impostor. Candidate
//! thresholds are the midpoints between consecutive distinct scores plus one
//! sentinel below the minimum and one above the maximum, so the curve visits
//! every achievable confusion matrix exactly once, from accept-all to
//! reject-all.
//!
//! Rates are computed as the error rates `fgr = fg/(ti+fg)` and
//! `fir = fi/(tg+fi)`, with `tgr = 1 - fir` and `tir = 1 - fgr` as exact
//! floating-point complements (so `tgr + fir == 1` holds bit-exactly).
//! Zero-denominator rates are carried as explicit undefined markers, never
//! as 0 or NaN.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{Label, ScoreRecord};

/// Confusion counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Genuine pairs accepted.
    pub tg: u64,
    /// Impostor pairs rejected.
    pub ti: u64,
    /// Impostor pairs accepted.
    pub fg: u64,
    /// Genuine pairs rejected.
    pub fi: u64,
}

impl ConfusionCounts {
    pub fn genuine_total(&self) -> u64 {
        self.tg + self.fi
    }

    pub fn impostor_total(&self) -> u64 {
        self.ti + self.fg
    }

    pub fn total(&self) -> u64 {
        self.genuine_total() + self.impostor_total()
    }

    pub fn predicted_genuine(&self) -> u64 {
        self.tg + self.fg
    }
}

/// Rates and counts at one threshold. Undefined rates (zero denominator)
/// are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub threshold: f64,
    pub tgr: Option<f64>,
    pub tir: Option<f64>,
    pub fgr: Option<f64>,
    pub fir: Option<f64>,
    pub counts: ConfusionCounts,
}

impl RateSet {
    pub fn from_counts(threshold: f64, counts: ConfusionCounts) -> RateSet {
        let ng = counts.genuine_total();
        let ni = counts.impostor_total();
        let (fir, tgr) = if ng > 0 {
            let fir = counts.fi as f64 / ng as f64;
            (Some(fir), Some(1.0 - fir))
        } else {
            (None, None)
        };
        let (fgr, tir) = if ni > 0 {
            let fgr = counts.fg as f64 / ni as f64;
            (Some(fgr), Some(1.0 - fgr))
        } else {
            (None, None)
        };
        RateSet {
            threshold,
            tgr,
            tir,
            fgr,
            fir,
            counts,
        }
    }
}

/// Tally predictions against labels at threshold `tau`. Predicted genuine
/// iff score > tau.
pub fn count_confusion(records: &[ScoreRecord], tau: f64) -> ConfusionCounts {
    count_confusion_scores(records.iter().map(|r| (r.score, r.label)), tau)
}

/// Confusion counts restricted to the records at `indices`.
pub fn count_confusion_indexed(records: &[ScoreRecord], indices: &[usize], tau: f64) -> ConfusionCounts {
    count_confusion_scores(indices.iter().map(|&i| (records[i].score, records[i].label)), tau)
}

fn count_confusion_scores(pairs: impl Iterator<Item = (f64, Label)>, tau: f64) -> ConfusionCounts {
    let mut counts = ConfusionCounts { tg: 0, ti: 0, fg: 0, fi: 0 };
    for (score, label) in pairs {
        let predicted_genuine = score > tau;
        match (label, predicted_genuine) {
            (Label::Genuine, true) => counts.tg += 1,
            (Label::Genuine, false) => counts.fi += 1,
            (Label::Impostor, true) => counts.fg += 1,
            (Label::Impostor, false) => counts.ti += 1,
        }
    }
    counts
}

fn next_below(x: f64) -> f64 {
    let y = x - 1.0;
    if y < x {
        return y;
    }
    if x == 0.0 {
        -f64::MIN_POSITIVE
    } else if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

fn next_above(x: f64) -> f64 {
    let y = x + 1.0;
    if y > x {
        return y;
    }
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else if x > 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

/// Candidate thresholds for a set of distinct ascending scores: one sentinel
/// strictly below the minimum, the midpoint between each consecutive pair,
/// and one sentinel strictly above the maximum. Each candidate realizes a
/// distinct acceptance set.
fn candidate_thresholds(distinct: &[f64]) -> Vec<f64> {
    let m = distinct.len();
    let mut out = Vec::with_capacity(m + 1);
    out.push(next_below(distinct[0]));
    for j in 1..m {
        let (a, b) = (distinct[j - 1], distinct[j]);
        let mid = a + (b - a) / 2.0;
        // Midpoints of adjacent floats can round onto an endpoint; any value
        // in [a, b) keeps the acceptance set `score >= b` under strict `>`.
        out.push(if mid < b { mid.max(a) } else { a });
    }
    out.push(next_above(distinct[m - 1]));
    out
}

/// Per-cell accepted counts at every candidate threshold of the pooled
/// score set. Shared engine for rate curves, fairness sweeps, and the
/// impossibility verifier.
#[derive(Debug, Clone)]
pub(crate) struct GroupSweep {
    /// Ascending candidate thresholds, accept-all first.
    pub thresholds: Vec<f64>,
    /// Distinct scores in ascending order.
    pub distinct: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, Clone)]
pub(crate) struct SweepCell {
    pub genuine_total: u64,
    pub impostor_total: u64,
    /// Accepted genuine count at each candidate threshold.
    pub accepted_genuine: Vec<u64>,
    /// Accepted impostor count at each candidate threshold.
    pub accepted_impostor: Vec<u64>,
}

impl SweepCell {
    pub fn confusion_at(&self, t_idx: usize) -> ConfusionCounts {
        let tg = self.accepted_genuine[t_idx];
        let fg = self.accepted_impostor[t_idx];
        ConfusionCounts {
            tg,
            fg,
            fi: self.genuine_total - tg,
            ti: self.impostor_total - fg,
        }
    }
}

impl GroupSweep {
    /// `cell_of[i]` is the cell index of `records[i]`; cells with no records
    /// still get count arrays.
    pub fn build(records: &[ScoreRecord], cell_of: &[usize], n_cells: usize) -> GroupSweep {
        assert_eq!(records.len(), cell_of.len());
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| records[a].score.total_cmp(&records[b].score));

        let mut distinct = Vec::new();
        // Per distinct score, per cell: (genuine, impostor) records at that score.
        let mut at_value: Vec<Vec<(u64, u64)>> = Vec::new();
        for &i in &order {
            let score = records[i].score;
            if distinct.last() != Some(&score) {
                distinct.push(score);
                at_value.push(vec![(0, 0); n_cells]);
            }
            let slot = &mut at_value.last_mut().unwrap()[cell_of[i]];
            match records[i].label {
                Label::Genuine => slot.0 += 1,
                Label::Impostor => slot.1 += 1,
            }
        }

        let thresholds = if distinct.is_empty() {
            Vec::new()
        } else {
            candidate_thresholds(&distinct)
        };
        let m = distinct.len();
        let mut cells: Vec<SweepCell> = (0..n_cells)
            .map(|_| SweepCell {
                genuine_total: 0,
                impostor_total: 0,
                accepted_genuine: vec![0; thresholds.len()],
                accepted_impostor: vec![0; thresholds.len()],
            })
            .collect();
        // Accepted at candidate j = records with score >= distinct[j]
        // (suffix counts); candidate m accepts nothing.
        for c in 0..n_cells {
            let mut genuine = 0;
            let mut impostor = 0;
            for j in (0..m).rev() {
                genuine += at_value[j][c].0;
                impostor += at_value[j][c].1;
                cells[c].accepted_genuine[j] = genuine;
                cells[c].accepted_impostor[j] = impostor;
            }
            cells[c].genuine_total = genuine;
            cells[c].impostor_total = impostor;
        }

        GroupSweep {
            thresholds,
            distinct,
            cells,
        }
    }

    pub fn pooled_confusion_at(&self, t_idx: usize) -> ConfusionCounts {
        let mut counts = ConfusionCounts { tg: 0, ti: 0, fg: 0, fi: 0 };
        for cell in &self.cells {
            let c = cell.confusion_at(t_idx);
            counts.tg += c.tg;
            counts.ti += c.ti;
            counts.fg += c.fg;
            counts.fi += c.fi;
        }
        counts
    }
}

/// All achievable operating points, ascending by threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub points: Vec<RateSet>,
    /// Distinct scores underlying the candidates; needed to locate the
    /// acceptance behavior of an arbitrary fixed threshold.
    distinct: Vec<f64>,
}

impl RateCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The achieved rates of the decision rule `score > tau`, which always
    /// coincide with exactly one candidate's counts.
    pub fn rates_at(&self, tau: f64) -> RateSet {
        let idx = self.distinct.partition_point(|&d| d <= tau);
        RateSet {
            threshold: tau,
            ..self.points[idx]
        }
    }

    /// DET export: `threshold,fgr,fir,tgr,tir,tg,ti,fg,fi`, one row per
    /// candidate threshold, ascending.
    pub fn to_det_csv(&self) -> String {
        let mut out = String::from("threshold,fgr,fir,tgr,tir,tg,ti,fg,fi\n");
        for p in &self.points {
            let rate = |r: Option<f64>| r.map(|v| format!("{v}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.threshold,
                rate(p.fgr),
                rate(p.fir),
                rate(p.tgr),
                rate(p.tir),
                p.counts.tg,
                p.counts.ti,
                p.counts.fg,
                p.counts.fi
            ));
        }
        out
    }
}

/// Rate sets at every candidate threshold. Requires at least one genuine and
/// one impostor record.
pub fn rate_curve(records: &[ScoreRecord]) -> Result<RateCurve> {
    let cell_of = vec![0usize; records.len()];
    let sweep = GroupSweep::build(records, &cell_of, 1);
    curve_from_sweep(&sweep)
}

pub(crate) fn curve_from_sweep(sweep: &GroupSweep) -> Result<RateCurve> {
    if sweep.cells.is_empty() || sweep.distinct.is_empty() {
        return Err(Error::Dataset("rate curve of an empty record set".into()));
    }
    let pooled0 = sweep.pooled_confusion_at(0);
    if pooled0.genuine_total() == 0 {
        return Err(Error::MissingLabel(Label::Genuine));
    }
    if pooled0.impostor_total() == 0 {
        return Err(Error::MissingLabel(Label::Impostor));
    }
    let points = (0..sweep.thresholds.len())
        .map(|j| RateSet::from_counts(sweep.thresholds[j], sweep.pooled_confusion_at(j)))
        .collect();
    Ok(RateCurve {
        points,
        distinct: sweep.distinct.clone(),
    })
}

/// Threshold-selection rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatingPointKind {
    /// Threshold minimizing |fgr - fir|; ties go to the smaller threshold.
    Eer,
    /// Smallest threshold whose fgr is at or below the target.
    FgrTarget(f64),
    /// Smallest threshold with zero false-genuine rate.
    Zfgr,
    /// Largest threshold with zero false-impostor rate.
    Zfir,
    /// Smallest threshold whose false-impostor rate is nonzero; keeps
    /// predicted-genuine precision defined where exact Zfir would not.
    NearZfir,
    Fixed(f64),
}

impl fmt::Display for OperatingPointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatingPointKind::Eer => write!(f, "eer"),
            OperatingPointKind::FgrTarget(t) => write!(f, "fgr@{t}"),
            OperatingPointKind::Zfgr => write!(f, "zfgr"),
            OperatingPointKind::Zfir => write!(f, "zfir"),
            OperatingPointKind::NearZfir => write!(f, "near-zfir"),
            OperatingPointKind::Fixed(t) => write!(f, "fixed@{t}"),
        }
    }
}

impl FromStr for OperatingPointKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<OperatingPointKind> {
        let s = s.trim();
        match s {
            "eer" => return Ok(OperatingPointKind::Eer),
            "zfgr" => return Ok(OperatingPointKind::Zfgr),
            "zfir" => return Ok(OperatingPointKind::Zfir),
            "near-zfir" => return Ok(OperatingPointKind::NearZfir),
            _ => {}
        }
        if let Some(raw) = s.strip_prefix("fgr@") {
            let t: f64 = raw
                .parse()
                .map_err(|_| Error::Parameter(format!("bad fgr target `{raw}`")))?;
            return Ok(OperatingPointKind::FgrTarget(t));
        }
        if let Some(raw) = s.strip_prefix("fixed@") {
            let t: f64 = raw
                .parse()
                .map_err(|_| Error::Parameter(format!("bad fixed threshold `{raw}`")))?;
            return Ok(OperatingPointKind::Fixed(t));
        }
        Err(Error::Parameter(format!(
            "unknown operating point `{s}` (expected eer, fgr@<rate>, zfgr, zfir, near-zfir, fixed@<threshold>)"
        )))
    }
}

impl Serialize for OperatingPointKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OperatingPointKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A threshold-selection rule resolved against a curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub kind: OperatingPointKind,
    pub threshold: f64,
    pub achieved: RateSet,
    /// For EER: the reported rate, (fgr + fir) / 2 at the resolved threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Resolve a threshold-selection rule on a curve. The curve's construction
/// guarantees both rates are defined at every point.
pub fn resolve_operating_point(curve: &RateCurve, kind: OperatingPointKind) -> Result<OperatingPoint> {
    let points = &curve.points;
    let fgr = |p: &RateSet| p.fgr.expect("curve rates defined");
    let fir = |p: &RateSet| p.fir.expect("curve rates defined");

    let mut warning = None;
    let chosen: RateSet = match kind {
        OperatingPointKind::Eer => {
            let mut best = &points[0];
            let mut best_gap = (fgr(best) - fir(best)).abs();
            for p in &points[1..] {
                let gap = (fgr(p) - fir(p)).abs();
                if gap < best_gap {
                    best = p;
                    best_gap = gap;
                }
            }
            *best
        }
        OperatingPointKind::FgrTarget(t) => {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Parameter(format!("fgr target {t} outside [0, 1]")));
            }
            let p = points
                .iter()
                .find(|p| fgr(p) <= t)
                .expect("reject-all point has fgr 0");
            if t > 0.0 && fgr(p) < t / 10.0 {
                warning = Some(format!(
                    "sparse data: achieved fgr {} is more than 10x below target {t}",
                    fgr(p)
                ));
            }
            *p
        }
        OperatingPointKind::Zfgr => *points
            .iter()
            .find(|p| p.counts.fg == 0)
            .expect("reject-all point has fg 0"),
        OperatingPointKind::Zfir => *points
            .iter()
            .rev()
            .find(|p| p.counts.fi == 0)
            .expect("accept-all point has fi 0"),
        OperatingPointKind::NearZfir => *points
            .iter()
            .find(|p| p.counts.fi > 0)
            .expect("reject-all point has fi > 0"),
        OperatingPointKind::Fixed(tau) => {
            if !tau.is_finite() {
                return Err(Error::Parameter(format!("fixed threshold {tau} is not finite")));
            }
            curve.rates_at(tau)
        }
    };

    let eer = match kind {
        OperatingPointKind::Eer => Some((fgr(&chosen) + fir(&chosen)) / 2.0),
        _ => None,
    };
    Ok(OperatingPoint {
        kind,
        threshold: chosen.threshold,
        achieved: chosen,
        eer,
        warning,
    })
}
