//! Seeded synthetic score populations: per-cell genuine/impostor score
//! distributions with controlled base rates.
//!
//! Generation is a pure function of (spec, seed) with a portable stream
//! contract: a ChaCha8 stream seeded via `seed_from_u64`, each variate
//! drawn as `(u64 >> 11 + 0.5) / 2^53` (open unit interval) and mapped
//! through the inverse normal CDF (statrs 0.19 erfc_inv). Any implementation of the same
//! contract reproduces the byte-identical score sequence. Cells are
//! generated in spec order, genuine scores before impostor scores; explicit
//! score lists consume no randomness.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{AttrKind, AttributeDef, AttributeSchema, BinPredicate, BinRule};
use crate::score::{AttrValue, Label, ScoreRecord};

/// Name and version of the generation contract, recorded in manifests.
pub const GENERATOR_NAME: &str = "chacha8-u53-probit-erfcinv/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreDistribution {
    Gaussian { mean: f64, std: f64 },
    Explicit { scores: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub label: String,
    pub attributes: BTreeMap<String, AttrValue>,
    pub genuine_count: usize,
    pub impostor_count: usize,
    pub genuine: ScoreDistribution,
    pub impostor: ScoreDistribution,
}

impl CellSpec {
    /// Fraction of this cell's comparisons that are genuine.
    pub fn base_rate(&self) -> f64 {
        self.genuine_count as f64 / (self.genuine_count + self.impostor_count) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub seed: u64,
    pub cells: Vec<CellSpec>,
}

impl PopulationSpec {
    pub fn from_json(json: &str) -> Result<PopulationSpec> {
        let spec: PopulationSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &std::path::Path) -> Result<PopulationSpec> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn base_rates(&self) -> Vec<(String, f64)> {
        self.cells
            .iter()
            .map(|c| (c.label.clone(), c.base_rate()))
            .collect()
    }

    /// Largest pairwise difference in per-cell base rates.
    pub fn base_rate_gap(&self) -> f64 {
        let rates: Vec<f64> = self.cells.iter().map(|c| c.base_rate()).collect();
        let mut gap: f64 = 0.0;
        for i in 0..rates.len() {
            for j in (i + 1)..rates.len() {
                gap = gap.max((rates[i] - rates[j]).abs());
            }
        }
        gap
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Spec("population has no cells".into()));
        }
        let total: usize = self
            .cells
            .iter()
            .map(|c| c.genuine_count + c.impostor_count)
            .sum();
        if total == 0 {
            return Err(Error::Spec("population has zero total records".into()));
        }
        let reference_keys: Vec<&String> = self.cells[0].attributes.keys().collect();
        let mut seen = BTreeMap::new();
        for cell in &self.cells {
            if seen.insert(&cell.label, ()).is_some() {
                return Err(Error::Spec(format!("duplicate cell label `{}`", cell.label)));
            }
            if cell.genuine_count + cell.impostor_count == 0 {
                return Err(Error::Spec(format!(
                    "cell `{}` has zero records in both labels",
                    cell.label
                )));
            }
            let keys: Vec<&String> = cell.attributes.keys().collect();
            if keys != reference_keys {
                return Err(Error::Spec(format!(
                    "cell `{}` declares different attributes than cell `{}`",
                    cell.label, self.cells[0].label
                )));
            }
            for (which, count, dist) in [
                ("genuine", cell.genuine_count, &cell.genuine),
                ("impostor", cell.impostor_count, &cell.impostor),
            ] {
                match dist {
                    ScoreDistribution::Gaussian { mean, std } => {
                        if !mean.is_finite() {
                            return Err(Error::Spec(format!(
                                "cell `{}` {which} mean is not finite",
                                cell.label
                            )));
                        }
                        if !(std.is_finite() && *std > 0.0) {
                            return Err(Error::Spec(format!(
                                "cell `{}` {which} std must be positive, got {std}",
                                cell.label
                            )));
                        }
                    }
                    ScoreDistribution::Explicit { scores } => {
                        if scores.len() != count {
                            return Err(Error::Spec(format!(
                                "cell `{}` {which} explicit list has {} scores for count {count}",
                                cell.label,
                                scores.len()
                            )));
                        }
                        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
                            return Err(Error::Spec(format!(
                                "cell `{}` {which} explicit list contains non-finite score {bad}",
                                cell.label
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Schema induced by the cells' attribute values: categorical attributes
    /// get one bin per observed value; integer attributes get consecutive
    /// ranges labeled by their lower endpoints.
    pub fn schema(&self) -> Result<AttributeSchema> {
        self.validate()?;
        let mut attributes = Vec::new();
        for name in self.cells[0].attributes.keys() {
            let mut values: Vec<&AttrValue> = self.cells.iter().map(|c| &c.attributes[name]).collect();
            values.sort();
            values.dedup();
            let all_int = values.iter().all(|v| matches!(v, AttrValue::Int(_)));
            let def = if all_int {
                let ints: Vec<i64> = values
                    .iter()
                    .map(|v| match v {
                        AttrValue::Int(i) => *i,
                        AttrValue::Str(_) => unreachable!(),
                    })
                    .collect();
                let (min, max) = (ints[0], *ints.last().unwrap());
                let bins = ints
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| BinRule {
                        name: v.to_string(),
                        predicate: BinPredicate::Range {
                            min: Some(v),
                            max: Some(if i + 1 < ints.len() { ints[i + 1] - 1 } else { max }),
                        },
                    })
                    .collect();
                AttributeDef {
                    name: name.clone(),
                    kind: AttrKind::Integer { min, max },
                    bins,
                }
            } else {
                let strings: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                let bins = strings
                    .iter()
                    .map(|v| BinRule {
                        name: v.clone(),
                        predicate: BinPredicate::Values { values: vec![v.clone()] },
                    })
                    .collect();
                AttributeDef {
                    name: name.clone(),
                    kind: AttrKind::Categorical { values: strings },
                    bins,
                }
            };
            attributes.push(def);
        }
        let schema = AttributeSchema { attributes };
        schema.validate()?;
        Ok(schema)
    }
}

fn unit_open(u: u64) -> f64 {
    ((u >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Generate the population: deterministic for a fixed spec and seed.
pub fn generate(spec: &PopulationSpec) -> Result<Vec<ScoreRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::new();
    for cell in &spec.cells {
        for (label, count, dist) in [
            (Label::Genuine, cell.genuine_count, &cell.genuine),
            (Label::Impostor, cell.impostor_count, &cell.impostor),
        ] {
            for i in 0..count {
                let score = match dist {
                    ScoreDistribution::Gaussian { mean, std } => {
                        mean + std * inverse_normal_cdf(unit_open(rng.next_u64()))
                    }
                    ScoreDistribution::Explicit { scores } => scores[i],
                };
                records.push(ScoreRecord {
                    pair_id: format!("{}-{}-{}", cell.label, label.as_str(), i),
                    score,
                    label,
                    attributes: cell.attributes.clone(),
                });
            }
        }
    }
    Ok(records)
}

/// Two cells with identical per-label score distributions but genuine base
/// rates 0.6 and 0.3. The genuine distribution sits well above the impostor
/// bulk, so low-fgr operating points still accept a large share of genuine
/// comparisons, while the distributions overlap enough that no threshold is
/// error-free.
pub fn preset_unequal_base_rates(seed: u64) -> PopulationSpec {
    let cell = |label: &str, genuine_count: usize, impostor_count: usize| CellSpec {
        label: label.to_string(),
        attributes: BTreeMap::from([(
            "group".to_string(),
            AttrValue::Str(label.to_string()),
        )]),
        genuine_count,
        impostor_count,
        genuine: ScoreDistribution::Gaussian { mean: 3.0, std: 1.0 },
        impostor: ScoreDistribution::Gaussian { mean: 0.0, std: 1.0 },
    };
    PopulationSpec {
        seed,
        cells: vec![cell("a", 600, 400), cell("b", 300, 700)],
    }
}

/// Random two-cell population for the impossibility trial corpus: identical
/// per-label distributions, base-rate gap at least 0.2, and an impostor
/// spread (std 2.5) wide relative to the genuine bulk (std at most 1.2,
/// mean at most 2). The wide impostor tail keeps impostor acceptance
/// nonzero wherever genuine acceptance is non-negligible, which is the
/// overlap hypothesis the trial corpus is meant to embody.
pub fn random_unequal_population(seed: u64) -> PopulationSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_a = 2000 + (rng.next_u64() % 1001) as usize;
    let n_b = 2000 + (rng.next_u64() % 1001) as usize;
    let (base_b, gap, genuine_mean, genuine_std) = {
        let mut draw = |lo: f64, hi: f64| lo + (hi - lo) * unit_open(rng.next_u64());
        (draw(0.25, 0.35), draw(0.2, 0.45), draw(1.0, 2.0), draw(0.8, 1.2))
    };
    let base_a = base_b + gap;
    let generation_seed = rng.next_u64();

    let cell = |label: &str, n: usize, base: f64| {
        let genuine_count = (base * n as f64).round() as usize;
        CellSpec {
            label: label.to_string(),
            attributes: BTreeMap::from([(
                "group".to_string(),
                AttrValue::Str(label.to_string()),
            )]),
            genuine_count,
            impostor_count: n - genuine_count,
            genuine: ScoreDistribution::Gaussian {
                mean: genuine_mean,
                std: genuine_std,
            },
            impostor: ScoreDistribution::Gaussian { mean: 0.0, std: 2.5 },
        }
    };
    PopulationSpec {
        seed: generation_seed,
        cells: vec![cell("a", n_a, base_a), cell("b", n_b, base_b)],
    }
}

/// Inverse of the standard normal CDF. Returns NaN outside (0, 1).
///
/// Computed as `∓√2 · erfc_inv(2·min(p, 1-p))`: the factor-of-two scaling
/// is exact, and `1 - p` is exact for `p ≥ 0.5`, so the complementary
/// error function inverse receives the tail probability at full precision
/// on both sides.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    if p <= 0.5 {
        -sqrt2 * statrs::function::erf::erfc_inv(2.0 * p)
    } else {
        sqrt2 * statrs::function::erf::erfc_inv(2.0 * (1.0 - p))
    }
}
