//! Attribute schemas, demographic binning, group partitions, and the
//! per-attribute demographic summary.
//!
//! A schema declares each attribute (categorical or integer), its allowed
//! domain, and a set of binning rules that must be exhaustive and disjoint
//! over that domain. Partitions assign every record to exactly one cell,
//! either along a single binned attribute or along the cross product of
//! several (intersectional cells).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{sha256_hex, AttrValue, ScoreRecord};

/// Attribute domain declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttrKind {
    Categorical { values: Vec<String> },
    Integer { min: i64, max: i64 },
}

/// Predicate assigning attribute values to a bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinPredicate {
    /// Membership in an explicit value set (categorical attributes).
    Values { values: Vec<String> },
    /// Inclusive integer range; a missing bound extends to the attribute's
    /// declared domain edge.
    Range {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<i64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRule {
    pub name: String,
    #[serde(flatten)]
    pub predicate: BinPredicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttrKind,
    pub bins: Vec<BinRule>,
}

impl AttributeDef {
    /// Parse a raw field into a typed value, checking it against the declared
    /// domain.
    pub fn parse_value(&self, raw: &str) -> std::result::Result<AttrValue, String> {
        match &self.kind {
            AttrKind::Categorical { values } => {
                if values.iter().any(|v| v == raw) {
                    Ok(AttrValue::Str(raw.to_string()))
                } else {
                    Err(format!(
                        "value `{raw}` not declared for attribute `{}`",
                        self.name
                    ))
                }
            }
            AttrKind::Integer { min, max } => {
                let v: i64 = raw
                    .parse()
                    .map_err(|_| format!("value `{raw}` is not an integer for attribute `{}`", self.name))?;
                if v < *min || v > *max {
                    Err(format!(
                        "value {v} outside declared range [{min}, {max}] for attribute `{}`",
                        self.name
                    ))
                } else {
                    Ok(AttrValue::Int(v))
                }
            }
        }
    }

    /// Name of the bin a value falls into.
    pub fn bin_of(&self, value: &AttrValue) -> Result<&str> {
        for bin in &self.bins {
            let hit = match (&bin.predicate, value) {
                (BinPredicate::Values { values }, AttrValue::Str(s)) => values.iter().any(|v| v == s),
                (BinPredicate::Range { min, max }, AttrValue::Int(v)) => {
                    min.is_none_or(|lo| *v >= lo) && max.is_none_or(|hi| *v <= hi)
                }
                _ => false,
            };
            if hit {
                return Ok(&bin.name);
            }
        }
        Err(Error::Partition(format!(
            "value `{value}` of attribute `{}` matches no declared bin",
            self.name
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<AttributeDef>,
}

impl AttributeSchema {
    pub fn from_json(json: &str) -> Result<AttributeSchema> {
        let schema: AttributeSchema = serde_json::from_str(json)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: &Path) -> Result<AttributeSchema> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn attribute(&self, name: &str) -> Result<&AttributeDef> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Partition(format!("unknown axis `{name}`")))
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn canonical_digest(&self) -> String {
        sha256_hex(self.to_canonical_json().as_bytes())
    }

    /// Check that bin names are unique and that every attribute's bins are
    /// exhaustive and disjoint over its declared domain.
    pub fn validate(&self) -> Result<()> {
        let mut seen_attrs = BTreeMap::new();
        for attr in &self.attributes {
            if seen_attrs.insert(&attr.name, ()).is_some() {
                return Err(Error::Schema(format!("duplicate attribute `{}`", attr.name)));
            }
            let mut seen_bins = BTreeMap::new();
            for bin in &attr.bins {
                if seen_bins.insert(&bin.name, ()).is_some() {
                    return Err(Error::Schema(format!(
                        "duplicate bin `{}` for attribute `{}`",
                        bin.name, attr.name
                    )));
                }
            }
            if attr.bins.is_empty() {
                return Err(Error::Schema(format!("attribute `{}` declares no bins", attr.name)));
            }
            match &attr.kind {
                AttrKind::Categorical { values } => validate_categorical_bins(attr, values)?,
                AttrKind::Integer { min, max } => validate_integer_bins(attr, *min, *max)?,
            }
        }
        Ok(())
    }
}

fn validate_categorical_bins(attr: &AttributeDef, values: &[String]) -> Result<()> {
    let mut covered: BTreeMap<&str, &str> = BTreeMap::new();
    for bin in &attr.bins {
        match &bin.predicate {
            BinPredicate::Values { values: bin_values } => {
                for v in bin_values {
                    if !values.iter().any(|d| d == v) {
                        return Err(Error::Schema(format!(
                            "bin `{}` of `{}` references undeclared value `{v}`",
                            bin.name, attr.name
                        )));
                    }
                    if let Some(prev) = covered.insert(v, &bin.name) {
                        return Err(Error::Schema(format!(
                            "value `{v}` of `{}` assigned to both `{prev}` and `{}`",
                            attr.name, bin.name
                        )));
                    }
                }
            }
            BinPredicate::Range { .. } => {
                return Err(Error::Schema(format!(
                    "bin `{}` of categorical attribute `{}` uses a range predicate",
                    bin.name, attr.name
                )));
            }
        }
    }
    for v in values {
        if !covered.contains_key(v.as_str()) {
            return Err(Error::Schema(format!(
                "value `{v}` of `{}` is covered by no bin",
                attr.name
            )));
        }
    }
    Ok(())
}

fn validate_integer_bins(attr: &AttributeDef, min: i64, max: i64) -> Result<()> {
    if min > max {
        return Err(Error::Schema(format!(
            "attribute `{}` declares empty range [{min}, {max}]",
            attr.name
        )));
    }
    let mut intervals = Vec::new();
    for bin in &attr.bins {
        match &bin.predicate {
            BinPredicate::Range { min: lo, max: hi } => {
                let lo = lo.unwrap_or(min).max(min);
                let hi = hi.unwrap_or(max).min(max);
                if lo > hi {
                    return Err(Error::Schema(format!(
                        "bin `{}` of `{}` covers no values in the declared range",
                        bin.name, attr.name
                    )));
                }
                intervals.push((lo, hi, &bin.name));
            }
            BinPredicate::Values { .. } => {
                return Err(Error::Schema(format!(
                    "bin `{}` of integer attribute `{}` uses a value-set predicate",
                    bin.name, attr.name
                )));
            }
        }
    }
    intervals.sort();
    let mut expected = min;
    for (lo, hi, name) in intervals {
        if lo > expected {
            return Err(Error::Schema(format!(
                "values {expected}..{} of `{}` are covered by no bin",
                lo - 1,
                attr.name
            )));
        }
        if lo < expected {
            return Err(Error::Schema(format!(
                "bin `{name}` of `{}` overlaps a previous bin at {lo}",
                attr.name
            )));
        }
        expected = hi + 1;
    }
    if expected <= max {
        return Err(Error::Schema(format!(
            "values {expected}..{max} of `{}` are covered by no bin",
            attr.name
        )));
    }
    Ok(())
}

/// One cell of a partition: a label and the indices of its records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCell {
    pub label: String,
    pub indices: Vec<usize>,
}

/// A named, exhaustive, disjoint assignment of records to demographic groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub name: String,
    pub axes: Vec<String>,
    pub cells: Vec<PartitionCell>,
}

impl GroupPartition {
    pub fn total_records(&self) -> usize {
        self.cells.iter().map(|c| c.indices.len()).sum()
    }

    pub fn non_empty_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.indices.is_empty()).count()
    }
}

/// Partition records along one or more binned attributes. Cells are the
/// cross product of the axes' bins in declaration order (first axis
/// outermost); empty cells are kept so they can be reported.
pub fn partition(
    records: &[ScoreRecord],
    schema: &AttributeSchema,
    axes: &[&str],
) -> Result<GroupPartition> {
    if axes.is_empty() {
        return Err(Error::Partition("partition requires at least one axis".into()));
    }
    let defs: Vec<&AttributeDef> = axes
        .iter()
        .map(|axis| schema.attribute(axis))
        .collect::<Result<_>>()?;

    // Cross product of bin names, first axis outermost.
    let mut labels: Vec<String> = vec![String::new()];
    for def in &defs {
        let mut next = Vec::with_capacity(labels.len() * def.bins.len());
        for prefix in &labels {
            for bin in &def.bins {
                if prefix.is_empty() {
                    next.push(bin.name.clone());
                } else {
                    next.push(format!("{prefix}-{}", bin.name));
                }
            }
        }
        labels = next;
    }
    let mut cell_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        cell_index.insert(label, i);
    }
    let mut cells: Vec<PartitionCell> = labels
        .iter()
        .map(|label| PartitionCell {
            label: label.clone(),
            indices: Vec::new(),
        })
        .collect();

    for (idx, record) in records.iter().enumerate() {
        let mut label = String::new();
        for def in &defs {
            let value = record.attributes.get(&def.name).ok_or_else(|| {
                Error::Partition(format!(
                    "record `{}` lacks attribute `{}`",
                    record.pair_id, def.name
                ))
            })?;
            let bin = def.bin_of(value)?;
            if label.is_empty() {
                label.push_str(bin);
            } else {
                label.push('-');
                label.push_str(bin);
            }
        }
        let cell = cell_index[label.as_str()];
        cells[cell].indices.push(idx);
    }

    let partition = GroupPartition {
        name: axes.join("+"),
        axes: axes.iter().map(|s| s.to_string()).collect(),
        cells,
    };
    debug_assert_eq!(partition.total_records(), records.len());
    Ok(partition)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCount {
    pub bin: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCount {
    pub value: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSummary {
    pub attribute: String,
    /// Counts per declared bin, in bin declaration order.
    pub bins: Vec<BinCount>,
    /// Raw (pre-binning) value counts. For categorical attributes every
    /// declared value appears, preserving the dataset's original label set;
    /// for integer attributes the observed values appear in ascending order.
    pub raw_values: Vec<ValueCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicSummary {
    pub total_records: usize,
    pub attributes: Vec<AttributeSummary>,
}

/// Per-attribute bin and raw-value counts with fractions of the record set.
pub fn demographic_summary(
    records: &[ScoreRecord],
    schema: &AttributeSchema,
) -> Result<DemographicSummary> {
    if records.is_empty() {
        return Err(Error::Dataset("demographic summary of an empty record set".into()));
    }
    let n = records.len();
    let mut attributes = Vec::new();
    for def in &schema.attributes {
        let mut bin_counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut raw_counts: BTreeMap<AttrValue, usize> = BTreeMap::new();
        for record in records {
            let value = record.attributes.get(&def.name).ok_or_else(|| {
                Error::Partition(format!(
                    "record `{}` lacks attribute `{}`",
                    record.pair_id, def.name
                ))
            })?;
            *bin_counts.entry(def.bin_of(value)?).or_insert(0) += 1;
            *raw_counts.entry(value.clone()).or_insert(0) += 1;
        }
        let bins = def
            .bins
            .iter()
            .map(|bin| {
                let count = bin_counts.get(bin.name.as_str()).copied().unwrap_or(0);
                BinCount {
                    bin: bin.name.clone(),
                    count,
                    fraction: count as f64 / n as f64,
                }
            })
            .collect();
        let raw_values = match &def.kind {
            AttrKind::Categorical { values } => values
                .iter()
                .map(|v| {
                    let count = raw_counts.get(&AttrValue::Str(v.clone())).copied().unwrap_or(0);
                    ValueCount {
                        value: v.clone(),
                        count,
                        fraction: count as f64 / n as f64,
                    }
                })
                .collect(),
            AttrKind::Integer { .. } => raw_counts
                .iter()
                .map(|(v, &count)| ValueCount {
                    value: v.to_string(),
                    count,
                    fraction: count as f64 / n as f64,
                })
                .collect(),
        };
        attributes.push(AttributeSummary {
            attribute: def.name.clone(),
            bins,
            raw_values,
        });
    }
    Ok(DemographicSummary {
        total_records: n,
        attributes,
    })
}
