//! Score records: one row per comparison attempt, with a similarity score,
//! a genuine/impostor label, and the demographic attributes of the enrolled
//! subject.
//!
//! The on-disk format is UTF-8 CSV with a required header row:
//! `pair_id,score,label,<one column per schema attribute>`. The label column
//! accepts `genuine` / `impostor` case-insensitively. Scores must be finite;
//! non-finite scores never make it past ingestion.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::schema::AttributeSchema;

/// Outcome label of a comparison: same individual or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Genuine,
    Impostor,
}

impl Label {
    pub fn parse(s: &str) -> Option<Label> {
        match s.to_ascii_lowercase().as_str() {
            "genuine" => Some(Label::Genuine),
            "impostor" => Some(Label::Impostor),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Genuine => "genuine",
            Label::Impostor => "impostor",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A demographic attribute value. Schemas declare each attribute as either
/// categorical (string) or integer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Int(i64),
    Str(String),
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Int(v) => write!(f, "{v}"),
            AttrValue::Str(v) => f.write_str(v),
        }
    }
}

/// One comparison attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub pair_id: String,
    /// Similarity score; higher means more similar. Finite by construction.
    pub score: f64,
    pub label: Label,
    /// Attributes of the enrolled subject, keyed by attribute name. Contains
    /// every attribute declared in the active schema.
    pub attributes: BTreeMap<String, AttrValue>,
}

/// Records loaded from a score file, plus the file's content digest for
/// report provenance.
#[derive(Debug, Clone)]
pub struct LoadedScores {
    pub records: Vec<ScoreRecord>,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Load records from a score CSV file, validating every row against the
/// schema. Row numbers in errors are 1-based file line numbers.
pub fn load_scores(path: &Path, schema: &AttributeSchema) -> Result<LoadedScores> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let records = parse_scores(&bytes, schema)?;
    Ok(LoadedScores {
        records,
        sha256: sha256_hex(&bytes),
    })
}

/// Parse score CSV content. Split out from [`load_scores`] so generated data
/// can round-trip without touching the filesystem.
pub fn parse_scores(bytes: &[u8], schema: &AttributeSchema) -> Result<Vec<ScoreRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let headers = reader.headers()?.clone();
    let mut columns: BTreeMap<&str, usize> = BTreeMap::new();
    for (idx, name) in headers.iter().enumerate() {
        columns.insert(name, idx);
    }
    for required in ["pair_id", "score", "label"] {
        if !columns.contains_key(required) {
            return Err(Error::Schema(format!("missing required column `{required}`")));
        }
    }
    let mut attr_cols = Vec::new();
    for attr in &schema.attributes {
        let idx = *columns.get(attr.name.as_str()).ok_or_else(|| {
            Error::Schema(format!("missing required column `{}`", attr.name))
        })?;
        attr_cols.push((attr, idx));
    }
    let pair_col = columns["pair_id"];
    let score_col = columns["score"];
    let label_col = columns["label"];

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        // +1 for the header line; position lines are 0-based record offsets.
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| row.get(idx).unwrap_or("");

        let score: f64 = field(score_col).parse().map_err(|_| Error::Row {
            line,
            message: format!("unparseable score `{}`", field(score_col)),
        })?;
        if !score.is_finite() {
            return Err(Error::Row {
                line,
                message: format!("non-finite score `{}`", field(score_col)),
            });
        }
        let label = Label::parse(field(label_col)).ok_or_else(|| Error::Row {
            line,
            message: format!("unknown label `{}`", field(label_col)),
        })?;

        let mut attributes = BTreeMap::new();
        for (attr, idx) in &attr_cols {
            let raw = field(*idx);
            if raw.is_empty() {
                return Err(Error::Row {
                    line,
                    message: format!("empty value for attribute `{}`", attr.name),
                });
            }
            let value = attr.parse_value(raw).map_err(|message| Error::Row { line, message })?;
            attributes.insert(attr.name.clone(), value);
        }

        records.push(ScoreRecord {
            pair_id: field(pair_col).to_string(),
            score,
            label,
            attributes,
        });
    }

    if records.is_empty() {
        return Err(Error::Dataset("score file contains no data rows".into()));
    }
    Ok(records)
}

/// Serialize records to score CSV, with attribute columns in schema order.
/// This is the canonical serialization used for record-set digests.
pub fn write_scores(records: &[ScoreRecord], schema: &AttributeSchema) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["pair_id".to_string(), "score".to_string(), "label".to_string()];
    for attr in &schema.attributes {
        header.push(attr.name.clone());
    }
    writer.write_record(&header)?;
    for record in records {
        let mut row = vec![
            record.pair_id.clone(),
            format_score(record.score),
            record.label.as_str().to_string(),
        ];
        for attr in &schema.attributes {
            let value = record.attributes.get(&attr.name).ok_or_else(|| {
                Error::Schema(format!(
                    "record `{}` lacks attribute `{}`",
                    record.pair_id, attr.name
                ))
            })?;
            row.push(value.to_string());
        }
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Content digest of the canonical CSV serialization of a record set.
pub fn records_digest(records: &[ScoreRecord], schema: &AttributeSchema) -> Result<String> {
    Ok(sha256_hex(write_scores(records, schema)?.as_bytes()))
}

/// Shortest decimal form that round-trips the exact f64 value.
pub fn format_score(score: f64) -> String {
    // `{}` on f64 is the shortest representation that round-trips.
    let mut buf = format!("{score}");
    if !buf.contains('.') && !buf.contains('e') && !buf.contains('E') {
        buf.push_str(".0");
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::test_fixtures::demo_schema;

    const DEMO_CSV: &str = "\
pair_id,score,label,age,gender
p1,0.91,genuine,30,M
p2,0.12,impostor,50,F
";

    #[test]
    fn parses_rows_into_records() {
        let schema = demo_schema();
        let records = parse_scores(DEMO_CSV.as_bytes(), &schema).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].pair_id, "p1");
        assert_eq!(records[0].score, 0.91);
        assert_eq!(records[0].label, Label::Genuine);
        assert_eq!(records[0].attributes["age"], AttrValue::Int(30));
        assert_eq!(records[1].label, Label::Impostor);
        assert_eq!(records[1].attributes["gender"], AttrValue::Str("F".into()));
    }

    #[test]
    fn label_parse_is_case_insensitive() {
        let schema = demo_schema();
        let csv = "pair_id,score,label,age,gender\np1,0.5,GENUINE,30,M\n";
        let records = parse_scores(csv.as_bytes(), &schema).unwrap();
        assert_eq!(records[0].label, Label::Genuine);
    }

    #[test]
    fn non_finite_score_cites_line_number() {
        let schema = demo_schema();
        let csv = "pair_id,score,label,age,gender\np1,0.5,genuine,30,M\np2,NaN,impostor,50,F\n";
        let err = parse_scores(csv.as_bytes(), &schema).unwrap_err();
        match err {
            Error::Row { line, ref message } => {
                assert_eq!(line, 3);
                assert!(message.contains("non-finite"), "{message}");
            }
            other => panic!("expected row error, got {other}"),
        }
    }

    #[test]
    fn missing_column_names_the_column() {
        let schema = demo_schema();
        let csv = "pair_id,score,label,age\np1,0.5,genuine,30\n";
        let err = parse_scores(csv.as_bytes(), &schema).unwrap_err();
        assert!(err.to_string().contains("`gender`"), "{err}");
    }

    #[test]
    fn undeclared_attribute_value_is_a_row_error() {
        let schema = demo_schema();
        let csv = "pair_id,score,label,age,gender\np1,0.5,genuine,30,X\n";
        let err = parse_scores(csv.as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Row { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_file_is_a_dataset_error() {
        let schema = demo_schema();
        let csv = "pair_id,score,label,age,gender\n";
        let err = parse_scores(csv.as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Dataset(_)), "{err}");
    }

    #[test]
    fn row_count_is_preserved_at_dataset_scale() {
        // 1440 comparison rows, 60 distinct subjects.
        let schema = demo_schema();
        let mut csv = String::from("pair_id,score,label,age,gender\n");
        for i in 0..1440 {
            let subject = i % 60;
            let age = 20 + subject;
            let gender = if subject % 2 == 0 { "M" } else { "F" };
            let label = if i % 3 == 0 { "genuine" } else { "impostor" };
            csv.push_str(&format!("s{subject}-c{i},{:.4},{label},{age},{gender}\n", i as f64 / 1440.0));
        }
        let records = parse_scores(csv.as_bytes(), &schema).unwrap();
        assert_eq!(records.len(), 1440);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let schema = demo_schema();
        let records = parse_scores(DEMO_CSV.as_bytes(), &schema).unwrap();
        let csv = write_scores(&records, &schema).unwrap();
        let reloaded = parse_scores(csv.as_bytes(), &schema).unwrap();
        assert_eq!(records, reloaded);
    }
}
