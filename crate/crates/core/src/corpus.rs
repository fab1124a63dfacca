//! Requirement records, their labels and CSV ingestion.
//!
//! The native schema is a three-column `id,text,label` CSV. Files published
//! with the expanded PROMISE header (`ProjectID,RequirementText,_class_`)
//! are mapped onto it by [`ColumnMapping::detect`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Requirement category. Variant order is the alphabetical order of the
/// codes, so the derived `Ord` sorts by code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// Availability
    A,
    /// Functional
    F,
    /// Fault tolerance
    FT,
    /// Legal
    L,
    /// Look and feel
    LF,
    /// Maintainability
    MN,
    /// Operability
    O,
    /// Performance
    PE,
    /// Portability
    PO,
    /// Scalability
    SC,
    /// Security
    SE,
    /// Usability
    US,
}

impl Label {
    pub const ALL: [Label; 12] = [
        Label::A,
        Label::F,
        Label::FT,
        Label::L,
        Label::LF,
        Label::MN,
        Label::O,
        Label::PE,
        Label::PO,
        Label::SC,
        Label::SE,
        Label::US,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Label::A => "A",
            Label::F => "F",
            Label::FT => "FT",
            Label::L => "L",
            Label::LF => "LF",
            Label::MN => "MN",
            Label::O => "O",
            Label::PE => "PE",
            Label::PO => "PO",
            Label::SC => "SC",
            Label::SE => "SE",
            Label::US => "US",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::A => "Availability",
            Label::F => "Functional",
            Label::FT => "Fault Tolerance",
            Label::L => "Legal",
            Label::LF => "Look-and-Feel",
            Label::MN => "Maintainability",
            Label::O => "Operability",
            Label::PE => "Performance",
            Label::PO => "Portability",
            Label::SC => "Scalability",
            Label::SE => "Security",
            Label::US => "Usability",
        }
    }

    pub fn is_functional(self) -> bool {
        self == Label::F
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseLabelError(pub String);

impl fmt::Display for ParseLabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label `{}`", self.0)
    }
}

impl std::error::Error for ParseLabelError {}

impl FromStr for Label {
    type Err = ParseLabelError;

    /// Case-insensitive, surrounding whitespace ignored.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let code = s.trim().to_ascii_uppercase();
        Label::ALL
            .iter()
            .copied()
            .find(|l| l.code() == code)
            .ok_or_else(|| ParseLabelError(s.to_string()))
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementRecord {
    pub id: String,
    pub text: String,
    pub label: Label,
}

/// Ordered collection of records. A record's position is its identity for
/// fold planning.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<RequirementRecord>,
}

impl Dataset {
    pub fn new(records: Vec<RequirementRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[RequirementRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Distinct labels present, sorted by code.
    pub fn classes(&self) -> Vec<Label> {
        class_distribution(self).into_keys().collect()
    }

    /// Records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset::new(indices.iter().map(|&i| self.records[i].clone()).collect())
    }

    /// Writes the canonical `id,text,label` form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "text", "label"])?;
        for r in &self.records {
            w.write_record([r.id.as_str(), r.text.as_str(), r.label.code()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

impl FromIterator<RequirementRecord> for Dataset {
    fn from_iter<T: IntoIterator<Item = RequirementRecord>>(iter: T) -> Self {
        Dataset::new(iter.into_iter().collect())
    }
}

/// Which CSV columns hold the id, text and label fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    /// When absent, the 1-based data row number becomes the id.
    pub id: Option<String>,
    pub text: String,
    pub label: String,
}

impl ColumnMapping {
    pub fn canonical() -> Self {
        Self {
            id: Some("id".into()),
            text: "text".into(),
            label: "label".into(),
        }
    }

    /// Header of the published expanded PROMISE file.
    pub fn promise_exp() -> Self {
        Self {
            id: Some("ProjectID".into()),
            text: "RequirementText".into(),
            label: "_class_".into(),
        }
    }

    /// Picks the PROMISE adapter when the header carries its text column,
    /// the canonical schema otherwise.
    pub fn detect(headers: &csv::StringRecord) -> Self {
        let has = |name: &str| headers.iter().any(|h| h.trim().eq_ignore_ascii_case(name));
        if has("RequirementText") {
            let label = ["_class_", "class", "label", "type"]
                .into_iter()
                .find(|c| has(c))
                .unwrap_or("_class_");
            Self {
                id: has("ProjectID").then(|| "ProjectID".to_string()),
                text: "RequirementText".into(),
                label: label.into(),
            }
        } else {
            Self::canonical()
        }
    }

    fn resolve(&self, headers: &csv::StringRecord) -> Result<ResolvedColumns> {
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .or_else(|| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name)))
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        Ok(ResolvedColumns {
            id: self.id.as_deref().map(find).transpose()?,
            text: find(&self.text)?,
            label: find(&self.label)?,
        })
    }
}

struct ResolvedColumns {
    id: Option<usize>,
    text: usize,
    label: usize,
}

/// Loads a labelled requirements CSV. `mapping = None` auto-detects the
/// schema from the header row.
pub fn load_promise_csv(path: impl AsRef<Path>, mapping: Option<&ColumnMapping>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_promise_csv(file, mapping)
}

pub fn read_promise_csv<R: Read>(reader: R, mapping: Option<&ColumnMapping>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mapping = match mapping {
        Some(m) => m.clone(),
        None => ColumnMapping::detect(&headers),
    };
    let cols = mapping.resolve(&headers)?;

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let field = |idx: usize| row.get(idx).unwrap_or("");
        let raw_label = field(cols.label);
        let label = raw_label.parse::<Label>().map_err(|_| Error::UnknownLabel {
            row: row_no,
            value: raw_label.to_string(),
        })?;
        let text = field(cols.text).trim();
        if text.is_empty() {
            return Err(Error::EmptyText { row: row_no });
        }
        let id = match cols.id {
            // PROMISE project ids repeat across rows; suffix the row number.
            Some(c) if mapping.id.as_deref() == Some("ProjectID") => format!("{}:{row_no}", field(c).trim()),
            Some(c) => field(c).to_string(),
            None => row_no.to_string(),
        };
        records.push(RequirementRecord {
            id,
            text: text.to_string(),
            label,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset::new(records))
}

/// Per-label record counts. Labels with no records are omitted.
pub fn class_distribution(d: &Dataset) -> BTreeMap<Label, usize> {
    let mut counts = BTreeMap::new();
    for r in d.records() {
        *counts.entry(r.label).or_insert(0) += 1;
    }
    counts
}
