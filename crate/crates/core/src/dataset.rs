//! The 7-column analysis dataset: recall rows joined with device
//! classifications on `product_code`, cleaned, and stored as CSV.

use crate::openfda_client::{ClassificationRecord, PartialRecall};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const CSV_HEADER: [&str; 7] = [
    "product_code",
    "event_date_posted",
    "recalling_firm",
    "root_cause_description",
    "product_quantity",
    "device_name",
    "device_class",
];

const DATE_FORMAT: &str = "%Y-%m-%d";
const KEPT_PUNCTUATION: [char; 6] = ['/', ',', '(', ')', '-', '.'];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("dataset row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeviceClass {
    One,
    Two,
    Three,
    Unknown,
}

impl DeviceClass {
    /// openFDA publishes "1", "2", "3" plus a few non-numeric codes; anything
    /// else is unknown.
    pub fn parse(s: &str) -> Self {
        match s.trim() {
            "1" => DeviceClass::One,
            "2" => DeviceClass::Two,
            "3" => DeviceClass::Three,
            _ => DeviceClass::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceClass::One => "1",
            DeviceClass::Two => "2",
            DeviceClass::Three => "3",
            DeviceClass::Unknown => "",
        }
    }
}

impl fmt::Display for DeviceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One recall event. Empty strings and `None` mark absent values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecallRecord {
    pub product_code: String,
    pub event_date_posted: Option<NaiveDate>,
    pub recalling_firm: String,
    pub root_cause_description: String,
    pub product_quantity: String,
    pub device_name: String,
    pub device_class: DeviceClass,
}

/// Accepts `YYYY-MM-DD` and openFDA's compact `YYYYMMDD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, DATE_FORMAT)
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .ok()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStats {
    /// Recall rows whose product code had no classification entry.
    pub unmatched_product_codes: usize,
    /// Classification entries ignored because their code was already seen.
    pub duplicate_classification_codes: usize,
}

pub fn merge_datasets(
    recalls: &[PartialRecall],
    classifications: &[ClassificationRecord],
) -> (Vec<RecallRecord>, MergeStats) {
    let mut stats = MergeStats::default();
    let mut lookup: HashMap<&str, &ClassificationRecord> = HashMap::new();
    for c in classifications {
        if lookup.contains_key(c.product_code.as_str()) {
            stats.duplicate_classification_codes += 1;
            log::warn!(
                "duplicate classification for product code {:?}; keeping the first",
                c.product_code
            );
        } else {
            lookup.insert(c.product_code.as_str(), c);
        }
    }
    let records = recalls
        .iter()
        .map(|r| {
            let class = lookup.get(r.product_code.as_str());
            if class.is_none() {
                stats.unmatched_product_codes += 1;
            }
            RecallRecord {
                product_code: r.product_code.clone(),
                event_date_posted: parse_date(&r.event_date_posted),
                recalling_firm: r.recalling_firm.clone(),
                root_cause_description: r.root_cause_description.clone(),
                product_quantity: r.product_quantity.clone(),
                device_name: class.map(|c| c.device_name.clone()).unwrap_or_default(),
                device_class: class
                    .map(|c| DeviceClass::parse(&c.device_class))
                    .unwrap_or(DeviceClass::Unknown),
            }
        })
        .collect();
    (records, stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningRules {
    pub date_from: NaiveDate,
    pub date_to: NaiveDate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub dropped_null_root_cause: usize,
    pub dropped_duplicates: usize,
    pub dropped_date_outliers: usize,
    pub stripped_char_count: usize,
    pub unmatched_product_codes: usize,
}

fn strip_special(s: &str, removed: &mut usize) -> String {
    s.chars()
        .filter(|&c| {
            let keep = c.is_alphanumeric() || c == ' ' || KEPT_PUNCTUATION.contains(&c);
            if !keep {
                *removed += 1;
            }
            keep
        })
        .collect()
}

fn is_blank(s: &str) -> bool {
    s.trim().is_empty()
}

/// Drop blank root causes, strip special characters, drop exact duplicates,
/// drop records dated outside the rules' range. Survivors keep input order.
///
/// A root cause that only becomes blank after stripping is dropped under the
/// blank rule as well, which keeps the function idempotent.
pub fn clean(records: &[RecallRecord], rules: &CleaningRules) -> (Vec<RecallRecord>, CleaningReport) {
    let mut report = CleaningReport::default();
    let mut seen: HashSet<RecallRecord> = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if is_blank(&r.root_cause_description) {
            report.dropped_null_root_cause += 1;
            continue;
        }
        let mut removed = 0;
        let stripped = RecallRecord {
            product_code: strip_special(&r.product_code, &mut removed),
            event_date_posted: r.event_date_posted,
            recalling_firm: strip_special(&r.recalling_firm, &mut removed),
            root_cause_description: strip_special(&r.root_cause_description, &mut removed),
            product_quantity: strip_special(&r.product_quantity, &mut removed),
            device_name: strip_special(&r.device_name, &mut removed),
            device_class: r.device_class,
        };
        report.stripped_char_count += removed;
        if is_blank(&stripped.root_cause_description) {
            report.dropped_null_root_cause += 1;
            continue;
        }
        if !seen.insert(stripped.clone()) {
            report.dropped_duplicates += 1;
            continue;
        }
        let in_range = stripped
            .event_date_posted
            .is_some_and(|d| d >= rules.date_from && d <= rules.date_to);
        if !in_range {
            report.dropped_date_outliers += 1;
            continue;
        }
        out.push(stripped);
    }
    (out, report)
}

pub fn write_dataset_to<W: Write>(records: &[RecallRecord], writer: W) -> Result<(), DatasetError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let date = r
            .event_date_posted
            .map(|d| d.format(DATE_FORMAT).to_string())
            .unwrap_or_default();
        w.write_record([
            r.product_code.as_str(),
            date.as_str(),
            r.recalling_firm.as_str(),
            r.root_cause_description.as_str(),
            r.product_quantity.as_str(),
            r.device_name.as_str(),
            r.device_class.as_str(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_dataset_from<R: Read>(reader: R) -> Result<Vec<RecallRecord>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => {
            return Err(DatasetError::Header {
                expected: CSV_HEADER.join(","),
                found: String::new(),
            })
        }
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(DatasetError::Header {
            expected: CSV_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rows.enumerate() {
        let row = row?;
        let line = i + 2;
        if row.len() != CSV_HEADER.len() {
            return Err(DatasetError::Row {
                row: line,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()),
            });
        }
        let date = match &row[1] {
            "" => None,
            s => Some(
                NaiveDate::parse_from_str(s, DATE_FORMAT).map_err(|e| DatasetError::Row {
                    row: line,
                    message: format!("bad date {s:?}: {e}"),
                })?,
            ),
        };
        let class = match &row[6] {
            "" => DeviceClass::Unknown,
            s => match DeviceClass::parse(s) {
                DeviceClass::Unknown => {
                    return Err(DatasetError::Row {
                        row: line,
                        message: format!("bad device class {s:?}"),
                    })
                }
                c => c,
            },
        };
        out.push(RecallRecord {
            product_code: row[0].to_string(),
            event_date_posted: date,
            recalling_firm: row[2].to_string(),
            root_cause_description: row[3].to_string(),
            product_quantity: row[4].to_string(),
            device_name: row[5].to_string(),
            device_class: class,
        });
    }
    Ok(out)
}

pub fn write_dataset(records: &[RecallRecord], path: &Path) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_dataset_to(records, std::io::BufWriter::new(file))
}

pub fn read_dataset(path: &Path) -> Result<Vec<RecallRecord>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset_from(std::io::BufReader::new(file))
}
