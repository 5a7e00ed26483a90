//! Loading of "Therapy" (prescription) and "Medical" (event) extracts and the
//! per-patient exposure anchor.
//!
//! Both files are delimited UTF-8 text with a header row. Columns are located
//! by name, so their order is free. Rows that fail validation are skipped and
//! counted instead of aborting the load.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use chrono::NaiveDate;
use log::info;

use crate::error::{Error, Result};
use crate::readcode::{parse_readcode, Readcode};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

pub fn earliest_plausible_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1900, 1, 1).expect("valid date")
}

pub fn latest_plausible_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2100, 1, 1).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrescriptionRecord {
    pub patient_id: String,
    pub drug_code: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub patient_id: String,
    pub event_code: Readcode,
    pub date: NaiveDate,
}

/// Row accounting for one load. `kept + skipped + filtered == total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadSummary {
    pub total: usize,
    pub kept: usize,
    /// Malformed rows.
    pub skipped: usize,
    /// Well-formed rows dropped by the drug prefix filter.
    pub filtered: usize,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub delimiter: u8,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { delimiter: b',' }
    }
}

/// Parses an ISO date and checks it against the plausible range.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let d = NaiveDate::parse_from_str(raw.trim(), DATE_FORMAT).ok()?;
    (earliest_plausible_date()..=latest_plausible_date())
        .contains(&d)
        .then_some(d)
}

struct Table {
    reader: csv::Reader<File>,
    columns: [usize; 3],
}

fn open_table(path: &Path, names: [&'static str; 3], opts: &IngestOptions) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .flexible(true)
        .has_headers(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    let mut columns = [0usize; 3];
    for (slot, name) in columns.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(Error::MissingColumn {
                path: path.to_path_buf(),
                column: name,
            })?;
    }
    Ok(Table { reader, columns })
}

/// Visits every data row as its three named fields, or `None` when the row
/// is unreadable or short.
fn for_each_row(table: &mut Table, path: &Path, mut f: impl FnMut(Option<[&str; 3]>)) -> Result<()> {
    let mut record = csv::StringRecord::new();
    let cols = table.columns;
    loop {
        match table.reader.read_record(&mut record) {
            Ok(false) => return Ok(()),
            Ok(true) => {
                let fields = [record.get(cols[0]), record.get(cols[1]), record.get(cols[2])];
                match fields {
                    [Some(a), Some(b), Some(c)] => f(Some([a, b, c])),
                    _ => f(None),
                }
            }
            Err(e) if e.is_io_error() => {
                return Err(Error::Csv {
                    path: path.to_path_buf(),
                    source: e,
                })
            }
            Err(_) => f(None),
        }
    }
}

pub fn load_therapy(path: impl AsRef<Path>, drug_prefix: &str) -> Result<Vec<PrescriptionRecord>> {
    load_therapy_with(path, drug_prefix, &IngestOptions::default()).map(|(r, _)| r)
}

/// Loads prescriptions whose drug code starts with `drug_prefix`.
pub fn load_therapy_with(
    path: impl AsRef<Path>,
    drug_prefix: &str,
    opts: &IngestOptions,
) -> Result<(Vec<PrescriptionRecord>, LoadSummary)> {
    let path = path.as_ref();
    let mut table = open_table(path, ["patient_id", "drug_code", "date"], opts)?;
    let mut out = Vec::new();
    let mut summary = LoadSummary::default();
    for_each_row(&mut table, path, |row| {
        summary.total += 1;
        let parsed = row.and_then(|[pid, drug, date]| {
            let pid = pid.trim();
            let drug = drug.trim();
            if pid.is_empty() || drug.is_empty() {
                return None;
            }
            Some(PrescriptionRecord {
                patient_id: pid.to_string(),
                drug_code: drug.to_string(),
                date: parse_date(date)?,
            })
        });
        match parsed {
            None => summary.skipped += 1,
            Some(r) if !r.drug_code.starts_with(drug_prefix) => summary.filtered += 1,
            Some(r) => {
                summary.kept += 1;
                out.push(r);
            }
        }
    })?;
    info!(
        "{}: kept {} skipped {} filtered {}",
        path.display(),
        summary.kept,
        summary.skipped,
        summary.filtered
    );
    Ok((out, summary))
}

pub fn load_medical(path: impl AsRef<Path>) -> Result<Vec<EventRecord>> {
    load_medical_with(path, &IngestOptions::default()).map(|(r, _)| r)
}

/// Loads medical events, canonicalizing every code.
pub fn load_medical_with(
    path: impl AsRef<Path>,
    opts: &IngestOptions,
) -> Result<(Vec<EventRecord>, LoadSummary)> {
    let path = path.as_ref();
    let mut table = open_table(path, ["patient_id", "event_code", "date"], opts)?;
    let mut out = Vec::new();
    let mut summary = LoadSummary::default();
    for_each_row(&mut table, path, |row| {
        summary.total += 1;
        let parsed = row.and_then(|[pid, code, date]| {
            let pid = pid.trim();
            if pid.is_empty() {
                return None;
            }
            Some(EventRecord {
                patient_id: pid.to_string(),
                event_code: parse_readcode(code).ok()?,
                date: parse_date(date)?,
            })
        });
        match parsed {
            Some(r) => {
                summary.kept += 1;
                out.push(r);
            }
            None => summary.skipped += 1,
        }
    })?;
    info!(
        "{}: kept {} skipped {}",
        path.display(),
        summary.kept,
        summary.skipped
    );
    Ok((out, summary))
}

/// Patient → first prescription date. Iteration is in ascending patient id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExposureIndex {
    anchors: BTreeMap<String, NaiveDate>,
}

impl ExposureIndex {
    pub fn get(&self, patient_id: &str) -> Option<NaiveDate> {
        self.anchors.get(patient_id).copied()
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, NaiveDate)> {
        self.anchors.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn patients(&self) -> impl Iterator<Item = &str> {
        self.anchors.keys().map(String::as_str)
    }
}

impl FromIterator<(String, NaiveDate)> for ExposureIndex {
    fn from_iter<I: IntoIterator<Item = (String, NaiveDate)>>(iter: I) -> Self {
        let mut anchors = BTreeMap::new();
        for (pid, date) in iter {
            anchors
                .entry(pid)
                .and_modify(|d: &mut NaiveDate| *d = (*d).min(date))
                .or_insert(date);
        }
        ExposureIndex { anchors }
    }
}

/// Anchors each exposed patient at their earliest prescription.
pub fn build_exposure_index(prescriptions: &[PrescriptionRecord]) -> ExposureIndex {
    prescriptions
        .iter()
        .map(|p| (p.patient_id.clone(), p.date))
        .collect()
}
