//! Binary before/after feature matrices and their grouped count matrices.
//!
//! Row `p` of the *before* matrix has a 1 in column `e` iff patient `p` had an
//! event keyed `e` in the `window_days` days before their anchor date; the
//! *after* matrix covers the `window_days` days after it. Events on the anchor
//! day itself belong to neither window. Rows are stored sparsely as sorted
//! column lists but read as a dense 0/1 matrix.

use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ingest::{EventRecord, ExposureIndex};
use crate::readcode::{rollup, Readcode};

/// Which code depth the event columns use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CodeMode {
    /// Full seven-character codes; synonym terms are distinct columns.
    #[default]
    Level15,
    /// Codes rolled up to level 3 with term `00`.
    Level13,
}

impl CodeMode {
    pub fn key(self, code: Readcode) -> Readcode {
        match self {
            CodeMode::Level15 => code,
            CodeMode::Level13 => rollup(code, 3).expect("3 is a valid level"),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CodeMode::Level15 => "level15",
            CodeMode::Level13 => "level13",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "level15" => Some(CodeMode::Level15),
            "level13" => Some(CodeMode::Level13),
            _ => None,
        }
    }
}

/// The sorted, deduplicated set of event keys that index matrix columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventUniverse {
    mode: CodeMode,
    keys: Vec<Readcode>,
    index: HashMap<Readcode, usize>,
}

impl EventUniverse {
    pub fn from_keys(mode: CodeMode, keys: impl IntoIterator<Item = Readcode>) -> Self {
        let mut keys: Vec<Readcode> = keys.into_iter().map(|k| mode.key(k)).collect();
        keys.sort_unstable();
        keys.dedup();
        let index = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        EventUniverse { mode, keys, index }
    }

    pub fn mode(&self) -> CodeMode {
        self.mode
    }

    pub fn keys(&self) -> &[Readcode] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Column of an already-keyed code.
    pub fn column(&self, key: &Readcode) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Column of a raw event code after applying this universe's mode.
    pub fn column_for_code(&self, code: Readcode) -> Option<usize> {
        self.column(&self.mode.key(code))
    }
}

pub fn build_universe(events: &[EventRecord], mode: CodeMode) -> EventUniverse {
    EventUniverse::from_keys(mode, events.iter().map(|e| e.event_code))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub window_days: u32,
    pub group_size: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_days: 60,
            group_size: 100,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_days == 0 {
            return Err(Error::InvalidConfig("window_days must be at least 1".into()));
        }
        if self.group_size == 0 {
            return Err(Error::InvalidConfig("group_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Before (A, grouped into X) or after (B, grouped into Y) the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixRole {
    Before,
    After,
}

/// Dense read access shared by the binary and grouped matrices.
pub trait MatrixView {
    fn n_rows(&self) -> usize;
    fn universe(&self) -> &EventUniverse;
    fn value(&self, row: usize, col: usize) -> u32;

    fn n_cols(&self) -> usize {
        self.universe().len()
    }
}

/// Binary patients × events matrix.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    role: MatrixRole,
    patients: Vec<String>,
    universe: Arc<EventUniverse>,
    rows: Vec<Vec<u32>>,
}

impl FeatureMatrix {
    pub fn role(&self) -> MatrixRole {
        self.role
    }

    pub fn patients(&self) -> &[String] {
        &self.patients
    }

    pub fn shared_universe(&self) -> &Arc<EventUniverse> {
        &self.universe
    }

    /// Columns set in `row`, ascending.
    pub fn row_columns(&self, row: usize) -> &[u32] {
        &self.rows[row]
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row].binary_search(&(col as u32)).is_ok()
    }

    /// Number of set cells.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

impl MatrixView for FeatureMatrix {
    fn n_rows(&self) -> usize {
        self.patients.len()
    }

    fn universe(&self) -> &EventUniverse {
        &self.universe
    }

    fn value(&self, row: usize, col: usize) -> u32 {
        self.get(row, col) as u32
    }
}

#[derive(Debug, Clone)]
pub struct FeatureMatrices {
    pub before: FeatureMatrix,
    pub after: FeatureMatrix,
    /// In-window events of exposed patients whose key is not in the universe.
    pub universe_misses: usize,
}

/// Builds the before (A) and after (B) matrices for the exposed patients.
///
/// For anchor `d`: A covers `[d - w, d)`, B covers `(d, d + w]`. Events of
/// patients not in `index` are ignored. Rows follow ascending patient id.
pub fn build_feature_matrices(
    index: &ExposureIndex,
    events: &[EventRecord],
    universe: &Arc<EventUniverse>,
    cfg: &WindowConfig,
) -> Result<FeatureMatrices> {
    cfg.validate()?;
    let window = i64::from(cfg.window_days);
    let patients: Vec<String> = index.patients().map(str::to_string).collect();
    let row_of: HashMap<&str, usize> = patients
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();

    let mut before = vec![Vec::new(); patients.len()];
    let mut after = vec![Vec::new(); patients.len()];
    let mut misses = 0usize;
    for ev in events {
        let Some(&row) = row_of.get(ev.patient_id.as_str()) else {
            continue;
        };
        let anchor = index.get(&ev.patient_id).expect("indexed patient");
        let offset = (ev.date - anchor).num_days();
        let target = if (-window..0).contains(&offset) {
            &mut before[row]
        } else if (1..=window).contains(&offset) {
            &mut after[row]
        } else {
            continue;
        };
        match universe.column_for_code(ev.event_code) {
            Some(col) => target.push(col as u32),
            None => misses += 1,
        }
    }
    for row in before.iter_mut().chain(after.iter_mut()) {
        row.sort_unstable();
        row.dedup();
    }

    let make = |role, rows| FeatureMatrix {
        role,
        patients: patients.clone(),
        universe: Arc::clone(universe),
        rows,
    };
    Ok(FeatureMatrices {
        before: make(MatrixRole::Before, before),
        after: make(MatrixRole::After, after),
        universe_misses: misses,
    })
}

/// Per-group event counts (X from A, Y from B).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedMatrix {
    role: MatrixRole,
    group_sizes: Vec<usize>,
    universe: Arc<EventUniverse>,
    // column-major: counts[col * groups + group]
    counts: Vec<u32>,
}

impl GroupedMatrix {
    pub fn role(&self) -> MatrixRole {
        self.role
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn shared_universe(&self) -> &Arc<EventUniverse> {
        &self.universe
    }

    pub fn column(&self, col: usize) -> &[u32] {
        let g = self.n_groups();
        &self.counts[col * g..(col + 1) * g]
    }

    pub fn cell(&self, group: usize, col: usize) -> u32 {
        self.column(col)[group]
    }
}

impl MatrixView for GroupedMatrix {
    fn n_rows(&self) -> usize {
        self.n_groups()
    }

    fn universe(&self) -> &EventUniverse {
        &self.universe
    }

    fn value(&self, row: usize, col: usize) -> u32 {
        self.cell(row, col)
    }
}

/// Sizes of consecutive row groups: `rows / group_size` groups with the
/// remainder merged into the last one, or a single group when there are
/// fewer rows than `group_size`.
pub fn group_layout(rows: usize, group_size: usize) -> Vec<usize> {
    if rows == 0 || group_size == 0 {
        return Vec::new();
    }
    let groups = (rows / group_size).max(1);
    let mut sizes = vec![group_size.min(rows); groups];
    *sizes.last_mut().expect("at least one group") = rows - group_size.min(rows) * (groups - 1);
    sizes
}

pub fn group_matrix(m: &FeatureMatrix, group_size: usize) -> Result<GroupedMatrix> {
    if group_size == 0 {
        return Err(Error::InvalidConfig("group_size must be at least 1".into()));
    }
    let rows = m.n_rows();
    if rows == 0 {
        return Err(Error::EmptyMatrix);
    }
    let group_sizes = group_layout(rows, group_size);
    let groups = group_sizes.len();
    let mut counts = vec![0u32; groups * m.n_cols()];
    for (row, cols) in m.rows.iter().enumerate() {
        let g = (row / group_size).min(groups - 1);
        for &c in cols {
            counts[c as usize * groups + g] += 1;
        }
    }
    Ok(GroupedMatrix {
        role: m.role,
        group_sizes,
        universe: Arc::clone(&m.universe),
        counts,
    })
}

/// Patients per column with the cell set (N_B for A, N_A for B).
pub fn column_counts(m: &FeatureMatrix) -> Vec<(Readcode, u64)> {
    let mut counts = vec![0u64; m.n_cols()];
    for cols in &m.rows {
        for &c in cols {
            counts[c as usize] += 1;
        }
    }
    m.universe.keys().iter().copied().zip(counts).collect()
}

/// Writes a header of event keys followed by one tab-separated row per
/// matrix row.
pub fn write_dump<W: Write>(m: &impl MatrixView, mut w: W) -> io::Result<()> {
    let header: Vec<String> = m.universe().keys().iter().map(ToString::to_string).collect();
    writeln!(w, "{}", header.join("\t"))?;
    let mut line = String::new();
    for r in 0..m.n_rows() {
        line.clear();
        for c in 0..m.n_cols() {
            if c > 0 {
                line.push('\t');
            }
            line.push_str(&m.value(r, c).to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
