//! Ranking, filtering and rendering of signal reports.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::featmat::CodeMode;
use crate::num::Real;
use crate::readcode::parse_readcode;
use crate::stats::{EventStats, TestResult, TestVariant};

pub const TSV_COLUMNS: [&str; 11] = [
    "rank",
    "readcode",
    "description",
    "N_B",
    "N_A",
    "R1",
    "R2",
    "t",
    "df",
    "p",
    "degenerate",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ranking {
    /// p ascending, then event key.
    #[default]
    ByP,
    /// R1 descending, then p ascending, then event key.
    ByR1,
}

impl Ranking {
    pub fn as_str(self) -> &'static str {
        match self {
            Ranking::ByP => "p",
            Ranking::ByR1 => "r1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "p" => Some(Ranking::ByP),
            "r1" => Some(Ranking::ByR1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Tsv,
    Pretty,
}

/// Effective configuration of a run, echoed as the report header.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub mode: CodeMode,
    pub ranking: Ranking,
    pub alpha: f64,
    pub top_k: usize,
    /// Keep only events with `N_A > N_B`.
    pub require_increase: bool,
    pub prefix_filter: Option<String>,
    pub variant: TestVariant,
    pub window_days: u32,
    pub group_size: usize,
    pub drug_prefix: Option<String>,
    pub cohort_size: Option<u64>,
    pub n_groups: Option<usize>,
    pub n_events: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            mode: CodeMode::Level15,
            ranking: Ranking::ByP,
            alpha: 0.05,
            top_k: 20,
            require_increase: true,
            prefix_filter: None,
            variant: TestVariant::PooledUnpaired,
            window_days: 60,
            group_size: 100,
            drug_prefix: None,
            cohort_size: None,
            n_groups: None,
            n_events: None,
            seed: None,
        }
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), ToString::to_string)
}

impl Provenance {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        if self.prefix_filter.as_deref() == Some("") {
            return Err(Error::InvalidConfig("prefix filter must not be empty".into()));
        }
        Ok(())
    }

    /// `key=value` pairs in header order. Absent values are written as `-`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("drug_prefix", opt(&self.drug_prefix)),
            ("mode", self.mode.as_str().to_string()),
            ("window_days", self.window_days.to_string()),
            ("group_size", self.group_size.to_string()),
            ("variant", self.variant.as_str().to_string()),
            ("ranking", self.ranking.as_str().to_string()),
            ("alpha", self.alpha.to_string()),
            ("top_k", self.top_k.to_string()),
            ("require_increase", self.require_increase.to_string()),
            ("prefix_filter", opt(&self.prefix_filter)),
            ("cohort_size", opt(&self.cohort_size)),
            ("n_groups", opt(&self.n_groups)),
            ("n_events", opt(&self.n_events)),
            ("seed", opt(&self.seed)),
        ]
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::MalformedReport(format!("bad value {v:?} for {key}")))
        }
        fn maybe<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
            if v == "-" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        let bad = || Error::MalformedReport(format!("bad value {value:?} for {key}"));
        match key {
            "drug_prefix" => self.drug_prefix = maybe(key, value)?,
            "mode" => self.mode = CodeMode::parse(value).ok_or_else(bad)?,
            "window_days" => self.window_days = num(key, value)?,
            "group_size" => self.group_size = num(key, value)?,
            "variant" => self.variant = TestVariant::parse(value).ok_or_else(bad)?,
            "ranking" => self.ranking = Ranking::parse(value).ok_or_else(bad)?,
            "alpha" => self.alpha = num(key, value)?,
            "top_k" => self.top_k = num(key, value)?,
            "require_increase" => self.require_increase = num(key, value)?,
            "prefix_filter" => self.prefix_filter = maybe(key, value)?,
            "cohort_size" => self.cohort_size = maybe(key, value)?,
            "n_groups" => self.n_groups = maybe(key, value)?,
            "n_events" => self.n_events = maybe(key, value)?,
            "seed" => self.seed = maybe(key, value)?,
            // unknown keys are tolerated so newer headers stay readable
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow<F> {
    pub rank: usize,
    pub stats: EventStats<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalReport<F> {
    pub provenance: Provenance,
    pub rows: Vec<ReportRow<F>>,
}

fn cmp_f<F: Real>(a: F, b: F) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

fn order_by<F: Real>(ranking: Ranking, a: &EventStats<F>, b: &EventStats<F>) -> Ordering {
    let by_p = || cmp_f(a.test.p, b.test.p);
    let by_key = || a.event_key.cmp(&b.event_key);
    match ranking {
        Ranking::ByP => by_p().then_with(by_key),
        Ranking::ByR1 => cmp_f(b.r1, a.r1).then_with(by_p).then_with(by_key),
    }
}

/// True if the row survives the significance and direction filters.
pub fn passes<F: Real>(s: &EventStats<F>, alpha: F, require_increase: bool) -> bool {
    s.test.p < alpha && (!require_increase || s.is_increase())
}

impl<F: Real> SignalReport<F> {
    /// Filters, sorts and truncates `stats` according to `provenance`.
    pub fn build(stats: &[EventStats<F>], provenance: Provenance) -> Result<Self> {
        provenance.validate()?;
        let alpha = F::lit(provenance.alpha);
        let mut kept: Vec<&EventStats<F>> = stats
            .iter()
            .filter(|s| passes(*s, alpha, provenance.require_increase))
            .filter(|s| {
                provenance
                    .prefix_filter
                    .as_deref()
                    .is_none_or(|p| s.event_key.starts_with(p))
            })
            .collect();
        kept.sort_by(|a, b| order_by(provenance.ranking, a, b));
        kept.truncate(provenance.top_k);
        let rows = kept
            .into_iter()
            .enumerate()
            .map(|(i, s)| ReportRow {
                rank: i + 1,
                stats: s.clone(),
            })
            .collect();
        Ok(SignalReport { provenance, rows })
    }

    pub fn mode(&self) -> CodeMode {
        self.provenance.mode
    }

    pub fn ranking(&self) -> Ranking {
        self.provenance.ranking
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// 1-based rank of `key`, if present.
    pub fn rank_of(&self, key: &crate::readcode::Readcode) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.stats.event_key == *key)
            .map(|r| r.rank)
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Tsv => self.render_tsv(),
            ReportFormat::Pretty => self.render_pretty(),
        }
    }

    fn header_block(&self, out: &mut String) {
        for (k, v) in self.provenance.entries() {
            let _ = writeln!(out, "# {k}={v}");
        }
    }

    fn cells(row: &ReportRow<F>) -> [String; 11] {
        let s = &row.stats;
        [
            row.rank.to_string(),
            s.event_key.to_string(),
            sanitize(&s.description),
            s.n_before.to_string(),
            s.n_after.to_string(),
            format!("{:.2}", s.r1),
            format!("{:.2}", s.r2),
            format!("{:.4}", s.test.t),
            format!("{}", s.test.df),
            format!("{:.3e}", s.test.p),
            s.test.degenerate.to_string(),
        ]
    }

    pub fn render_tsv(&self) -> String {
        let mut out = String::new();
        self.header_block(&mut out);
        out.push_str(&TSV_COLUMNS.join("\t"));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&Self::cells(row).join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn render_pretty(&self) -> String {
        let mut table: Vec<Vec<String>> = vec![TSV_COLUMNS.iter().map(|s| s.to_string()).collect()];
        table.extend(self.rows.iter().map(|r| Self::cells(r).to_vec()));
        let widths: Vec<usize> = (0..TSV_COLUMNS.len())
            .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        self.header_block(&mut out);
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| {
                    if c == 2 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c == '\t' || c == '\n' || c == '\r' {
                ' '
            } else {
                c
            }
        })
        .collect()
}

/// Keeps events with `N_A > N_B` and `p < alpha`, ordered by p.
pub fn rank_by_p<F: Real>(stats: &[EventStats<F>], alpha: f64, top_k: usize) -> Result<SignalReport<F>> {
    SignalReport::build(
        stats,
        Provenance {
            ranking: Ranking::ByP,
            alpha,
            top_k,
            ..Provenance::default()
        },
    )
}

/// Same filters as [`rank_by_p`], ordered by R1 descending.
pub fn rank_by_r1<F: Real>(stats: &[EventStats<F>], alpha: f64, top_k: usize) -> Result<SignalReport<F>> {
    SignalReport::build(
        stats,
        Provenance {
            ranking: Ranking::ByR1,
            alpha,
            top_k,
            ..Provenance::default()
        },
    )
}

/// Rows whose event code starts with `prefix`, in their original order.
pub fn filter_prefix<F: Clone>(stats: &[EventStats<F>], prefix: &str) -> Result<Vec<EventStats<F>>> {
    if prefix.is_empty() {
        return Err(Error::InvalidConfig("prefix filter must not be empty".into()));
    }
    Ok(stats
        .iter()
        .filter(|s| s.event_key.starts_with(prefix))
        .cloned()
        .collect())
}

/// Writes the report atomically: a temporary file in the target directory is
/// renamed over `path`.
pub fn write_report<F: Real>(
    report: &SignalReport<F>,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    write_atomic(path.as_ref(), report.render(format).as_bytes())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Parses a TSV report written by [`write_report`].
pub fn parse_report(text: &str) -> Result<SignalReport<f64>> {
    let mut provenance = Provenance::default();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                provenance.set(k.trim(), v.trim())?;
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if !saw_header {
            if cells != TSV_COLUMNS {
                return Err(Error::MalformedReport(format!("unexpected header {line:?}")));
            }
            saw_header = true;
            continue;
        }
        if cells.len() != TSV_COLUMNS.len() {
            return Err(Error::MalformedReport(format!("expected 11 cells: {line:?}")));
        }
        let bad = |what: &str| Error::MalformedReport(format!("bad {what} in {line:?}"));
        let int = |i: usize, what: &str| cells[i].parse::<u64>().map_err(|_| bad(what));
        let real = |i: usize, what: &str| cells[i].parse::<f64>().map_err(|_| bad(what));
        let n = provenance.cohort_size.unwrap_or(0);
        rows.push(ReportRow {
            rank: int(0, "rank")? as usize,
            stats: EventStats {
                event_key: parse_readcode(cells[1]).map_err(|_| bad("readcode"))?,
                description: cells[2].to_string(),
                n_before: int(3, "N_B")?,
                n_after: int(4, "N_A")?,
                n,
                r1: real(5, "R1")?,
                r2: real(6, "R2")?,
                test: TestResult {
                    t: real(7, "t")?,
                    df: real(8, "df")?,
                    p: real(9, "p")?,
                    degenerate: cells[10].parse().map_err(|_| bad("degenerate"))?,
                },
            },
        });
    }
    if !saw_header {
        return Err(Error::MalformedReport("missing column header".into()));
    }
    Ok(SignalReport { provenance, rows })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<SignalReport<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text)
}
