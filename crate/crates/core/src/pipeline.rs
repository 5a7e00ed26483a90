//! End-to-end detection: ingest → exposure index → universe → matrices →
//! grouping → per-event tests → ranked report.

use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::featmat::{
    build_feature_matrices, build_universe, column_counts, group_matrix, CodeMode, FeatureMatrices,
    GroupedMatrix, WindowConfig,
};
use crate::ingest::{
    build_exposure_index, load_medical_with, load_therapy_with, EventRecord, IngestOptions, LoadSummary,
    PrescriptionRecord,
};
use crate::num::Real;
use crate::readcode::{load_dictionary, TermDictionary};
use crate::signal::{Provenance, Ranking, SignalReport};
use crate::stats::{per_event_tests, EventStats, TestVariant};

/// Analysis settings that do not depend on where the data came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub window: WindowConfig,
    pub mode: CodeMode,
    pub variant: TestVariant,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window: WindowConfig::default(),
            mode: CodeMode::Level15,
            variant: TestVariant::PooledUnpaired,
        }
    }
}

/// Intermediate products of one analysis.
#[derive(Debug, Clone)]
pub struct Analysis<F> {
    pub matrices: FeatureMatrices,
    pub grouped_before: GroupedMatrix,
    pub grouped_after: GroupedMatrix,
    pub stats: Vec<EventStats<F>>,
}

impl<F> Analysis<F> {
    pub fn cohort_size(&self) -> usize {
        self.matrices.before.patients().len()
    }

    pub fn n_groups(&self) -> usize {
        self.grouped_before.n_groups()
    }

    pub fn n_events(&self) -> usize {
        self.grouped_before.shared_universe().len()
    }
}

/// Runs the matrix and test stages on in-memory records.
pub fn analyse<F: Real>(
    prescriptions: &[PrescriptionRecord],
    events: &[EventRecord],
    cfg: &AnalysisConfig,
    dictionary: &TermDictionary,
) -> Result<Analysis<F>> {
    cfg.window.validate()?;
    let index = build_exposure_index(prescriptions);
    if index.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let universe = Arc::new(build_universe(events, cfg.mode));
    let matrices = build_feature_matrices(&index, events, &universe, &cfg.window)?;
    let grouped_before = group_matrix(&matrices.before, cfg.window.group_size)?;
    let grouped_after = group_matrix(&matrices.after, cfg.window.group_size)?;
    let counts = |m| column_counts(m).into_iter().map(|(_, c)| c).collect::<Vec<u64>>();
    let stats = per_event_tests(
        &grouped_before,
        &grouped_after,
        &counts(&matrices.before),
        &counts(&matrices.after),
        index.len() as u64,
        cfg.variant,
        dictionary,
    )?;
    Ok(Analysis {
        matrices,
        grouped_before,
        grouped_after,
        stats,
    })
}

/// Full configuration of a `detect` run.
#[derive(Debug, Clone)]
pub struct DetectConfig {
    pub therapy: PathBuf,
    pub medical: PathBuf,
    pub dictionary: Option<PathBuf>,
    pub drug_prefix: String,
    pub analysis: AnalysisConfig,
    pub ranking: Ranking,
    pub alpha: f64,
    pub top_k: usize,
    pub require_increase: bool,
    pub prefix_filter: Option<String>,
    pub delimiter: u8,
    pub seed: Option<u64>,
}

impl DetectConfig {
    pub fn new(
        therapy: impl Into<PathBuf>,
        medical: impl Into<PathBuf>,
        drug_prefix: impl Into<String>,
    ) -> Self {
        DetectConfig {
            therapy: therapy.into(),
            medical: medical.into(),
            dictionary: None,
            drug_prefix: drug_prefix.into(),
            analysis: AnalysisConfig::default(),
            ranking: Ranking::ByP,
            alpha: 0.05,
            top_k: 20,
            require_increase: true,
            prefix_filter: None,
            delimiter: b',',
            seed: None,
        }
    }

    /// The report header for this configuration, before any data is seen.
    pub fn provenance(&self) -> Provenance {
        Provenance {
            mode: self.analysis.mode,
            ranking: self.ranking,
            alpha: self.alpha,
            top_k: self.top_k,
            require_increase: self.require_increase,
            prefix_filter: self.prefix_filter.clone(),
            variant: self.analysis.variant,
            window_days: self.analysis.window.window_days,
            group_size: self.analysis.window.group_size,
            drug_prefix: Some(self.drug_prefix.clone()),
            cohort_size: None,
            n_groups: None,
            n_events: None,
            seed: self.seed,
        }
    }

    /// Checks every option that can be checked without touching the files.
    pub fn validate(&self) -> Result<()> {
        self.analysis.window.validate()?;
        self.provenance().validate()?;
        if self.drug_prefix.is_empty() {
            return Err(Error::InvalidConfig("drug prefix must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectSummary {
    pub therapy: LoadSummary,
    pub medical: LoadSummary,
    pub patients: usize,
    pub events: usize,
    pub groups: usize,
    pub universe_misses: usize,
    pub signals: usize,
}

#[derive(Debug, Clone)]
pub struct DetectOutcome {
    pub report: SignalReport<f64>,
    pub analysis: Analysis<f64>,
    pub summary: DetectSummary,
}

pub fn detect(cfg: &DetectConfig) -> Result<DetectOutcome> {
    cfg.validate()?;
    let opts = IngestOptions {
        delimiter: cfg.delimiter,
    };
    let (prescriptions, therapy) = load_therapy_with(&cfg.therapy, &cfg.drug_prefix, &opts)?;
    let (events, medical) = load_medical_with(&cfg.medical, &opts)?;
    let dictionary = match &cfg.dictionary {
        Some(p) => load_dictionary(p)?,
        None => TermDictionary::new(),
    };
    let analysis = analyse::<f64>(&prescriptions, &events, &cfg.analysis, &dictionary)?;

    let mut provenance = cfg.provenance();
    provenance.cohort_size = Some(analysis.cohort_size() as u64);
    provenance.n_groups = Some(analysis.n_groups());
    provenance.n_events = Some(analysis.n_events());
    let report = SignalReport::build(&analysis.stats, provenance)?;

    let summary = DetectSummary {
        therapy,
        medical,
        patients: analysis.cohort_size(),
        events: analysis.n_events(),
        groups: analysis.n_groups(),
        universe_misses: analysis.matrices.universe_misses,
        signals: report.len(),
    };
    Ok(DetectOutcome {
        report,
        analysis,
        summary,
    })
}
