//! Synthetic therapy/medical cohorts with planted reactions, and scoring of a
//! report against the plant.
//!
//! Each patient receives the study drug at a random anchor date. Every event
//! occurs at most once per window as a Bernoulli draw: null events with their
//! baseline rate in both windows, planted events with `baseline × multiplier`
//! after the anchor. Output uses the same file schemas that [`crate::ingest`]
//! reads. A given config and seed always produce the same bytes.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featmat::WindowConfig;
use crate::ingest::{EventRecord, PrescriptionRecord, DATE_FORMAT};
use crate::readcode::{parse_readcode, Readcode};
use crate::signal::{write_atomic, SignalReport};

/// Anchors are spread uniformly over this many days.
pub const ANCHOR_SPAN_DAYS: u64 = 730;
const B36: &[u8; 36] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
const NULL_CHAPTER: u8 = b'Z';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedEvent {
    pub event_key: Readcode,
    /// Probability of the event in the before window.
    pub baseline_rate: f64,
    /// After-window rate is `baseline_rate * effect_multiplier`.
    pub effect_multiplier: f64,
}

impl PlantedEvent {
    pub fn new(key: &str, baseline_rate: f64, effect_multiplier: f64) -> Result<Self> {
        Ok(PlantedEvent {
            event_key: parse_readcode(key)?,
            baseline_rate,
            effect_multiplier,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub n_null_events: usize,
    /// Null baseline rates are log-uniform in `[null_rate_min, null_rate_max]`.
    pub null_rate_min: f64,
    pub null_rate_max: f64,
    pub planted: Vec<PlantedEvent>,
    pub window_days: u32,
    pub group_size: usize,
    pub seed: u64,
    pub drug_code: String,
    pub calendar_start: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let planted = [
            ("F591.00", 0.008, 4.0),
            ("J574700", 0.010, 5.0),
            ("D010.00", 0.012, 4.0),
            ("B49..00", 0.015, 6.0),
            ("1CA2.11", 0.020, 4.0),
        ]
        .into_iter()
        .map(|(k, r, m)| PlantedEvent::new(k, r, m).expect("valid code"))
        .collect();
        SynthConfig {
            n_patients: 10_000,
            n_null_events: 200,
            null_rate_min: 0.002,
            null_rate_max: 0.05,
            planted,
            window_days: 60,
            group_size: 100,
            seed: 0,
            drug_code: "PRAVA01".into(),
            calendar_start: NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid date"),
        }
    }
}

fn rate_ok(r: f64) -> bool {
    r > 0.0 && r < 1.0
}

impl SynthConfig {
    /// The default cohort with every effect multiplier set to 1.
    pub fn null_cohort(seed: u64) -> Self {
        let mut cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        cfg.planted.iter_mut().for_each(|p| p.effect_multiplier = 1.0);
        cfg
    }

    pub fn window(&self) -> WindowConfig {
        WindowConfig {
            window_days: self.window_days,
            group_size: self.group_size,
        }
    }

    pub fn max_null_events() -> usize {
        B36.len() * B36.len() * 4
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_patients == 0 {
            return bad("n_patients must be at least 1".into());
        }
        if self.n_null_events > Self::max_null_events() {
            return bad(format!("n_null_events exceeds {}", Self::max_null_events()));
        }
        if !(rate_ok(self.null_rate_min)
            && rate_ok(self.null_rate_max)
            && self.null_rate_min <= self.null_rate_max)
        {
            return bad("null rates must satisfy 0 < min <= max < 1".into());
        }
        self.window().validate()?;
        if self.drug_code.trim().is_empty() || self.drug_code.contains([',', '\n', '"']) {
            return bad("drug_code must be non-empty and free of ',', '\"' and newlines".into());
        }
        let nulls: HashSet<Readcode> = (0..self.n_null_events).map(null_event_key).collect();
        let mut seen = HashSet::new();
        for p in &self.planted {
            if !rate_ok(p.baseline_rate) {
                return bad(format!("{}: baseline rate must be in (0, 1)", p.event_key));
            }
            if p.effect_multiplier.is_nan()
                || p.effect_multiplier < 1.0
                || p.baseline_rate * p.effect_multiplier > 1.0
            {
                return bad(format!(
                    "{}: need multiplier >= 1 and rate * multiplier <= 1",
                    p.event_key
                ));
            }
            if nulls.contains(&p.event_key) || !seen.insert(p.event_key) {
                return bad(format!("{}: duplicate event key", p.event_key));
            }
        }
        if self.n_patients < self.group_size {
            warn!(
                "{} patients is fewer than one group of {}",
                self.n_patients, self.group_size
            );
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// Key of the `i`-th null event. Groups of four share a level-3 parent
/// `Z??`: the parent itself, a level-4 child, a level-5 grandchild and a
/// synonym term of the level-4 child.
pub fn null_event_key(i: usize) -> Readcode {
    let parent = i / 4;
    let stem = [NULL_CHAPTER, B36[(parent / 36) % 36], B36[parent % 36]];
    let stem = std::str::from_utf8(&stem).expect("ascii");
    let raw = match i % 4 {
        0 => format!("{stem}..00"),
        1 => format!("{stem}1.00"),
        2 => format!("{stem}1100"),
        _ => format!("{stem}1.11"),
    };
    parse_readcode(&raw).expect("generated code is canonical")
}

#[derive(Debug, Clone)]
struct EventSpec {
    key: Readcode,
    description: String,
    before_rate: f64,
    after_rate: f64,
}

fn event_specs(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<EventSpec> {
    let (lo, hi) = (cfg.null_rate_min.ln(), cfg.null_rate_max.ln());
    let mut specs: Vec<EventSpec> = (0..cfg.n_null_events)
        .map(|i| {
            let rate = if hi > lo {
                rng.gen_range(lo..=hi).exp()
            } else {
                cfg.null_rate_min
            };
            EventSpec {
                key: null_event_key(i),
                description: format!("Synthetic null event {i}"),
                before_rate: rate,
                after_rate: rate,
            }
        })
        .collect();
    specs.extend(cfg.planted.iter().map(|p| EventSpec {
        key: p.event_key,
        description: format!("Synthetic planted event x{}", p.effect_multiplier),
        before_rate: p.baseline_rate,
        after_rate: p.baseline_rate * p.effect_multiplier,
    }));
    specs
}

/// An in-memory synthetic cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub prescriptions: Vec<PrescriptionRecord>,
    pub events: Vec<EventRecord>,
    pub dictionary: Vec<(Readcode, String)>,
}

pub fn generate_cohort(cfg: &SynthConfig) -> Result<Cohort> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let specs = event_specs(cfg, &mut rng);
    let window = u64::from(cfg.window_days);
    let width = cfg.n_patients.to_string().len().max(6);

    let mut prescriptions = Vec::with_capacity(cfg.n_patients * 2);
    let mut events = Vec::new();
    for i in 0..cfg.n_patients {
        let patient_id = format!("P{:0width$}", i + 1);
        let anchor = cfg.calendar_start + Days::new(window + rng.gen_range(0..ANCHOR_SPAN_DAYS));
        prescriptions.push(PrescriptionRecord {
            patient_id: patient_id.clone(),
            drug_code: cfg.drug_code.clone(),
            date: anchor,
        });
        // a repeat prescription never moves the anchor
        if rng.gen_bool(0.5) {
            prescriptions.push(PrescriptionRecord {
                patient_id: patient_id.clone(),
                drug_code: cfg.drug_code.clone(),
                date: anchor + Days::new(28),
            });
        }
        for spec in &specs {
            if rng.gen::<f64>() < spec.before_rate {
                events.push(EventRecord {
                    patient_id: patient_id.clone(),
                    event_code: spec.key,
                    date: anchor - Days::new(rng.gen_range(1..=window)),
                });
            }
            if rng.gen::<f64>() < spec.after_rate {
                events.push(EventRecord {
                    patient_id: patient_id.clone(),
                    event_code: spec.key,
                    date: anchor + Days::new(rng.gen_range(1..=window)),
                });
            }
        }
    }
    let dictionary = specs.into_iter().map(|s| (s.key, s.description)).collect();
    Ok(Cohort {
        prescriptions,
        events,
        dictionary,
    })
}

/// Locations of a cohort written by [`Cohort::write_to`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortPaths {
    pub therapy: PathBuf,
    pub medical: PathBuf,
    pub dictionary: PathBuf,
    pub config: PathBuf,
}

impl CohortPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        CohortPaths {
            therapy: dir.join("therapy.csv"),
            medical: dir.join("medical.csv"),
            dictionary: dir.join("dictionary.tsv"),
            config: dir.join("synth.toml"),
        }
    }
}

impl Cohort {
    pub fn therapy_csv(&self) -> String {
        let mut out = String::from("patient_id,drug_code,date\n");
        for r in &self.prescriptions {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.patient_id,
                r.drug_code,
                r.date.format(DATE_FORMAT)
            );
        }
        out
    }

    pub fn medical_csv(&self) -> String {
        let mut out = String::from("patient_id,event_code,date\n");
        for r in &self.events {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.patient_id,
                r.event_code,
                r.date.format(DATE_FORMAT)
            );
        }
        out
    }

    pub fn dictionary_tsv(&self) -> String {
        let mut out = String::new();
        for (k, d) in &self.dictionary {
            let _ = writeln!(out, "{k}\t{d}");
        }
        out
    }

    /// Writes therapy, medical, dictionary and the generating config into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>, cfg: &SynthConfig) -> Result<CohortPaths> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = CohortPaths::in_dir(dir);
        write_atomic(&paths.therapy, self.therapy_csv().as_bytes())?;
        write_atomic(&paths.medical, self.medical_csv().as_bytes())?;
        write_atomic(&paths.dictionary, self.dictionary_tsv().as_bytes())?;
        write_atomic(&paths.config, cfg.to_toml().as_bytes())?;
        Ok(paths)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub k: usize,
    pub recall_at_k: f64,
    /// Rank of each planted key in the report, `None` if absent.
    pub planted_ranks: BTreeMap<Readcode, Option<usize>>,
}

/// Recall@k of the planted events in `report`. Planted keys are rolled up to
/// the report's code mode before matching. With nothing planted the recall
/// is 0.
pub fn evaluate<F>(report: &SignalReport<F>, cfg: &SynthConfig, k: usize) -> EvalResult
where
    F: crate::num::Real,
{
    let mode = report.mode();
    let planted_ranks: BTreeMap<Readcode, Option<usize>> = cfg
        .planted
        .iter()
        .map(|p| (p.event_key, report.rank_of(&mode.key(p.event_key))))
        .collect();
    let found = planted_ranks
        .values()
        .filter(|r| r.is_some_and(|r| r <= k))
        .count();
    let recall_at_k = if planted_ranks.is_empty() {
        0.0
    } else {
        found as f64 / planted_ranks.len() as f64
    };
    EvalResult {
        k,
        recall_at_k,
        planted_ranks,
    }
}
