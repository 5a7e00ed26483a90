//! Prescription-event monitoring (PEM) signal detection.
//!
//! Patients exposed to a drug are anchored at their first prescription. Medical
//! events in the windows before and after the anchor become two binary
//! patients × events matrices, which are summed over fixed-size patient groups
//! and screened column by column with Student's t-test. Events with a
//! significant increase are ranked into a signal report.
//!
//! The statistics are generic over the scalar type (see [`Real`]); the
//! aliases at the crate root fix it to `f64` or `f32`.

pub mod error;
pub mod featmat;
pub mod ingest;
pub mod num;
pub mod pipeline;
pub mod readcode;
pub mod signal;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
pub use featmat::{
    build_feature_matrices, build_universe, column_counts, group_matrix, CodeMode, EventUniverse,
    FeatureMatrix, GroupedMatrix, WindowConfig,
};
pub use ingest::{
    build_exposure_index, load_medical, load_therapy, EventRecord, ExposureIndex, PrescriptionRecord,
};
pub use num::Real;
pub use readcode::{load_dictionary, parse_readcode, rollup, Readcode, TermDictionary};
pub use signal::{filter_prefix, rank_by_p, rank_by_r1, Provenance, Ranking, ReportFormat};
pub use stats::{ratios, students_t, two_sided_p, TestVariant};
pub use synth::{evaluate, generate_cohort, PlantedEvent, SynthConfig};

/// Double-precision t-test result.
pub type TestResult64 = stats::TestResult<f64>;
/// Single-precision t-test result.
pub type TestResult32 = stats::TestResult<f32>;
/// Double-precision per-event statistics row.
pub type EventStats64 = stats::EventStats<f64>;
/// Single-precision per-event statistics row.
pub type EventStats32 = stats::EventStats<f32>;
/// Double-precision signal report; this is what the CLI writes and reads.
pub type SignalReport64 = signal::SignalReport<f64>;
/// Single-precision signal report.
pub type SignalReport32 = signal::SignalReport<f32>;
