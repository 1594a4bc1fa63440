//! File formats, batch pipeline and evaluation toolkit around `privtier-core`.

pub mod annotations;
pub mod error;
pub mod evalkit;
pub mod keys;
pub mod manifest;
pub mod pipeline;
pub mod png_io;
pub mod splits;

pub use annotations::{parse_annotation_entries, parse_annotations, serialize_annotations, ClipEntry};
pub use error::{Error, Result};
pub use evalkit::{emit_report, evaluate, load_predictions, ConfigLabel, EvalContext, MetricsReport, PredictionSet};
pub use manifest::{build_manifest, verify_manifest, Manifest, VerificationReport};
pub use pipeline::{run_pipeline, verify_run, PipelineConfig, PipelineReport, RunVerification};
