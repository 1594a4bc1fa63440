//! Evaluation toolkit: prediction CSVs in, per-tier metrics report and plot tables out.
//!
//! Prediction files are UTF-8 CSV with the header `video_id,label`, one row per
//! test clip. ROI-SSIM/PSNR come from the pipeline's `roi_metrics.json`; face
//! detection flags are an optional CSV `tier,sample_id,orig_detected,post_detected`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use privtier_core::metrics::{accuracy_drop, face_fail_rate, pu_score, top1_accuracy, QualitySummary, Ratio};
use privtier_core::{ClipRecord, Split, SplitAssignment, TierSpec};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::annotations::parse_json;
use crate::error::{Error, Result};

pub const ORIGINAL_TIER: &str = "Original";
pub const QUALITY_FILE: &str = "roi_metrics.json";
pub const ACCURACY_PLOT_FILE: &str = "accuracy_by_tier.csv";
pub const PRIVACY_UTILITY_PLOT_FILE: &str = "privacy_utility.csv";
const CONFIG_NOTE: &str = "Configuration labels (A: within-tier, B: clear-trained cross-domain, C: background-removed) are declared by the submitter; the toolkit does not verify what data a model was trained on.";
const NOBG_NOTE: &str = "combines two independent manipulations (block scrambling and background removal)";

/// Evaluation regime declared with a submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum ConfigLabel {
    #[default]
    A,
    B,
    C,
}

impl FromStr for ConfigLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ConfigLabel::A),
            "B" | "b" => Ok(ConfigLabel::B),
            "C" | "c" => Ok(ConfigLabel::C),
            _ => Err(Error::Config(format!("unknown evaluation config {s:?}"))),
        }
    }
}

impl fmt::Display for ConfigLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigLabel::A => "A",
            ConfigLabel::B => "B",
            ConfigLabel::C => "C",
        })
    }
}

/// One tier's predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    pub tier_name: String,
    pub config_label: ConfigLabel,
    pub rows: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

fn csv_line(pos: Option<&csv::Position>) -> u64 {
    pos.map_or(0, |p| p.line())
}

/// Parses a `video_id,label` prediction CSV, validating labels against `classes`.
pub fn load_predictions<S: AsRef<str>>(
    file: &[u8],
    tier_name: &str,
    config_label: ConfigLabel,
    classes: &[S],
) -> Result<PredictionSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| Error::Csv {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "video_id" || &headers[1] != "label" {
        return Err(Error::Csv {
            line: 1,
            message: format!("expected header `video_id,label`, found {headers:?}"),
        });
    }
    let mut rows = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Csv {
            line: csv_line(e.position()),
            message: e.to_string(),
        })?;
        let line = csv_line(rec.position());
        if rec.len() != 2 || rec[0].is_empty() {
            return Err(Error::Csv {
                line,
                message: "expected `video_id,label`".into(),
            });
        }
        let (id, label) = (&rec[0], &rec[1]);
        if !classes.iter().any(|c| c.as_ref() == label) {
            return Err(Error::Csv {
                line,
                message: format!("unknown class label {label:?}"),
            });
        }
        if rows.insert(id.to_string(), label.to_string()).is_some() {
            return Err(Error::DuplicatePrediction {
                video_id: id.to_string(),
                line,
            });
        }
    }
    let mut warnings = Vec::new();
    if rows.is_empty() {
        warnings.push(format!("{tier_name}: prediction file has no rows"));
        log::warn!("{tier_name}: prediction file has no rows");
    }
    Ok(PredictionSet {
        tier_name: tier_name.to_string(),
        config_label,
        rows,
        warnings,
    })
}

fn psnr_value(v: Option<f64>) -> Value {
    match v {
        Some(x) if x.is_infinite() => Value::from("inf"),
        Some(x) => serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number),
        None => Value::Null,
    }
}

fn psnr_from(v: Option<&Value>) -> Option<f64> {
    match v? {
        Value::String(s) if s == "inf" => Some(f64::INFINITY),
        other => other.as_f64(),
    }
}

/// Serializes per-tier ROI metric summaries.
pub fn quality_table_to_json(table: &BTreeMap<String, QualitySummary>) -> Vec<u8> {
    let map: Map<String, Value> = table
        .iter()
        .map(|(tier, s)| {
            let mut m = Map::new();
            m.insert("roi_ssim".into(), s.roi_ssim.map_or(Value::Null, Value::from));
            m.insert("roi_psnr_db".into(), psnr_value(s.roi_psnr_db));
            m.insert("frames".into(), Value::from(s.frames));
            m.insert("psnr_infinite".into(), Value::from(s.psnr_infinite));
            m.insert("skipped".into(), Value::from(s.skipped));
            (tier.clone(), Value::Object(m))
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&Value::Object(map)).expect("serializable");
    out.push(b'\n');
    out
}

pub fn parse_quality_table(bytes: &[u8]) -> Result<BTreeMap<String, QualitySummary>> {
    let value = parse_json(bytes)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Config("ROI metric summary must be a JSON object".into()))?;
    let mut out = BTreeMap::new();
    for (tier, v) in obj {
        let e = v
            .as_object()
            .ok_or_else(|| Error::Config(format!("ROI metric entry for {tier:?} must be an object")))?;
        let count = |k: &str| e.get(k).and_then(Value::as_u64).unwrap_or(0);
        let roi_ssim = e.get("roi_ssim").and_then(Value::as_f64);
        if let Some(s) = roi_ssim {
            if !(-1.0..=1.0).contains(&s) {
                return Err(Error::Config(format!("{tier}: roi_ssim {s} outside [-1, 1]")));
            }
        }
        out.insert(
            tier.clone(),
            QualitySummary {
                roi_ssim,
                roi_psnr_db: psnr_from(e.get("roi_psnr_db")),
                frames: count("frames"),
                psnr_infinite: count("psnr_infinite"),
                skipped: count("skipped"),
            },
        );
    }
    Ok(out)
}

/// Original/post-transform face detection flags per tier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaceFlags {
    pub original: Vec<bool>,
    pub transformed: Vec<bool>,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "True" | "TRUE" => Some(true),
        "0" | "false" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

pub fn parse_face_flags(bytes: &[u8]) -> Result<BTreeMap<String, FaceFlags>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers().map_err(|e| Error::Csv {
        line: 1,
        message: e.to_string(),
    })?;
    let expected = ["tier", "sample_id", "orig_detected", "post_detected"];
    if headers.iter().ne(expected) {
        return Err(Error::Csv {
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut out: BTreeMap<String, FaceFlags> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Csv {
            line: csv_line(e.position()),
            message: e.to_string(),
        })?;
        let line = csv_line(rec.position());
        let (Some(o), Some(p)) = (parse_flag(&rec[2]), parse_flag(&rec[3])) else {
            return Err(Error::Csv {
                line,
                message: "detection flags must be 0/1 or true/false".into(),
            });
        };
        let entry = out.entry(rec[0].to_string()).or_default();
        entry.original.push(o);
        entry.transformed.push(p);
    }
    Ok(out)
}

/// Full-precision metrics for one (tier, config) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub tier_name: String,
    pub config_label: ConfigLabel,
    pub top1: Ratio,
    pub per_class: BTreeMap<String, Option<Ratio>>,
    /// Percentage points below Original; `None` for the Original tier.
    pub acc_drop_pp: Option<f64>,
    pub roi_ssim: Option<f64>,
    pub roi_psnr_db: Option<f64>,
    pub face_fail_rate: Option<f64>,
    /// `None` for Original and when no SSIM is available.
    pub pu_score: Option<f64>,
    pub frame_count: u64,
    pub missing_predictions: Vec<String>,
}

/// What an evaluation is scored against.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a, S> {
    pub corpus: &'a [ClipRecord],
    pub split: &'a SplitAssignment,
    pub classes: &'a [S],
    /// Permit scoring against training clips.
    pub allow_train_eval: bool,
}

impl<S: AsRef<str>> EvalContext<'_, S> {
    /// Ground-truth labels of the split members.
    pub fn labels(&self) -> Result<BTreeMap<String, String>> {
        let by_id: BTreeMap<&str, &ClipRecord> =
            self.corpus.iter().map(|r| (r.video_id.as_str(), r)).collect();
        let mut labels = BTreeMap::new();
        let mut train_members = 0usize;
        for id in &self.split.video_ids {
            let rec = by_id.get(id.as_str()).ok_or_else(|| privtier_core::Error::Validation {
                video_id: id.clone(),
                field: "video_id",
                reason: "split file lists a video missing from annotations".into(),
            })?;
            if rec.split == Split::Train {
                train_members += 1;
            }
            labels.insert(id.clone(), rec.class_label.clone());
        }
        if (self.split.split_name == Split::Train || train_members > 0) && !self.allow_train_eval {
            return Err(Error::Config(format!(
                "evaluation split contains {train_members} training clips; pass --allow-train-eval to score against training data"
            )));
        }
        Ok(labels)
    }
}

/// Scores one prediction set.
///
/// `original_acc_percent` is the Original-tier Top-1 (in %) used for Δacc and PU;
/// it is required for every tier except Original itself.
pub fn evaluate<S: AsRef<str>>(
    predictions: &PredictionSet,
    ctx: &EvalContext<'_, S>,
    quality: Option<&QualitySummary>,
    face_flags: Option<&FaceFlags>,
    original_acc_percent: Option<f64>,
) -> Result<MetricsReport> {
    let labels = ctx.labels()?;
    let top1 = top1_accuracy(&predictions.rows, &labels, ctx.classes)?;
    let is_original = predictions.tier_name == ORIGINAL_TIER;
    let roi_ssim = quality.and_then(|q| q.roi_ssim);

    let (acc_drop_pp, pu) = if is_original {
        (None, None)
    } else {
        let orig = original_acc_percent.ok_or_else(|| {
            Error::Config(format!(
                "{}: Original-tier accuracy is required for the accuracy drop and PU score",
                predictions.tier_name
            ))
        })?;
        let tier = top1.overall.percent();
        let pu = roi_ssim.map(|s| pu_score(tier, orig, s)).transpose()?;
        (Some(accuracy_drop(orig, tier)), pu)
    };
    let face_fail_rate = match face_flags {
        Some(f) => face_fail_rate(&f.original, &f.transformed)?,
        None => None,
    };
    Ok(MetricsReport {
        tier_name: predictions.tier_name.clone(),
        config_label: predictions.config_label,
        top1: top1.overall,
        per_class: top1.per_class,
        acc_drop_pp,
        roi_ssim,
        roi_psnr_db: quality.and_then(|q| q.roi_psnr_db),
        face_fail_rate,
        pu_score: pu,
        frame_count: quality.map_or(0, |q| q.frames),
        missing_predictions: top1.missing,
    })
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let p = 10f64.powi(decimals);
    (x * p).round() / p
}

mod psnr_field {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_infinite() => s.serialize_str("inf"),
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(match Option::<Raw>::deserialize(d)? {
            None => None,
            Some(Raw::Num(x)) => Some(x),
            Some(Raw::Text(t)) if t == "inf" => Some(f64::INFINITY),
            Some(Raw::Text(t)) => return Err(serde::de::Error::custom(format!("bad PSNR {t:?}"))),
        })
    }
}

/// A report row as written to `report.json`, with fixed decimal precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub tier: String,
    pub config: ConfigLabel,
    pub top1_percent: f64,
    pub correct: u64,
    pub total: u64,
    pub per_class_percent: BTreeMap<String, Option<f64>>,
    pub acc_drop_pp: Option<f64>,
    pub roi_ssim: Option<f64>,
    #[serde(with = "psnr_field")]
    pub roi_psnr_db: Option<f64>,
    pub face_fail_percent: Option<f64>,
    pub pu_score: Option<f64>,
    pub frame_count: u64,
    pub missing_predictions: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl From<&MetricsReport> for TierRow {
    fn from(r: &MetricsReport) -> Self {
        let nobg = matches!(
            TierSpec::from_name(&r.tier_name),
            Some(TierSpec::Scramble { nobg: true, .. })
        );
        TierRow {
            tier: r.tier_name.clone(),
            config: r.config_label,
            top1_percent: round_to(r.top1.percent(), 1),
            correct: r.top1.num,
            total: r.top1.den,
            per_class_percent: r
                .per_class
                .iter()
                .map(|(c, a)| (c.clone(), a.map(|a| round_to(a.percent(), 1))))
                .collect(),
            acc_drop_pp: r.acc_drop_pp.map(|d| round_to(d, 1)),
            roi_ssim: r.roi_ssim.map(|s| round_to(s, 3)),
            roi_psnr_db: r
                .roi_psnr_db
                .map(|p| if p.is_finite() { round_to(p, 2) } else { p }),
            face_fail_percent: r.face_fail_rate.map(|f| round_to(100.0 * f, 1)),
            pu_score: r.pu_score.map(|p| round_to(p, 3)),
            frame_count: r.frame_count,
            missing_predictions: r.missing_predictions.len(),
            note: nobg.then(|| NOBG_NOTE.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub config_note: String,
    pub tiers: Vec<TierRow>,
}

/// The report and its two plot tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub document: ReportDocument,
    pub json: Vec<u8>,
    /// `tier,config,accuracy_percent`
    pub accuracy_csv: String,
    /// `tier,config,one_minus_ssim,accuracy_percent,pu_score,note`
    pub privacy_utility_csv: String,
}

fn tier_rank(name: &str) -> usize {
    TierSpec::default_set()
        .iter()
        .position(|t| t.name() == name)
        .unwrap_or(usize::MAX)
}

/// Builds the report document, ordering rows by config then canonical tier order.
pub fn emit_report(reports: &[MetricsReport]) -> Result<ReportBundle> {
    if reports.is_empty() {
        return Err(Error::Config("no tier reports to emit".into()));
    }
    let mut rows: Vec<TierRow> = reports.iter().map(TierRow::from).collect();
    rows.sort_by(|a, b| {
        (a.config, tier_rank(&a.tier), &a.tier).cmp(&(b.config, tier_rank(&b.tier), &b.tier))
    });
    let document = ReportDocument {
        tool: "privtier".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_note: CONFIG_NOTE.into(),
        tiers: rows,
    };
    bundle(document)
}

/// Renders a report document and its plot tables.
pub fn bundle(document: ReportDocument) -> Result<ReportBundle> {
    let (accuracy_csv, privacy_utility_csv) = plot_tables(&document)?;
    let mut json = serde_json::to_vec_pretty(&document).expect("serializable");
    json.push(b'\n');
    Ok(ReportBundle {
        document,
        json,
        accuracy_csv,
        privacy_utility_csv,
    })
}

pub fn parse_report(bytes: &[u8]) -> Result<ReportDocument> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        offset: crate::annotations::json_error_offset(bytes, &e),
        message: e.to_string(),
    })
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or(String::new(), |x| format!("{x:.decimals$}"))
}

/// Plot data: accuracy per tier, and the privacy-utility scatter.
pub fn plot_tables(doc: &ReportDocument) -> Result<(String, String)> {
    let csv_err = |e: csv::Error| Error::Config(format!("writing plot table: {e}"));
    let mut acc = csv::Writer::from_writer(Vec::new());
    acc.write_record(["tier", "config", "accuracy_percent"]).map_err(csv_err)?;
    let mut pu = csv::Writer::from_writer(Vec::new());
    pu.write_record(["tier", "config", "one_minus_ssim", "accuracy_percent", "pu_score", "note"])
        .map_err(csv_err)?;
    for r in &doc.tiers {
        acc.write_record([r.tier.clone(), r.config.to_string(), format!("{:.1}", r.top1_percent)])
            .map_err(csv_err)?;
        if let Some(s) = r.roi_ssim {
            pu.write_record([
                r.tier.clone(),
                r.config.to_string(),
                format!("{:.3}", 1.0 - s),
                format!("{:.1}", r.top1_percent),
                opt(r.pu_score, 3),
                r.note.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
    }
    let finish = |w: csv::Writer<Vec<u8>>| -> Result<String> {
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Config(format!("writing plot table: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
    };
    Ok((finish(acc)?, finish(pu)?))
}
