//! Batch tier generation over a corpus directory.
//!
//! Input layout:
//!
//! ```text
//! <input>/annotations.json
//! <input>/frames/<video_id>/*.png      (any size, sorted by file name)
//! <input>/CHANGELOG.md                 (optional, copied through)
//! <input>/Estimated_Poses/             (optional, copied through)
//! ```
//!
//! Output layout:
//!
//! ```text
//! <output>/<Tier>/<video_id>/frame_00000.png .. frame_00031.png
//! <output>/annotations.json
//! <output>/train_split.txt, test_split.txt
//! <output>/roi_metrics.json
//! <output>/run_metadata.json
//! <output>/manifest.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use privtier_core::corpus::CLIP_FRAMES;
use privtier_core::metrics::{QualityAccumulator, QualitySummary};
use privtier_core::transform::{center_window, generate_tier_set, resize_frame, ClipFrames, TierWarning};
use privtier_core::{ClipRecord, Frame, Generator, KeyMaterial, RoiAnnotation, TierSpec, OUTPUT_SIZE};
use rayon::prelude::*;
use serde_json::{json, Value};
use walkdir::WalkDir;

use crate::annotations::{parse_annotation_entries, parse_json, serialize_annotations, ClipEntry};
use crate::error::{Error, Result};
use crate::evalkit::{parse_quality_table, quality_table_to_json, QUALITY_FILE};
use crate::manifest::{build_manifest_excluding, verify_manifest, Manifest, VerificationReport, MANIFEST_FILE};
use crate::png_io::{decode_png, encode_png, frame_file_name, read_png};
use crate::splits::{assignments, render_split, split_file_name};

pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const FRAMES_DIR: &str = "frames";
pub const METADATA_FILE: &str = "run_metadata.json";
const PASSTHROUGH: [&str; 2] = ["CHANGELOG.md", "Estimated_Poses"];

/// Window frames at which ROI metrics are sampled.
pub const METRIC_FRAMES: [usize; 4] = [0, 8, 16, 24];

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input_root: PathBuf,
    pub output_root: PathBuf,
    pub key: KeyMaterial,
    pub generator: Generator,
    pub tiers: Vec<TierSpec>,
    pub classes: Vec<String>,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// Leave existing files with identical content untouched.
    pub resume: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineReport {
    pub clips_ok: usize,
    /// Clips that could not be processed, with the reason. They are absent from every output.
    pub failures: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub files_written: usize,
    pub files_unchanged: usize,
    pub quality: BTreeMap<String, QualitySummary>,
    pub manifest_entries: usize,
}

impl PipelineReport {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Default)]
struct WriteStats {
    written: usize,
    unchanged: usize,
}

fn write_file(path: &Path, bytes: &[u8], resume: bool, stats: &mut WriteStats) -> Result<()> {
    if resume && fs::read(path).is_ok_and(|old| old == bytes) {
        stats.unchanged += 1;
        return Ok(());
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    stats.written += 1;
    Ok(())
}

/// Source frames of one clip, in file-name order.
pub fn load_source_frames(dir: &Path) -> Result<Vec<Frame>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("{}: no PNG frames", dir.display())));
    }
    paths.iter().map(|p| read_png(p)).collect()
}

struct ClipResult {
    video_id: String,
    padded: bool,
    quality: BTreeMap<String, QualityAccumulator>,
    warnings: Vec<String>,
    stats: WriteStats,
}

fn annotations_for(record: &ClipRecord) -> Vec<Option<RoiAnnotation>> {
    record
        .annotations
        .clone()
        .unwrap_or_else(|| vec![None; CLIP_FRAMES as usize])
}

fn process_clip(cfg: &PipelineConfig, record: &ClipRecord) -> Result<ClipResult> {
    let src = load_source_frames(&cfg.input_root.join(FRAMES_DIR).join(&record.video_id))?;
    let window = center_window(&src, CLIP_FRAMES as usize)?;
    let frames: Vec<Frame> = window.frames.iter().map(resize_frame).collect::<privtier_core::Result<_>>()?;
    let annotations = annotations_for(record);
    let mut warnings = Vec::new();
    if record.annotations.is_none() {
        warnings.push(format!("{}: no per-frame annotations; every frame treated as undetected", record.video_id));
    }
    let clip = ClipFrames {
        video_id: &record.video_id,
        frames: &frames,
        annotations: &annotations,
    };
    let set = generate_tier_set(&clip, &cfg.key, cfg.generator, &cfg.tiers)?;
    for w in &set.warnings {
        warnings.push(match w {
            TierWarning::DegenerateRoi { frame_index } => {
                format!("{} frame {frame_index}: zero-area ROI", record.video_id)
            }
            TierWarning::RoiSmallerThanBlock {
                frame_index,
                block_size,
            } => format!(
                "{} frame {frame_index}: ROI smaller than a {block_size}px block, scramble is the identity",
                record.video_id
            ),
        });
    }

    let mut stats = WriteStats::default();
    let mut quality = BTreeMap::new();
    for out in &set.outputs {
        let dir = cfg.output_root.join(&out.name).join(&record.video_id);
        for (i, f) in out.frames.iter().enumerate() {
            write_file(&dir.join(frame_file_name(i)), &encode_png(f), cfg.resume, &mut stats)?;
        }
        let mut acc = QualityAccumulator::new();
        for &i in &METRIC_FRAMES {
            let roi = annotations[i].as_ref().map(|a| a.bbox).filter(|b| !b.is_empty());
            acc.add_frame(&frames[i], &out.frames[i], roi)?;
        }
        quality.insert(out.name.clone(), acc);
    }
    Ok(ClipResult {
        video_id: record.video_id.clone(),
        padded: window.padded,
        quality,
        warnings,
        stats,
    })
}

fn copy_tree(src: &Path, dst: &Path, resume: bool, stats: &mut WriteStats) -> Result<()> {
    for entry in WalkDir::new(src).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Walk {
            path: e.path().unwrap_or(src).to_path_buf(),
            message: e.to_string(),
        })?;
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(src).unwrap_or(entry.path());
            let bytes = fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
            write_file(&dst.join(rel), &bytes, resume, stats)?;
        }
    }
    Ok(())
}

fn metadata_json(cfg: &PipelineConfig, report: &PipelineReport) -> Vec<u8> {
    let doc = json!({
        "tool": "privtier",
        "version": env!("CARGO_PKG_VERSION"),
        "generator": cfg.generator.as_str(),
        "non_canonical": !cfg.generator.is_canonical(),
        "key_fingerprint_sha256": cfg.key.fingerprint(),
        "tiers": cfg.tiers.iter().map(|t| t.name()).collect::<Vec<_>>(),
        "classes": cfg.classes,
        "clip_frames": CLIP_FRAMES,
        "output_size": OUTPUT_SIZE,
        "metric_frames": METRIC_FRAMES,
        "clips": report.clips_ok,
        "failed_clips": report.failures.iter().map(|(id, why)| json!({"video_id": id, "reason": why})).collect::<Vec<_>>(),
    });
    let mut out = serde_json::to_vec_pretty(&doc).expect("serializable");
    out.push(b'\n');
    out
}

/// Generates every configured tier for every clip and writes the output tree.
///
/// Corpus-level problems (unreadable or invalid annotations, split conflicts) are
/// returned as errors before anything is written. Per-clip failures are recorded
/// in the report and the remaining clips are still processed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    if cfg.tiers.is_empty() {
        return Err(Error::Config("no tiers selected".into()));
    }
    let mut names = BTreeSet::new();
    for t in &cfg.tiers {
        t.validate()?;
        if !names.insert(t.name()) {
            return Err(Error::Config(format!("tier {} requested twice", t.name())));
        }
    }
    let ann_path = cfg.input_root.join(ANNOTATIONS_FILE);
    let doc = fs::read(&ann_path).map_err(|e| Error::io(&ann_path, e))?;
    let entries = parse_annotation_entries(&doc, &cfg.classes)?;
    let records: Vec<ClipRecord> = entries.iter().map(|e| e.record.clone()).collect();
    assignments(&records)?;
    if !cfg.generator.is_canonical() {
        log::warn!("using the non-canonical CSPRNG fallback; outputs will not match AES-CTR runs");
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<ClipResult>> =
        pool.install(|| records.par_iter().map(|r| process_clip(cfg, r)).collect());

    let mut report = PipelineReport::default();
    let mut stats = WriteStats::default();
    let mut quality: BTreeMap<String, QualityAccumulator> = BTreeMap::new();
    let mut kept: Vec<ClipEntry> = Vec::new();
    for (entry, res) in entries.into_iter().zip(results) {
        match res {
            Ok(r) => {
                for w in r.warnings {
                    log::warn!("{w}");
                    report.warnings.push(w);
                }
                for (tier, acc) in &r.quality {
                    quality.entry(tier.clone()).or_default().merge(acc);
                }
                stats.written += r.stats.written;
                stats.unchanged += r.stats.unchanged;
                let mut entry = entry;
                entry.record.padded |= r.padded;
                kept.push(entry);
                report.clips_ok += 1;
                debug_assert_eq!(kept.last().map(|e| e.record.video_id.as_str()), Some(r.video_id.as_str()));
            }
            Err(e) => {
                log::error!("{}: {e}", entry.record.video_id);
                report.failures.push((entry.record.video_id.clone(), e.to_string()));
            }
        }
    }
    report.quality = quality.iter().map(|(k, v)| (k.clone(), v.summary())).collect();

    let out = &cfg.output_root;
    let kept_records: Vec<ClipRecord> = kept.iter().map(|e| e.record.clone()).collect();
    let (train, test) = assignments(&kept_records)?;
    write_file(&out.join(ANNOTATIONS_FILE), &serialize_annotations(&kept), cfg.resume, &mut stats)?;
    for a in [&train, &test] {
        write_file(
            &out.join(split_file_name(a.split_name)),
            render_split(a).as_bytes(),
            cfg.resume,
            &mut stats,
        )?;
    }
    write_file(&out.join(QUALITY_FILE), &quality_table_to_json(&report.quality), cfg.resume, &mut stats)?;
    for name in PASSTHROUGH {
        let src = cfg.input_root.join(name);
        if src.is_file() {
            let bytes = fs::read(&src).map_err(|e| Error::io(&src, e))?;
            write_file(&out.join(name), &bytes, cfg.resume, &mut stats)?;
        } else if src.is_dir() {
            copy_tree(&src, &out.join(name), cfg.resume, &mut stats)?;
        }
    }
    write_file(&out.join(METADATA_FILE), &metadata_json(cfg, &report), cfg.resume, &mut stats)?;

    let manifest = build_manifest_excluding(out, &[MANIFEST_FILE])?;
    write_file(&out.join(MANIFEST_FILE), &manifest.to_json(), cfg.resume, &mut stats)?;
    report.manifest_entries = manifest.len();
    report.files_written = stats.written;
    report.files_unchanged = stats.unchanged;
    Ok(report)
}

/// Findings of [`verify_run`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunVerification {
    pub manifest: VerificationReport,
    /// Missing tiers or frames, undecodable PNGs, wrong dimensions.
    pub structure: Vec<String>,
}

impl RunVerification {
    pub fn is_clean(&self) -> bool {
        self.manifest.is_clean() && self.structure.is_empty()
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_json(&bytes)
}

/// Checks an output tree against its manifest and expected structure.
pub fn verify_run(output_root: &Path) -> Result<RunVerification> {
    let manifest_path = output_root.join(MANIFEST_FILE);
    let bytes = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest = Manifest::from_json(&bytes)?;
    let mut result = RunVerification {
        manifest: verify_manifest(output_root, &manifest),
        structure: Vec::new(),
    };

    let meta = read_json(&output_root.join(METADATA_FILE))?;
    let strings = |key: &str| -> Vec<String> {
        meta.get(key)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_owned)).collect())
            .unwrap_or_default()
    };
    let tiers = strings("tiers");
    let classes = strings("classes");
    if tiers.is_empty() {
        result.structure.push(format!("{METADATA_FILE}: no tiers listed"));
    }
    let ann_bytes = fs::read(output_root.join(ANNOTATIONS_FILE)).map_err(|e| Error::io(output_root.join(ANNOTATIONS_FILE), e))?;
    let entries = parse_annotation_entries(&ann_bytes, &classes)?;
    let _ = parse_quality_table(
        &fs::read(output_root.join(QUALITY_FILE)).map_err(|e| Error::io(output_root.join(QUALITY_FILE), e))?,
    )?;

    let jobs: Vec<(String, String)> = tiers
        .iter()
        .flat_map(|t| entries.iter().map(move |e| (t.clone(), e.record.video_id.clone())))
        .collect();
    let mut findings: Vec<String> = jobs
        .par_iter()
        .flat_map_iter(|(tier, id)| {
            let dir = output_root.join(tier).join(id);
            let mut issues = Vec::new();
            if !dir.is_dir() {
                issues.push(format!("{tier}/{id}: missing clip directory"));
                return issues;
            }
            for i in 0..CLIP_FRAMES as usize {
                let path = dir.join(frame_file_name(i));
                let Ok(bytes) = fs::read(&path) else {
                    issues.push(format!("{tier}/{id}/{}: missing frame", frame_file_name(i)));
                    continue;
                };
                match decode_png(&bytes, &path) {
                    Ok(f) if f.width() == OUTPUT_SIZE && f.height() == OUTPUT_SIZE => {}
                    Ok(f) => issues.push(format!(
                        "{tier}/{id}/{}: {}x{} instead of {OUTPUT_SIZE}x{OUTPUT_SIZE}",
                        frame_file_name(i),
                        f.width(),
                        f.height()
                    )),
                    Err(e) => issues.push(e.to_string()),
                }
            }
            issues
        })
        .collect();
    findings.sort();
    result.structure.extend(findings);
    Ok(result)
}
