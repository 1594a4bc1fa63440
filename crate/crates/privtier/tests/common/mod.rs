#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use privtier::annotations::{serialize_annotations, ClipEntry};
use privtier::pipeline::{PipelineConfig, FRAMES_DIR};
use privtier::png_io::{encode_png, frame_file_name};
use privtier_core::corpus::{detection_rate, mean_bbox, DEFAULT_CLASSES, KEYPOINT_COUNT};
use privtier_core::{
    assign_split, BBox, ClipRecord, Frame, Generator, KeyMaterial, KeyOrigin, Keypoint, RoiAnnotation, TierSpec,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const KEY_HEX: &str = "2b7e151628aed2a6abf7158809cf4f3c";

pub fn key() -> KeyMaterial {
    KeyMaterial::from_hex(KEY_HEX, KeyOrigin::CliFlag).unwrap()
}

pub fn classes() -> Vec<String> {
    DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect()
}

pub fn config(input: &Path, output: &Path, workers: usize) -> PipelineConfig {
    PipelineConfig {
        input_root: input.to_path_buf(),
        output_root: output.to_path_buf(),
        key: key(),
        generator: Generator::AesCtr,
        tiers: TierSpec::default_set(),
        classes: classes(),
        workers,
        resume: false,
    }
}

/// Index of the fixture clip whose ROI is smaller than a 16px block.
pub const TINY_ROI_CLIP: usize = 3;
/// Index of the fixture clip with fewer than 32 source frames.
pub const SHORT_CLIP: usize = 0;

const SOURCE_LENGTHS: [usize; 4] = [20, 32, 45, 61];
const SOURCE_SIZES: [(u32, u32); 4] = [(320, 240), (160, 120), (224, 224), (256, 180)];

pub fn source_frame(w: u32, h: u32, t: usize, rng: &mut StdRng) -> Frame {
    let mut f = Frame::black(w, h);
    let (sx, sy) = ((t as u32 * 5) % w, (h / 3).min(h.saturating_sub(20)));
    for y in 0..h {
        for x in 0..w {
            let n: u8 = rng.gen_range(0..24);
            let mut px = [
                ((x * 255) / w) as u8 / 2 + n,
                ((y * 255) / h) as u8 / 2 + n,
                (((x + y) * 3) % 200) as u8 + n / 2,
            ];
            if x >= sx && x < sx + 20 && y >= sy && y < sy + 20 {
                px = [230, 40 + n, 40];
            }
            f.set_pixel(x, y, px);
        }
    }
    f
}

fn annotation(bbox: BBox, rng: &mut StdRng) -> RoiAnnotation {
    let keypoints = (0..KEYPOINT_COUNT)
        .map(|_| Keypoint {
            x: rng.gen_range(bbox.x_min as f64..bbox.x_max as f64),
            y: rng.gen_range(bbox.y_min as f64..bbox.y_max as f64),
            confidence: rng.gen_range(0.0..=1.0),
        })
        .collect();
    RoiAnnotation::new(bbox, rng.gen_range(0.5..=1.0), keypoints)
}

/// Per-frame annotations for fixture clip `i`, in output coordinates.
pub fn clip_annotations(i: usize, rng: &mut StdRng) -> Vec<Option<RoiAnnotation>> {
    (0..32usize)
        .map(|f| {
            if (f + i) % 11 == 5 {
                return None;
            }
            let bbox = if i == TINY_ROI_CLIP {
                BBox::new(100, 100, 110, 112)
            } else {
                let x0 = 20 + (f as u32 * 2) + (i as u32 * 3) % 17;
                let y0 = 15 + (i as u32 * 7) % 23;
                let w = 60 + (i as u32 * 13) % 70;
                let h = 110 + (f as u32 % 5) * 7;
                BBox::new(x0, y0, (x0 + w).min(224), (y0 + h).min(224))
            };
            Some(annotation(bbox, rng))
        })
        .collect()
}

/// Writes a synthetic corpus of `clips` clips under `root` and returns its records.
pub fn write_fixture(root: &Path, clips: usize, seed: u64) -> Vec<ClipRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut records = Vec::new();
    for i in 0..clips {
        let class = DEFAULT_CLASSES[i % DEFAULT_CLASSES.len()];
        let group = 1 + (i as u32 * 7) % 25;
        let video_id = format!("{:05}", i + 1);
        let len = SOURCE_LENGTHS[i % SOURCE_LENGTHS.len()];
        let (w, h) = SOURCE_SIZES[i % SOURCE_SIZES.len()];
        let dir = root.join(FRAMES_DIR).join(&video_id);
        fs::create_dir_all(&dir).unwrap();
        for t in 0..len {
            fs::write(dir.join(frame_file_name(t)), encode_png(&source_frame(w, h, t, &mut rng))).unwrap();
        }
        let annotations = clip_annotations(i, &mut rng);
        records.push(ClipRecord {
            video_id,
            source_file: format!("v_{class}_g{group:02}_c{:02}.avi", 1 + i % 4),
            class_label: class.to_string(),
            group_id: group,
            split: assign_split(group).unwrap(),
            source_fps: 25.0,
            total_frames: len as u32,
            clip_frames: 32,
            detection_rate: detection_rate(&annotations).unwrap().rounded(),
            roi_bbox_mean: mean_bbox(&annotations).unwrap(),
            annotations: Some(annotations),
            padded: false,
        });
    }
    let entries: Vec<ClipEntry> = records.iter().cloned().map(ClipEntry::from).collect();
    fs::write(root.join("annotations.json"), serialize_annotations(&entries)).unwrap();
    fs::write(root.join("CHANGELOG.md"), "# Changes\n\n- initial release\n").unwrap();
    records
}

/// Every file under `root`, relative path to bytes, in path order.
pub fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<(PathBuf, Vec<u8>)> = walkdir::WalkDir::new(root)
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            (
                e.path().strip_prefix(root).unwrap().to_path_buf(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}
