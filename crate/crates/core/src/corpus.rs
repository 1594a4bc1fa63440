//! Clip records, per-frame ROI annotations and the group-based split rule.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::frame::OUTPUT_SIZE;

/// Frames per clip after temporal windowing.
pub const CLIP_FRAMES: u32 = 32;
/// COCO body keypoints per detection.
pub const KEYPOINT_COUNT: usize = 17;
/// Detections below this confidence are discarded before annotation.
pub const MIN_CONFIDENCE: f64 = 0.5;
/// UCF101 groups assigned to the training split.
pub const TRAIN_GROUPS: RangeInclusive<u32> = 1..=19;
/// UCF101 groups assigned to the test split.
pub const TEST_GROUPS: RangeInclusive<u32> = 20..=25;

/// The fifteen default action classes.
pub const DEFAULT_CLASSES: [&str; 15] = [
    "BrushingTeeth",
    "Haircut",
    "MoppingFloor",
    "ApplyEyeMakeup",
    "BabyCrawling",
    "ShavingBeard",
    "BodyWeightSquats",
    "Lunges",
    "TaiChi",
    "JumpRope",
    "WritingOnBoard",
    "WallPushups",
    "JumpingJack",
    "CleanAndJerk",
    "WalkingWithDog",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maps a UCF101 group id to its fixed split.
pub fn assign_split(group_id: u32) -> Result<Split> {
    if TRAIN_GROUPS.contains(&group_id) {
        Ok(Split::Train)
    } else if TEST_GROUPS.contains(&group_id) {
        Ok(Split::Test)
    } else {
        Err(Error::GroupOutOfRange(group_id))
    }
}

/// Extracts the group number from a UCF101 file name such as `v_BrushingTeeth_g01_c01.avi`.
pub fn group_from_source_file(name: &str) -> Option<u32> {
    name.split('_').find_map(|part| {
        let digits = part.strip_prefix('g')?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    })
}

/// Axis-aligned box in output-pixel coordinates. `x_max`/`y_max` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BBox {
    pub const fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub const fn from_array(a: [u32; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub const fn to_array(self) -> [u32; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// The whole `width`×`height` frame.
    pub const fn full(width: u32, height: u32) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn width(&self) -> u32 {
        self.x_max.saturating_sub(self.x_min)
    }

    pub fn height(&self) -> u32 {
        self.y_max.saturating_sub(self.y_min)
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    /// True when `0 <= x_min < x_max <= width` and likewise vertically.
    pub fn is_valid_within(&self, width: u32, height: u32) -> bool {
        self.x_min < self.x_max
            && self.y_min < self.y_max
            && self.x_max <= width
            && self.y_max <= height
    }

    /// Intersection with the `width`×`height` frame; may be empty.
    pub fn clamp_to(&self, width: u32, height: u32) -> Self {
        let x_max = self.x_max.min(width);
        let y_max = self.y_max.min(height);
        Self::new(self.x_min.min(x_max), self.y_min.min(y_max), x_max, y_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

/// How the binary ROI mask is represented. Only the rectangular form is produced today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskKind {
    #[default]
    BBox,
    Raster,
}

impl MaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskKind::BBox => "bbox",
            MaskKind::Raster => "raster",
        }
    }
}

/// The primary person detected in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiAnnotation {
    pub bbox: BBox,
    pub confidence: f64,
    pub keypoints: Vec<Keypoint>,
    pub mask_kind: MaskKind,
}

impl RoiAnnotation {
    pub fn new(bbox: BBox, confidence: f64, keypoints: Vec<Keypoint>) -> Self {
        Self {
            bbox,
            confidence,
            keypoints,
            mask_kind: MaskKind::BBox,
        }
    }

    /// Binary mask value M(p): 1 inside the box, 0 outside.
    #[inline]
    pub fn mask(&self, x: u32, y: u32) -> u8 {
        u8::from(self.bbox.contains(x, y))
    }

    /// Checks the annotation against a `width`×`height` frame; `Err` carries the field and reason.
    pub fn check(&self, width: u32, height: u32) -> core::result::Result<(), (&'static str, String)> {
        if !self.bbox.is_valid_within(width, height) {
            return Err((
                "bbox",
                format!(
                    "{:?} must satisfy 0 <= min < max <= {}x{}",
                    self.bbox.to_array(),
                    width,
                    height
                ),
            ));
        }
        if !(MIN_CONFIDENCE..=1.0).contains(&self.confidence) {
            return Err((
                "confidence",
                format!("{} outside [{MIN_CONFIDENCE}, 1]", self.confidence),
            ));
        }
        if self.keypoints.len() != KEYPOINT_COUNT {
            return Err((
                "keypoints",
                format!("expected {KEYPOINT_COUNT} keypoints, got {}", self.keypoints.len()),
            ));
        }
        if let Some(k) = self
            .keypoints
            .iter()
            .find(|k| !(0.0..=1.0).contains(&k.confidence) || !k.x.is_finite() || !k.y.is_finite())
        {
            return Err(("keypoints", format!("invalid keypoint {k:?}")));
        }
        if self.mask_kind != MaskKind::BBox {
            return Err(("mask_kind", "only rectangular bbox masks are supported".to_string()));
        }
        Ok(())
    }
}

/// Exact fraction of frames with a non-null annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionRate {
    pub detected: u32,
    pub total: u32,
}

impl DetectionRate {
    pub fn as_f64(self) -> f64 {
        self.detected as f64 / self.total as f64
    }

    /// The value as serialized: rounded to four decimals.
    pub fn rounded(self) -> f64 {
        round4(self.as_f64())
    }
}

pub fn detection_rate(annotations: &[Option<RoiAnnotation>]) -> Result<DetectionRate> {
    if annotations.is_empty() {
        return Err(Error::Domain("detection rate of an empty annotation list"));
    }
    let detected = annotations.iter().filter(|a| a.is_some()).count();
    Ok(DetectionRate {
        detected: detected as u32,
        total: annotations.len() as u32,
    })
}

/// Rounds half away from zero to four decimal places.
pub fn round4(x: f64) -> f64 {
    libm::round(x * 1e4) / 1e4
}

/// Rounded component-wise mean of the non-null boxes.
pub fn mean_bbox(annotations: &[Option<RoiAnnotation>]) -> Option<BBox> {
    let boxes: Vec<BBox> = annotations.iter().flatten().map(|a| a.bbox).collect();
    if boxes.is_empty() {
        return None;
    }
    let n = boxes.len() as f64;
    let mean = |f: fn(&BBox) -> u32| -> u32 {
        let s: u64 = boxes.iter().map(|b| f(b) as u64).sum();
        libm::round(s as f64 / n) as u32
    };
    Some(BBox::new(
        mean(|b| b.x_min),
        mean(|b| b.y_min),
        mean(|b| b.x_max),
        mean(|b| b.y_max),
    ))
}

/// Metadata and per-frame annotations for one source clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub video_id: String,
    pub source_file: String,
    pub class_label: String,
    pub group_id: u32,
    pub split: Split,
    pub source_fps: f64,
    pub total_frames: u32,
    pub clip_frames: u32,
    /// As declared in the metadata document (four decimals).
    pub detection_rate: f64,
    pub roi_bbox_mean: BBox,
    /// Per-frame annotations aligned with the windowed frames. Metadata-only
    /// documents may omit them.
    pub annotations: Option<Vec<Option<RoiAnnotation>>>,
    /// The source had fewer than 32 frames and the window repeats its last frame.
    pub padded: bool,
}

impl ClipRecord {
    /// Exact detection rate from the annotations, when present.
    pub fn exact_detection_rate(&self) -> Option<DetectionRate> {
        self.annotations
            .as_deref()
            .and_then(|a| detection_rate(a).ok())
    }

    fn invalid(&self, field: &'static str, reason: String) -> Error {
        Error::Validation {
            video_id: self.video_id.clone(),
            field,
            reason,
        }
    }

    /// Validates every record invariant against the configured class set.
    pub fn validate<S: AsRef<str>>(&self, classes: &[S]) -> Result<()> {
        if self.video_id.is_empty() {
            return Err(self.invalid("video_id", "must not be empty".into()));
        }
        if !classes.iter().any(|c| c.as_ref() == self.class_label) {
            return Err(self.invalid(
                "class",
                format!("{:?} is not a configured class", self.class_label),
            ));
        }
        let expected = assign_split(self.group_id)
            .map_err(|e| self.invalid("group_id", e.to_string()))?;
        if expected != self.split {
            return Err(self.invalid(
                "split",
                format!(
                    "group {} belongs to {}, record says {}",
                    self.group_id, expected, self.split
                ),
            ));
        }
        if !(self.source_fps.is_finite() && self.source_fps > 0.0) {
            return Err(self.invalid("source_fps", format!("{} is not positive", self.source_fps)));
        }
        if self.total_frames == 0 {
            return Err(self.invalid("total_frames", "must be positive".into()));
        }
        if self.clip_frames != CLIP_FRAMES {
            return Err(self.invalid(
                "clip_frames",
                format!("must be {CLIP_FRAMES}, got {}", self.clip_frames),
            ));
        }
        if !(0.0..=1.0).contains(&self.detection_rate) {
            return Err(self.invalid(
                "detection_rate",
                format!("{} outside [0, 1]", self.detection_rate),
            ));
        }
        if !self.roi_bbox_mean.is_valid_within(OUTPUT_SIZE, OUTPUT_SIZE) {
            return Err(self.invalid(
                "roi_bbox_mean",
                format!("{:?} outside the output frame", self.roi_bbox_mean.to_array()),
            ));
        }
        if let Some(annotations) = &self.annotations {
            if annotations.len() != self.clip_frames as usize {
                return Err(self.invalid(
                    "annotations",
                    format!(
                        "expected {} per-frame entries, got {}",
                        self.clip_frames,
                        annotations.len()
                    ),
                ));
            }
            for (i, a) in annotations.iter().enumerate() {
                if let Some(a) = a {
                    a.check(OUTPUT_SIZE, OUTPUT_SIZE).map_err(|(field, reason)| {
                        self.invalid(field, format!("frame {i}: {reason}"))
                    })?;
                }
            }
            let exact = detection_rate(annotations)?;
            if libm::fabs(exact.rounded() - self.detection_rate) > 0.5e-4 {
                return Err(self.invalid(
                    "detection_rate",
                    format!(
                        "declared {} but annotations give {}/{}",
                        self.detection_rate, exact.detected, exact.total
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// One split's ordered membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub split_name: Split,
    pub video_ids: Vec<String>,
}

impl SplitAssignment {
    /// Members of `split` among `records`, sorted by video id.
    pub fn from_records(records: &[ClipRecord], split: Split) -> Self {
        let mut video_ids: Vec<String> = records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| r.video_id.clone())
            .collect();
        video_ids.sort();
        Self {
            split_name: split,
            video_ids,
        }
    }
}

/// Checks that `train` and `test` share no video and no UCF101 group.
pub fn check_disjoint(
    records: &[ClipRecord],
    train: &SplitAssignment,
    test: &SplitAssignment,
) -> Result<()> {
    use alloc::collections::BTreeMap;
    let by_id: BTreeMap<&str, &ClipRecord> =
        records.iter().map(|r| (r.video_id.as_str(), r)).collect();
    let mut group_split: BTreeMap<(String, u32), Split> = BTreeMap::new();
    for assignment in [train, test] {
        for id in &assignment.video_ids {
            let rec = by_id.get(id.as_str()).ok_or_else(|| Error::Validation {
                video_id: id.clone(),
                field: "video_id",
                reason: "split lists an id with no record".into(),
            })?;
            // Groups are numbered within each class in UCF101.
            let key = (rec.class_label.clone(), rec.group_id);
            match group_split.get(&key) {
                Some(&s) if s != assignment.split_name => {
                    return Err(Error::Validation {
                        video_id: id.clone(),
                        field: "group_id",
                        reason: format!(
                            "group {} of {} appears in both splits",
                            rec.group_id, rec.class_label
                        ),
                    })
                }
                _ => {
                    group_split.insert(key, assignment.split_name);
                }
            }
        }
    }
    Ok(())
}
