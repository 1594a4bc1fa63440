//! `annotations.json`: one object per clip, with optional per-frame ROI annotations.
//!
//! ```json
//! {
//!   "video_id": "00001",
//!   "source_file": "v_BrushingTeeth_g01_c01.avi",
//!   "class": "BrushingTeeth",
//!   "split": "train",
//!   "source_fps": 25,
//!   "total_frames": 120,
//!   "clip_frames": 32,
//!   "detection_rate": 0.98,
//!   "roi_bbox_mean": [45, 30, 180, 220],
//!   "annotations": [null, {"bbox": [..], "confidence": 0.91, "keypoints": [[x, y, c], ..]}, ..]
//! }
//! ```
//!
//! The group id is read from `group_id` when present, otherwise from the
//! `_gNN_` part of `source_file`. Unknown fields are kept and written back.

use privtier_core::corpus::{group_from_source_file, round4, MaskKind};
use privtier_core::{BBox, ClipRecord, Keypoint, RoiAnnotation, Split};
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

const KNOWN_FIELDS: [&str; 13] = [
    "video_id",
    "source_file",
    "class",
    "group_id",
    "split",
    "source_fps",
    "total_frames",
    "clip_frames",
    "detection_rate",
    "roi_bbox_mean",
    "annotations",
    "padded",
    "mask_kind",
];

/// A clip record plus any fields this version does not interpret.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipEntry {
    pub record: ClipRecord,
    pub extra: Map<String, Value>,
}

impl From<ClipRecord> for ClipEntry {
    fn from(record: ClipRecord) -> Self {
        Self {
            record,
            extra: Map::new(),
        }
    }
}

pub(crate) fn json_error_offset(doc: &[u8], err: &serde_json::Error) -> usize {
    let (line, column) = (err.line(), err.column());
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in doc.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(doc.len());
        }
        offset += l.len() + 1;
    }
    doc.len()
}

/// Parses a JSON document, reporting the byte offset of any syntax error.
pub(crate) fn parse_json(doc: &[u8]) -> Result<Value> {
    serde_json::from_slice(doc).map_err(|e| Error::Parse {
        offset: json_error_offset(doc, &e),
        message: e.to_string(),
    })
}

struct Fields<'a> {
    video_id: String,
    obj: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn invalid(&self, field: &'static str, reason: impl Into<String>) -> Error {
        Error::Core(privtier_core::Error::Validation {
            video_id: self.video_id.clone(),
            field,
            reason: reason.into(),
        })
    }

    fn get(&self, field: &'static str) -> Result<&'a Value> {
        self.obj
            .get(field)
            .ok_or_else(|| self.invalid(field, "missing field"))
    }

    fn string(&self, field: &'static str) -> Result<String> {
        self.get(field)?
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| self.invalid(field, "expected a string"))
    }

    fn u32(&self, field: &'static str) -> Result<u32> {
        as_u32(self.get(field)?).ok_or_else(|| self.invalid(field, "expected a non-negative integer"))
    }

    fn f64(&self, field: &'static str) -> Result<f64> {
        self.get(field)?
            .as_f64()
            .ok_or_else(|| self.invalid(field, "expected a number"))
    }

    fn bbox(&self, field: &'static str, v: &Value) -> Result<BBox> {
        parse_bbox(v).ok_or_else(|| self.invalid(field, "expected 4 non-negative integers"))
    }
}

fn as_u32(v: &Value) -> Option<u32> {
    v.as_u64().and_then(|n| u32::try_from(n).ok())
}

fn parse_bbox(v: &Value) -> Option<BBox> {
    let a = v.as_array()?;
    if a.len() != 4 {
        return None;
    }
    let mut out = [0u32; 4];
    for (o, x) in out.iter_mut().zip(a) {
        *o = as_u32(x)?;
    }
    Some(BBox::from_array(out))
}

fn parse_annotation(f: &Fields<'_>, frame: usize, v: &Value) -> Result<Option<RoiAnnotation>> {
    if v.is_null() {
        return Ok(None);
    }
    let ctx = |what: &str| format!("frame {frame}: {what}");
    let obj = v
        .as_object()
        .ok_or_else(|| f.invalid("annotations", ctx("expected null or an object")))?;
    let bbox = obj
        .get("bbox")
        .and_then(parse_bbox)
        .ok_or_else(|| f.invalid("bbox", ctx("expected 4 non-negative integers")))?;
    let confidence = obj
        .get("confidence")
        .and_then(Value::as_f64)
        .ok_or_else(|| f.invalid("confidence", ctx("expected a number")))?;
    let keypoints = obj
        .get("keypoints")
        .and_then(Value::as_array)
        .ok_or_else(|| f.invalid("keypoints", ctx("expected an array")))?
        .iter()
        .map(|k| {
            let t = k.as_array().filter(|t| t.len() == 3)?;
            Some(Keypoint {
                x: t[0].as_f64()?,
                y: t[1].as_f64()?,
                confidence: t[2].as_f64()?,
            })
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| f.invalid("keypoints", ctx("each keypoint must be [x, y, c]")))?;
    let mask_kind = match obj.get("mask_kind").map(|m| m.as_str()) {
        None | Some(Some("bbox")) => MaskKind::BBox,
        Some(Some("raster")) => MaskKind::Raster,
        Some(_) => return Err(f.invalid("mask_kind", ctx("expected \"bbox\" or \"raster\""))),
    };
    Ok(Some(RoiAnnotation {
        bbox,
        confidence,
        keypoints,
        mask_kind,
    }))
}

fn parse_entry<S: AsRef<str>>(index: usize, v: &Value, classes: &[S]) -> Result<ClipEntry> {
    let obj = v.as_object().ok_or_else(|| {
        Error::Core(privtier_core::Error::Validation {
            video_id: format!("#{index}"),
            field: "record",
            reason: "expected an object".into(),
        })
    })?;
    let video_id = obj
        .get("video_id")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| {
            Error::Core(privtier_core::Error::Validation {
                video_id: format!("#{index}"),
                field: "video_id",
                reason: "missing or not a string".into(),
            })
        })?;
    let f = Fields { video_id, obj };

    let source_file = f.string("source_file")?;
    let class_label = f.string("class")?;
    let split_s = f.string("split")?;
    let split = Split::parse(&split_s)
        .ok_or_else(|| f.invalid("split", format!("{split_s:?} is not train or test")))?;
    let group_id = match obj.get("group_id") {
        Some(g) => as_u32(g).ok_or_else(|| f.invalid("group_id", "expected a positive integer"))?,
        None => group_from_source_file(&source_file)
            .ok_or_else(|| f.invalid("group_id", "absent and not derivable from source_file"))?,
    };
    let source_fps = f.f64("source_fps")?;
    let total_frames = f.u32("total_frames")?;
    let clip_frames = f.u32("clip_frames")?;
    let detection_rate = f.f64("detection_rate")?;
    let roi_bbox_mean = f.bbox("roi_bbox_mean", f.get("roi_bbox_mean")?)?;
    let annotations = match obj.get("annotations") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .enumerate()
                .map(|(i, a)| parse_annotation(&f, i, a))
                .collect::<Result<Vec<_>>>()?,
        ),
        Some(_) => return Err(f.invalid("annotations", "expected an array")),
    };
    let padded = match obj.get("padded") {
        None => false,
        Some(p) => p.as_bool().ok_or_else(|| f.invalid("padded", "expected a boolean"))?,
    };

    let record = ClipRecord {
        video_id: f.video_id.clone(),
        source_file,
        class_label,
        group_id,
        split,
        source_fps,
        total_frames,
        clip_frames,
        detection_rate,
        roi_bbox_mean,
        annotations,
        padded,
    };
    record.validate(classes)?;

    let extra = obj
        .iter()
        .filter(|(k, _)| !KNOWN_FIELDS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Ok(ClipEntry { record, extra })
}

/// Parses and validates every record, keeping unknown fields.
pub fn parse_annotation_entries<S: AsRef<str>>(document: &[u8], classes: &[S]) -> Result<Vec<ClipEntry>> {
    let value = parse_json(document)?;
    let items = value.as_array().ok_or_else(|| Error::Parse {
        offset: 0,
        message: "top-level value must be an array".into(),
    })?;
    let entries = items
        .iter()
        .enumerate()
        .map(|(i, v)| parse_entry(i, v, classes))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.record.video_id.as_str()) {
            return Err(privtier_core::Error::Validation {
                video_id: e.record.video_id.clone(),
                field: "video_id",
                reason: "duplicate video id".into(),
            }
            .into());
        }
    }
    Ok(entries)
}

/// Parses and validates every record.
pub fn parse_annotations<S: AsRef<str>>(document: &[u8], classes: &[S]) -> Result<Vec<ClipRecord>> {
    Ok(parse_annotation_entries(document, classes)?
        .into_iter()
        .map(|e| e.record)
        .collect())
}

fn number(x: f64) -> Value {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        Value::Number(Number::from(x as i64))
    } else {
        Number::from_f64(x).map_or(Value::Null, Value::Number)
    }
}

fn bbox_value(b: BBox) -> Value {
    Value::Array(b.to_array().iter().map(|&v| Value::from(v)).collect())
}

fn annotation_value(a: &RoiAnnotation) -> Value {
    let mut m = Map::new();
    m.insert("bbox".into(), bbox_value(a.bbox));
    m.insert("confidence".into(), number(a.confidence));
    m.insert(
        "keypoints".into(),
        Value::Array(
            a.keypoints
                .iter()
                .map(|k| Value::Array(vec![number(k.x), number(k.y), number(k.confidence)]))
                .collect(),
        ),
    );
    if a.mask_kind != MaskKind::BBox {
        m.insert("mask_kind".into(), Value::from(a.mask_kind.as_str()));
    }
    Value::Object(m)
}

fn entry_value(e: &ClipEntry) -> Value {
    let r = &e.record;
    let mut m = Map::new();
    m.insert("video_id".into(), Value::from(r.video_id.as_str()));
    m.insert("source_file".into(), Value::from(r.source_file.as_str()));
    m.insert("class".into(), Value::from(r.class_label.as_str()));
    if group_from_source_file(&r.source_file) != Some(r.group_id) {
        m.insert("group_id".into(), Value::from(r.group_id));
    }
    m.insert("split".into(), Value::from(r.split.as_str()));
    m.insert("source_fps".into(), number(r.source_fps));
    m.insert("total_frames".into(), Value::from(r.total_frames));
    m.insert("clip_frames".into(), Value::from(r.clip_frames));
    m.insert("detection_rate".into(), number(round4(r.detection_rate)));
    m.insert("roi_bbox_mean".into(), bbox_value(r.roi_bbox_mean));
    if r.padded {
        m.insert("padded".into(), Value::Bool(true));
    }
    if let Some(anns) = &r.annotations {
        m.insert(
            "annotations".into(),
            Value::Array(
                anns.iter()
                    .map(|a| a.as_ref().map_or(Value::Null, annotation_value))
                    .collect(),
            ),
        );
    }
    for (k, v) in &e.extra {
        m.insert(k.clone(), v.clone());
    }
    Value::Object(m)
}

/// Serializes entries as pretty-printed UTF-8 JSON with a trailing newline.
pub fn serialize_annotations(entries: &[ClipEntry]) -> Vec<u8> {
    let doc = Value::Array(entries.iter().map(entry_value).collect());
    let mut out = serde_json::to_vec_pretty(&doc).expect("JSON values always serialize");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use privtier_core::corpus::{DEFAULT_CLASSES, KEYPOINT_COUNT};

    const SAMPLE: &str = r#"[{
      "video_id": "00001",
      "source_file": "v_BrushingTeeth_g01_c01.avi",
      "class": "BrushingTeeth",
      "split": "train",
      "source_fps": 25,
      "total_frames": 120,
      "clip_frames": 32,
      "detection_rate": 0.98,
      "roi_bbox_mean": [45, 30, 180, 220]
    }]"#;

    #[test]
    fn sample_record_parses() {
        let recs = parse_annotations(SAMPLE.as_bytes(), &DEFAULT_CLASSES).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.video_id, "00001");
        assert_eq!(r.class_label, "BrushingTeeth");
        assert_eq!(r.detection_rate, 0.98);
        assert_eq!(r.group_id, 1);
        assert_eq!(r.split, Split::Train);
        assert_eq!(r.roi_bbox_mean, BBox::new(45, 30, 180, 220));
        assert!(r.annotations.is_none());
    }

    #[test]
    fn empty_document() {
        assert!(parse_annotations(b"[]", &DEFAULT_CLASSES).unwrap().is_empty());
    }

    fn validation_field(doc: &str) -> (String, &'static str) {
        match parse_annotations(doc.as_bytes(), &DEFAULT_CLASSES) {
            Err(Error::Core(privtier_core::Error::Validation {
                video_id, field, ..
            })) => (video_id, field),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn schema_violations_name_record_and_field() {
        let bad_rate = SAMPLE.replace("0.98", "1.2");
        assert_eq!(validation_field(&bad_rate), ("00001".into(), "detection_rate"));
        let bad_split = SAMPLE.replace("\"train\"", "\"val\"");
        assert_eq!(validation_field(&bad_split).1, "split");
        let wrong_split = SAMPLE.replace("\"train\"", "\"test\"");
        assert_eq!(validation_field(&wrong_split).1, "split");
        let missing = SAMPLE.replace("\"total_frames\": 120,", "");
        assert_eq!(validation_field(&missing).1, "total_frames");
        let class = SAMPLE.replace("\"BrushingTeeth\",", "\"Surfing\",");
        assert_eq!(validation_field(&class).1, "class");
        let no_group = SAMPLE.replace("_g01_", "_");
        assert_eq!(validation_field(&no_group).1, "group_id");
    }

    #[test]
    fn malformed_document_reports_offset() {
        let doc = b"[{\"video_id\": \"1\",, }]";
        match parse_annotations(doc, &DEFAULT_CLASSES) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 18),
            other => panic!("{other:?}"),
        }
        let multi = b"[\n  {\n  \"a\": tru\n}]";
        match parse_annotations(multi, &DEFAULT_CLASSES) {
            Err(Error::Parse { offset, .. }) => assert!((12..=17).contains(&offset), "{offset}"),
            other => panic!("{other:?}"),
        }
    }

    fn full_record() -> ClipRecord {
        let ann = RoiAnnotation::new(
            BBox::new(10, 12, 150, 200),
            0.8125,
            (0..KEYPOINT_COUNT)
                .map(|i| Keypoint {
                    x: i as f64 * 3.5,
                    y: 100.25,
                    confidence: 0.125,
                })
                .collect(),
        );
        let mut anns = vec![Some(ann); 31];
        anns.insert(4, None);
        ClipRecord {
            video_id: "00007".into(),
            source_file: "v_TaiChi_g22_c03.avi".into(),
            class_label: "TaiChi".into(),
            group_id: 22,
            split: Split::Test,
            source_fps: 29.97,
            total_frames: 20,
            clip_frames: 32,
            detection_rate: 0.9688,
            roi_bbox_mean: BBox::new(10, 12, 150, 200),
            annotations: Some(anns),
            padded: true,
        }
    }

    #[test]
    fn round_trip_preserves_extras() {
        let mut e = ClipEntry::from(full_record());
        e.extra.insert("note".into(), Value::from("kept"));
        let bytes = serialize_annotations(std::slice::from_ref(&e));
        let back = parse_annotation_entries(&bytes, &DEFAULT_CLASSES).unwrap();
        assert_eq!(back, vec![e]);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\"detection_rate\": 0.9688"));
        assert!(text.contains("null"));
    }

    #[test]
    fn raster_masks_are_rejected_for_now() {
        let mut r = full_record();
        if let Some(Some(a)) = r.annotations.as_mut().and_then(|v| v.get_mut(0)) {
            a.mask_kind = MaskKind::Raster;
        }
        let bytes = serialize_annotations(&[r.into()]);
        match parse_annotations(&bytes, &DEFAULT_CLASSES) {
            Err(Error::Core(privtier_core::Error::Validation { field, .. })) => {
                assert_eq!(field, "mask_kind")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let two = format!("[{0},{0}]", &SAMPLE[1..SAMPLE.len() - 1]);
        assert_eq!(validation_field(&two).1, "video_id");
    }
}
