use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{apply_nobg, tier1_blur, tier2_edge, tier3_scramble, BlockGrid, ScrambleContext};
use crate::corpus::RoiAnnotation;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::permute::{Generator, KeyMaterial};

pub const DEFAULT_SIGMA: f64 = 15.0;
pub const DEFAULT_CANNY_LOW: f64 = 50.0;
pub const DEFAULT_CANNY_HIGH: f64 = 150.0;
pub const CANONICAL_BLOCK_SIZES: [u32; 3] = [4, 8, 16];

/// One privacy tier and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TierSpec {
    Original,
    Blur { sigma: f64 },
    Edge { low: f64, high: f64 },
    Scramble { block_size: u32, nobg: bool },
}

impl TierSpec {
    pub const fn blur() -> Self {
        TierSpec::Blur {
            sigma: DEFAULT_SIGMA,
        }
    }

    pub const fn edge() -> Self {
        TierSpec::Edge {
            low: DEFAULT_CANNY_LOW,
            high: DEFAULT_CANNY_HIGH,
        }
    }

    pub const fn scramble(block_size: u32, nobg: bool) -> Self {
        TierSpec::Scramble { block_size, nobg }
    }

    /// Original, Blur, Edge, B4, B8, B16, then the three NoBG variants.
    pub fn default_set() -> Vec<TierSpec> {
        let mut v = alloc::vec![TierSpec::Original, TierSpec::blur(), TierSpec::edge()];
        v.extend(CANONICAL_BLOCK_SIZES.iter().map(|&b| TierSpec::scramble(b, false)));
        v.extend(CANONICAL_BLOCK_SIZES.iter().map(|&b| TierSpec::scramble(b, true)));
        v
    }

    /// Output directory name.
    pub fn name(&self) -> String {
        match *self {
            TierSpec::Original => "Original".into(),
            TierSpec::Blur { .. } => "Tier1_Blur".into(),
            TierSpec::Edge { .. } => "Tier2_Edge".into(),
            TierSpec::Scramble {
                block_size,
                nobg: false,
            } => format!("Tier3_AES_B{block_size}"),
            TierSpec::Scramble {
                block_size,
                nobg: true,
            } => format!("Tier3_AES_B{block_size}_NoBG"),
        }
    }

    /// Inverse of [`TierSpec::name`], with default parameters.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "Original" => return Some(TierSpec::Original),
            "Tier1_Blur" => return Some(TierSpec::blur()),
            "Tier2_Edge" => return Some(TierSpec::edge()),
            _ => {}
        }
        let rest = name.strip_prefix("Tier3_AES_B")?;
        let (digits, nobg) = match rest.strip_suffix("_NoBG") {
            Some(d) => (d, true),
            None => (rest, false),
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let block_size = digits.parse().ok()?;
        let spec = TierSpec::scramble(block_size, nobg);
        spec.validate().ok().map(|_| spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TierSpec::Original => Ok(()),
            TierSpec::Blur { sigma } if sigma.is_finite() && sigma > 0.0 => Ok(()),
            TierSpec::Blur { .. } => Err(Error::Domain("blur sigma must be positive")),
            TierSpec::Edge { low, high } if low < high => Ok(()),
            TierSpec::Edge { .. } => Err(Error::Domain("canny requires low < high")),
            TierSpec::Scramble { block_size, .. } if block_size >= 2 => Ok(()),
            TierSpec::Scramble { .. } => Err(Error::Domain("block size must be at least 2")),
        }
    }

    pub fn is_scramble(&self) -> bool {
        matches!(self, TierSpec::Scramble { .. })
    }

    /// Applies the tier to one frame.
    pub fn apply(
        &self,
        frame: &Frame,
        roi: Option<&RoiAnnotation>,
        ctx: &ScrambleContext<'_>,
    ) -> Result<Frame> {
        let bbox = roi.map(|r| r.bbox);
        match *self {
            TierSpec::Original => Ok(frame.clone()),
            TierSpec::Blur { sigma } => tier1_blur(frame, bbox, sigma),
            TierSpec::Edge { low, high } => tier2_edge(frame, bbox, low, high),
            TierSpec::Scramble { block_size, nobg } => {
                let scrambled = tier3_scramble(frame, bbox, block_size, ctx)?;
                Ok(if nobg {
                    apply_nobg(&scrambled, bbox)
                } else {
                    scrambled
                })
            }
        }
    }
}

impl fmt::Display for TierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A windowed, resized clip with its aligned annotations.
#[derive(Debug, Clone, Copy)]
pub struct ClipFrames<'a> {
    pub video_id: &'a str,
    pub frames: &'a [Frame],
    pub annotations: &'a [Option<RoiAnnotation>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierOutput {
    pub spec: TierSpec,
    pub name: String,
    pub frames: Vec<Frame>,
}

/// Non-fatal observations made while generating tiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TierWarning {
    /// The ROI has zero area; blur and scramble left the frame unchanged.
    DegenerateRoi { frame_index: usize },
    /// The ROI cannot hold one block; the scramble tier is the identity on this frame.
    RoiSmallerThanBlock { frame_index: usize, block_size: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierSet {
    pub outputs: Vec<TierOutput>,
    pub warnings: Vec<TierWarning>,
}

impl TierSet {
    pub fn get(&self, name: &str) -> Option<&TierOutput> {
        self.outputs.iter().find(|o| o.name == name)
    }
}

/// Renders every requested tier for every frame, using the same per-frame annotation for all tiers.
pub fn generate_tier_set(
    clip: &ClipFrames<'_>,
    key: &KeyMaterial,
    generator: Generator,
    tiers: &[TierSpec],
) -> Result<TierSet> {
    if clip.frames.len() != clip.annotations.len() {
        return Err(Error::LengthMismatch {
            left: clip.frames.len(),
            right: clip.annotations.len(),
        });
    }
    for t in tiers {
        t.validate()?;
    }

    let mut warnings = Vec::new();
    for (i, ann) in clip.annotations.iter().enumerate() {
        let Some(ann) = ann else { continue };
        if ann.bbox.is_empty() {
            warnings.push(TierWarning::DegenerateRoi { frame_index: i });
            continue;
        }
        let mut seen: Vec<u32> = Vec::new();
        for t in tiers {
            if let TierSpec::Scramble { block_size, .. } = *t {
                if !seen.contains(&block_size) && BlockGrid::for_roi(ann.bbox, block_size).is_none() {
                    warnings.push(TierWarning::RoiSmallerThanBlock {
                        frame_index: i,
                        block_size,
                    });
                }
                seen.push(block_size);
            }
        }
    }

    let mut outputs = Vec::with_capacity(tiers.len());
    for spec in tiers {
        let name = spec.name();
        let mut frames = Vec::with_capacity(clip.frames.len());
        for (i, (frame, ann)) in clip.frames.iter().zip(clip.annotations).enumerate() {
            let ctx = ScrambleContext {
                key,
                video_id: clip.video_id,
                frame_index: i as u64,
                generator,
            };
            let out = spec.apply(frame, ann.as_ref(), &ctx).map_err(|e| Error::Frame {
                video_id: clip.video_id.to_string(),
                frame_index: i,
                tier: name.clone(),
                source: Box::new(e),
            })?;
            frames.push(out);
        }
        outputs.push(TierOutput {
            spec: *spec,
            name,
            frames,
        });
    }
    Ok(TierSet { outputs, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BBox, Keypoint, KEYPOINT_COUNT};
    use crate::permute::KeyOrigin;
    use alloc::vec;

    fn key() -> KeyMaterial {
        KeyMaterial::new(&[3; 16], KeyOrigin::CliFlag).unwrap()
    }

    fn textured(seed: u32) -> Frame {
        let mut f = Frame::black(224, 224);
        let mut s = seed;
        for y in 0..224 {
            for x in 0..224 {
                s = s.wrapping_mul(1_103_515_245).wrapping_add(12_345);
                let v = ((x + y) as u8).wrapping_add((s >> 28) as u8);
                f.set_pixel(x, y, [v, v / 2, 255 - v]);
            }
        }
        f
    }

    fn ann(b: BBox) -> RoiAnnotation {
        RoiAnnotation::new(
            b,
            0.9,
            vec![
                Keypoint {
                    x: 1.0,
                    y: 1.0,
                    confidence: 0.5
                };
                KEYPOINT_COUNT
            ],
        )
    }

    #[test]
    fn names_round_trip() {
        let names: Vec<String> = TierSpec::default_set().iter().map(|t| t.name()).collect();
        assert_eq!(
            names,
            [
                "Original",
                "Tier1_Blur",
                "Tier2_Edge",
                "Tier3_AES_B4",
                "Tier3_AES_B8",
                "Tier3_AES_B16",
                "Tier3_AES_B4_NoBG",
                "Tier3_AES_B8_NoBG",
                "Tier3_AES_B16_NoBG"
            ]
        );
        for t in TierSpec::default_set() {
            assert_eq!(TierSpec::from_name(&t.name()), Some(t));
        }
        assert_eq!(TierSpec::from_name("Tier3_AES_B1"), None);
        assert_eq!(TierSpec::from_name("Tier3_AES_B"), None);
        assert_eq!(TierSpec::from_name("Blur"), None);
    }

    #[test]
    fn default_set_yields_nine_sequences() {
        let frames: Vec<Frame> = (0..32).map(textured).collect();
        let anns: Vec<Option<RoiAnnotation>> = vec![Some(ann(BBox::new(40, 30, 180, 200))); 32];
        let clip = ClipFrames {
            video_id: "00001",
            frames: &frames,
            annotations: &anns,
        };
        let set = generate_tier_set(&clip, &key(), Generator::AesCtr, &TierSpec::default_set()).unwrap();
        assert_eq!(set.outputs.len(), 9);
        assert!(set.outputs.iter().all(|o| o.frames.len() == 32));
        assert!(set.warnings.is_empty());
        assert_eq!(set.get("Original").unwrap().frames, frames);
        // NoBG is the scramble tier masked.
        let b8 = &set.get("Tier3_AES_B8").unwrap().frames[5];
        let b8n = &set.get("Tier3_AES_B8_NoBG").unwrap().frames[5];
        assert_eq!(*b8n, apply_nobg(b8, Some(BBox::new(40, 30, 180, 200))));
    }

    #[test]
    fn all_null_annotations() {
        let frames: Vec<Frame> = (0..32).map(textured).collect();
        let anns: Vec<Option<RoiAnnotation>> = vec![None; 32];
        let clip = ClipFrames {
            video_id: "00002",
            frames: &frames,
            annotations: &anns,
        };
        let set = generate_tier_set(&clip, &key(), Generator::AesCtr, &TierSpec::default_set()).unwrap();
        for out in &set.outputs {
            let black = matches!(
                out.spec,
                TierSpec::Edge { .. } | TierSpec::Scramble { nobg: true, .. }
            );
            for (f, src) in out.frames.iter().zip(&frames) {
                if black {
                    assert!(f.as_bytes().iter().all(|&b| b == 0), "{}", out.name);
                } else {
                    assert_eq!(f, src, "{}", out.name);
                }
            }
        }
    }

    #[test]
    fn original_only_is_identity() {
        let frames: Vec<Frame> = (0..4).map(textured).collect();
        let anns = vec![Some(ann(BBox::new(0, 0, 50, 50))); 4];
        let clip = ClipFrames {
            video_id: "v",
            frames: &frames,
            annotations: &anns,
        };
        let set = generate_tier_set(&clip, &key(), Generator::AesCtr, &[TierSpec::Original]).unwrap();
        assert_eq!(set.outputs[0].frames, frames);
    }

    #[test]
    fn warnings_for_small_roi_and_length_mismatch() {
        let frames: Vec<Frame> = (0..2).map(textured).collect();
        let anns = vec![Some(ann(BBox::new(0, 0, 10, 10))), Some(ann(BBox::new(5, 5, 5, 20)))];
        let clip = ClipFrames {
            video_id: "v",
            frames: &frames,
            annotations: &anns,
        };
        let set = generate_tier_set(&clip, &key(), Generator::AesCtr, &TierSpec::default_set()).unwrap();
        assert!(set.warnings.contains(&TierWarning::RoiSmallerThanBlock {
            frame_index: 0,
            block_size: 16
        }));
        assert!(set.warnings.contains(&TierWarning::DegenerateRoi { frame_index: 1 }));
        assert_eq!(set.get("Tier3_AES_B16").unwrap().frames[0], frames[0]);

        let short = ClipFrames {
            video_id: "v",
            frames: &frames,
            annotations: &anns[..1],
        };
        assert!(generate_tier_set(&short, &key(), Generator::AesCtr, &[TierSpec::Original]).is_err());
    }

    #[test]
    fn invalid_spec_rejected() {
        let frames = vec![textured(0)];
        let anns = vec![None];
        let clip = ClipFrames {
            video_id: "v",
            frames: &frames,
            annotations: &anns,
        };
        let bad = [TierSpec::Edge {
            low: 10.0,
            high: 5.0,
        }];
        assert!(generate_tier_set(&clip, &key(), Generator::AesCtr, &bad).is_err());
    }
}
