use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core transforms, permutation derivation and metrics.
#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    /// An argument is outside the domain of the operation.
    Domain(&'static str),
    /// Key material was not exactly 16 bytes.
    KeyLength(usize),
    /// Key hex string was malformed.
    KeyHex,
    /// UCF101 group ids run from 1 to 25.
    GroupOutOfRange(u32),
    /// A record failed schema or invariant validation.
    Validation {
        video_id: String,
        field: &'static str,
        reason: String,
    },
    /// The metric is not defined for these inputs (e.g. ROI smaller than the SSIM window).
    MetricUndefined(&'static str),
    /// Predictions reference video ids that have no label.
    UnknownVideos(Vec<String>),
    /// A class name is not part of the configured class set.
    UnknownClass(String),
    /// Two inputs that must be parallel have different lengths.
    LengthMismatch { left: usize, right: usize },
    /// Rejection sampling exceeded its retry budget.
    RejectionLimit { bound: u32 },
    /// A per-frame failure inside tier generation.
    Frame {
        video_id: String,
        frame_index: usize,
        tier: String,
        source: Box<Error>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::KeyLength(n) => write!(f, "key must be exactly 16 bytes, got {n}"),
            Error::KeyHex => f.write_str("key must be 32 hexadecimal characters"),
            Error::GroupOutOfRange(g) => write!(f, "group id {g} outside 1..=25"),
            Error::Validation {
                video_id,
                field,
                reason,
            } => write!(f, "record {video_id:?}: field `{field}`: {reason}"),
            Error::MetricUndefined(msg) => write!(f, "metric undefined: {msg}"),
            Error::UnknownVideos(ids) => {
                write!(f, "predictions for unknown video ids: ")?;
                for (i, id) in ids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(id)?;
                }
                Ok(())
            }
            Error::UnknownClass(c) => write!(f, "unknown class label {c:?}"),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::RejectionLimit { bound } => {
                write!(f, "internal fault: rejection sampling for bound {bound} exceeded 1000 draws")
            }
            Error::Frame {
                video_id,
                frame_index,
                tier,
                source,
            } => write!(f, "{video_id} frame {frame_index} tier {tier}: {source}"),
        }
    }
}

impl core::error::Error for Error {}
