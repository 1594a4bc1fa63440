//! Core algorithms for a graduated privacy-tier video benchmark.
//!
//! Everything here is pure and allocation-only (`no_std` + `alloc`): the clip
//! and annotation model, keyed block permutations, the per-frame tier
//! transforms and the privacy/utility metrics. File formats, manifests and
//! the command line live in the `privtier` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod error;
pub mod frame;
pub mod metrics;
pub mod permute;
pub mod transform;

pub use corpus::{
    assign_split, detection_rate, BBox, ClipRecord, DetectionRate, Keypoint, RoiAnnotation, Split,
    SplitAssignment,
};
pub use error::{Error, Result};
pub use frame::{Frame, OUTPUT_SIZE};
pub use permute::{BlockPermutation, Generator, KeyMaterial, KeyOrigin, PermutationSeed};
pub use transform::{TierSpec, TierSet};
