use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// An exact non-negative fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn percent(self) -> f64 {
        100.0 * self.as_f64()
    }
}

/// Overall and per-class Top-1 accuracy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Top1 {
    pub overall: Ratio,
    /// Every configured class; `None` when the class has no labelled clips.
    pub per_class: BTreeMap<String, Option<Ratio>>,
    /// Labelled videos with no prediction (scored as wrong).
    pub missing: Vec<String>,
}

/// Top-1 accuracy of `predictions` against `labels` (both video id → class).
///
/// Labelled videos without a prediction count as incorrect.
pub fn top1_accuracy<S: AsRef<str>>(
    predictions: &BTreeMap<String, String>,
    labels: &BTreeMap<String, String>,
    classes: &[S],
) -> Result<Top1> {
    let known = |c: &str| classes.iter().any(|k| k.as_ref() == c);
    let unknown_videos: Vec<String> = predictions
        .keys()
        .filter(|id| !labels.contains_key(*id))
        .cloned()
        .collect();
    if !unknown_videos.is_empty() {
        return Err(Error::UnknownVideos(unknown_videos));
    }
    if let Some(c) = predictions.values().chain(labels.values()).find(|c| !known(c)) {
        return Err(Error::UnknownClass(c.clone()));
    }
    if labels.is_empty() {
        return Err(Error::Domain("no labelled videos to evaluate"));
    }

    let mut counts: BTreeMap<&str, (u64, u64)> =
        classes.iter().map(|c| (c.as_ref(), (0, 0))).collect();
    let mut missing = Vec::new();
    let mut correct = 0u64;
    for (id, truth) in labels {
        let entry = counts.get_mut(truth.as_str()).expect("validated above");
        entry.1 += 1;
        match predictions.get(id) {
            Some(p) if p == truth => {
                entry.0 += 1;
                correct += 1;
            }
            Some(_) => {}
            None => missing.push(id.clone()),
        }
    }
    let per_class = counts
        .into_iter()
        .map(|(c, (ok, n))| {
            (
                c.to_string(),
                (n > 0).then_some(Ratio { num: ok, den: n }),
            )
        })
        .collect();
    Ok(Top1 {
        overall: Ratio {
            num: correct,
            den: labels.len() as u64,
        },
        per_class,
        missing,
    })
}

/// Accuracy drop of a tier relative to Original, in percentage points.
pub fn accuracy_drop(acc_original: f64, acc_tier: f64) -> f64 {
    acc_original - acc_tier
}

/// Privacy-utility score `(acc_tier / acc_original) · (1 − ssim_tier)`.
pub fn pu_score(acc_tier: f64, acc_original: f64, ssim_tier: f64) -> Result<f64> {
    if !(acc_original > 0.0) {
        return Err(Error::Domain("original accuracy must be positive"));
    }
    if !(-1.0..=1.0).contains(&ssim_tier) {
        return Err(Error::Domain("SSIM must lie in [-1, 1]"));
    }
    Ok(acc_tier / acc_original * (1.0 - ssim_tier))
}

/// Share of originally detected faces that are no longer detected.
///
/// `None` when nothing was detected originally.
pub fn face_fail_rate(orig_detected: &[bool], post_detected: &[bool]) -> Result<Option<f64>> {
    if orig_detected.len() != post_detected.len() {
        return Err(Error::LengthMismatch {
            left: orig_detected.len(),
            right: post_detected.len(),
        });
    }
    let mut base = 0u64;
    let mut lost = 0u64;
    for (&o, &p) in orig_detected.iter().zip(post_detected) {
        if o {
            base += 1;
            if !p {
                lost += 1;
            }
        }
    }
    Ok((base > 0).then(|| lost as f64 / base as f64))
}
