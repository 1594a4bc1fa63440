//! Privacy and utility metrics.

mod accuracy;
mod quality;

pub use accuracy::{accuracy_drop, face_fail_rate, pu_score, top1_accuracy, Ratio, Top1};
pub use quality::{
    roi_psnr, roi_ssim, QualityAccumulator, QualitySummary, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW,
};
