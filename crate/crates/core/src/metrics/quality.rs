//! ROI-restricted SSIM and PSNR.
//!
//! SSIM uses an 11×11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03,
//! L = 255, evaluated at every window position fully inside the ROI crop,
//! per channel, then averaged over positions and channels. PSNR pools the
//! squared error of all three channels into one MSE.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::BBox;
use crate::error::{Error, Result};
use crate::frame::{Frame, CHANNELS};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn check_inputs(a: &Frame, b: &Frame, bbox: BBox) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Domain("frames must have the same dimensions"));
    }
    if !bbox.is_valid_within(a.width(), a.height()) {
        return Err(Error::Domain("bbox must lie inside the frame with positive area"));
    }
    Ok(())
}

fn window_taps() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, t) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *t = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|t| *t /= s);
    w
}

/// Separable "valid" filtering of a `w`×`h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * horiz[(y + k) * ow + x])
                .sum();
        }
    }
    out
}

fn channel_plane(frame: &Frame, bbox: BBox, c: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(bbox.area() as usize);
    for y in bbox.y_min..bbox.y_max {
        v.extend(
            frame
                .row_span(y, bbox.x_min, bbox.x_max)
                .chunks_exact(CHANNELS)
                .map(|p| p[c] as f64),
        );
    }
    v
}

/// Mean SSIM between the two frames inside `bbox`.
pub fn roi_ssim(original: &Frame, transformed: &Frame, bbox: BBox) -> Result<f64> {
    check_inputs(original, transformed, bbox)?;
    let (w, h) = (bbox.width() as usize, bbox.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::MetricUndefined("ROI smaller than the 11x11 SSIM window"));
    }
    let taps = window_taps();
    let mut total = 0.0;
    for c in 0..CHANNELS {
        let x = channel_plane(original, bbox, c);
        let y = channel_plane(transformed, bbox, c);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let mu_x = filter_valid(&x, w, h, &taps);
        let mu_y = filter_valid(&y, w, h, &taps);
        let e_xx = filter_valid(&xx, w, h, &taps);
        let e_yy = filter_valid(&yy, w, h, &taps);
        let e_xy = filter_valid(&xy, w, h, &taps);
        let n = mu_x.len();
        let mut sum = 0.0;
        for i in 0..n {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2);
            sum += num / den;
        }
        total += sum / n as f64;
    }
    Ok(total / CHANNELS as f64)
}

/// PSNR in dB inside `bbox`; `f64::INFINITY` when the crops are identical.
pub fn roi_psnr(original: &Frame, transformed: &Frame, bbox: BBox) -> Result<f64> {
    check_inputs(original, transformed, bbox)?;
    let mut sse: u64 = 0;
    for y in bbox.y_min..bbox.y_max {
        let a = original.row_span(y, bbox.x_min, bbox.x_max);
        let b = transformed.row_span(y, bbox.x_min, bbox.x_max);
        sse += a
            .iter()
            .zip(b)
            .map(|(&p, &q)| {
                let d = p as i64 - q as i64;
                (d * d) as u64
            })
            .sum::<u64>();
    }
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / (bbox.area() as f64 * CHANNELS as f64);
    Ok(10.0 * libm::log10(255.0 * 255.0 / mse))
}

/// Per-tier aggregate of frame-level ROI metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QualityAccumulator {
    ssim_sum: f64,
    ssim_frames: u64,
    psnr_sum: f64,
    psnr_finite: u64,
    psnr_infinite: u64,
    skipped: u64,
}

/// Corpus-level ROI metrics for one tier.
#[derive(Debug, Clone, PartialEq)]
pub struct QualitySummary {
    /// Mean over frames with a usable ROI.
    pub roi_ssim: Option<f64>,
    /// Mean over finite values; `INFINITY` when every frame was identical.
    pub roi_psnr_db: Option<f64>,
    pub frames: u64,
    pub psnr_infinite: u64,
    /// Frames without an annotation or with a ROI too small for the metric.
    pub skipped: u64,
}

impl QualityAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one frame pair. Frames with no ROI, or a ROI below the SSIM window, are counted as skipped.
    pub fn add_frame(&mut self, original: &Frame, transformed: &Frame, roi: Option<BBox>) -> Result<()> {
        let Some(bbox) = roi else {
            self.skipped += 1;
            return Ok(());
        };
        let ssim = match roi_ssim(original, transformed, bbox) {
            Ok(v) => v,
            Err(Error::MetricUndefined(_)) => {
                self.skipped += 1;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let psnr = roi_psnr(original, transformed, bbox)?;
        self.record(ssim, psnr);
        Ok(())
    }

    pub fn record(&mut self, ssim: f64, psnr: f64) {
        self.ssim_sum += ssim;
        self.ssim_frames += 1;
        if psnr.is_finite() {
            self.psnr_sum += psnr;
            self.psnr_finite += 1;
        } else {
            self.psnr_infinite += 1;
        }
    }

    pub fn record_skip(&mut self) {
        self.skipped += 1;
    }

    pub fn merge(&mut self, other: &QualityAccumulator) {
        self.ssim_sum += other.ssim_sum;
        self.ssim_frames += other.ssim_frames;
        self.psnr_sum += other.psnr_sum;
        self.psnr_finite += other.psnr_finite;
        self.psnr_infinite += other.psnr_infinite;
        self.skipped += other.skipped;
    }

    pub fn summary(&self) -> QualitySummary {
        let roi_ssim = (self.ssim_frames > 0).then(|| self.ssim_sum / self.ssim_frames as f64);
        let roi_psnr_db = if self.psnr_finite > 0 {
            Some(self.psnr_sum / self.psnr_finite as f64)
        } else if self.psnr_infinite > 0 {
            Some(f64::INFINITY)
        } else {
            None
        };
        QualitySummary {
            roi_ssim,
            roi_psnr_db,
            frames: self.ssim_frames,
            psnr_infinite: self.psnr_infinite,
            skipped: self.skipped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_frame(w: u32, h: u32, seed: u32, lo: u8, hi: u8) -> Frame {
        let mut s = seed;
        let span = (hi - lo) as u32 + 1;
        let px = (0..w * h * 3)
            .map(|_| {
                s = s.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
                lo + ((s >> 16) % span) as u8
            })
            .collect();
        Frame::new(w, h, px).unwrap()
    }

    fn map(f: &Frame, g: impl Fn(u8) -> u8) -> Frame {
        Frame::new(f.width(), f.height(), f.as_bytes().iter().map(|&v| g(v)).collect()).unwrap()
    }

    #[test]
    fn identical_crops() {
        let f = lcg_frame(40, 40, 1, 0, 255);
        let b = BBox::new(3, 4, 35, 38);
        assert!((roi_ssim(&f, &f, b).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(roi_psnr(&f, &f, b).unwrap(), f64::INFINITY);
    }

    #[test]
    fn offset_dark_content_collapses_luminance() {
        // Dark content (0..=10) shifted by +128: luminance term ~0.07, structure intact.
        let f = lcg_frame(32, 32, 5, 0, 10);
        let g = map(&f, |v| v.saturating_add(128));
        let s = roi_ssim(&f, &g, BBox::full(32, 32)).unwrap();
        assert!(s < 0.1, "{s}");
    }

    #[test]
    fn inverted_content_is_negative() {
        let f = lcg_frame(32, 32, 9, 64, 191);
        let g = map(&f, |v| 255 - v);
        assert!(roi_ssim(&f, &g, BBox::full(32, 32)).unwrap() < 0.0);
    }

    #[test]
    fn psnr_closed_forms() {
        let a = Frame::filled(16, 16, [100, 50, 20]);
        let b = Frame::filled(16, 16, [116, 66, 36]);
        let p = roi_psnr(&a, &b, BBox::full(16, 16)).unwrap();
        // MSE = 256, so PSNR = 10 log10(65025 / 256) = 24.048 dB.
        assert!((p - 10.0 * libm::log10(65025.0 / 256.0)).abs() < 1e-12);
        assert!((p - 24.05).abs() < 0.01);
        let z = Frame::black(8, 8);
        let w = Frame::filled(8, 8, [255; 3]);
        assert!(roi_psnr(&z, &w, BBox::full(8, 8)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn small_roi_is_undefined() {
        let f = lcg_frame(20, 20, 2, 0, 255);
        assert!(matches!(
            roi_ssim(&f, &f, BBox::new(0, 0, 10, 20)),
            Err(Error::MetricUndefined(_))
        ));
        assert!(roi_psnr(&f, &f, BBox::new(0, 0, 10, 20)).is_ok());
        assert!(roi_ssim(&f, &Frame::black(10, 10), BBox::full(10, 10)).is_err());
    }

    #[test]
    fn symmetric_and_bounded() {
        for seed in 0..20 {
            let a = lcg_frame(24, 24, seed, 0, 255);
            let b = lcg_frame(24, 24, seed + 100, 0, 255);
            let r = BBox::new(1, 2, 23, 24);
            let ab = roi_ssim(&a, &b, r).unwrap();
            let ba = roi_ssim(&b, &a, r).unwrap();
            assert!((ab - ba).abs() < 1e-9);
            assert!((-1.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn psnr_decreases_with_error() {
        let a = Frame::filled(12, 12, [128; 3]);
        let mut last = f64::INFINITY;
        for d in 1..=100u8 {
            let b = Frame::filled(12, 12, [128 + d; 3]);
            let p = roi_psnr(&a, &b, BBox::full(12, 12)).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn accumulator_skips_and_separates_infinities() {
        let a = lcg_frame(30, 30, 1, 0, 255);
        let b = lcg_frame(30, 30, 2, 0, 255);
        let mut acc = QualityAccumulator::new();
        acc.add_frame(&a, &a, Some(BBox::full(30, 30))).unwrap();
        acc.add_frame(&a, &b, Some(BBox::full(30, 30))).unwrap();
        acc.add_frame(&a, &b, None).unwrap();
        acc.add_frame(&a, &b, Some(BBox::new(0, 0, 5, 5))).unwrap();
        let s = acc.summary();
        assert_eq!(s.frames, 2);
        assert_eq!(s.psnr_infinite, 1);
        assert_eq!(s.skipped, 2);
        let expect_psnr = roi_psnr(&a, &b, BBox::full(30, 30)).unwrap();
        assert!((s.roi_psnr_db.unwrap() - expect_psnr).abs() < 1e-12);

        let mut only_same = QualityAccumulator::new();
        only_same.add_frame(&a, &a, Some(BBox::full(30, 30))).unwrap();
        assert_eq!(only_same.summary().roi_psnr_db, Some(f64::INFINITY));
        assert_eq!(QualityAccumulator::new().summary().roi_ssim, None);
    }
}
