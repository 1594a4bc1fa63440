use alloc::vec;
use alloc::vec::Vec;

use super::reflect_101;
use crate::corpus::BBox;
use crate::error::{Error, Result};
use crate::frame::{Frame, CHANNELS};

/// Normalized 1-D Gaussian taps with radius ⌈3σ⌉.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain("blur sigma must be positive"));
    }
    let radius = libm::ceil(3.0 * sigma) as i64;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| libm::exp(-((k * k) as f64) / denom))
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Replaces the ROI with the Gaussian-filtered frame; everything else is untouched.
///
/// The filter reads the whole frame, so its support may cross the ROI edge.
/// Frame borders use reflect-101. A missing or zero-area ROI leaves the frame unchanged.
pub fn tier1_blur(frame: &Frame, roi: Option<BBox>, sigma: f64) -> Result<Frame> {
    let kernel = gaussian_kernel(sigma)?;
    let mut out = frame.clone();
    let Some(roi) = roi.map(|r| r.clamp_to(frame.width(), frame.height())) else {
        return Ok(out);
    };
    if roi.is_empty() {
        return Ok(out);
    }

    let r = (kernel.len() / 2) as isize;
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let (x0, x1) = (roi.x_min as usize, roi.x_max as usize);
    let (y0, y1) = (roi.y_min as usize, roi.y_max as usize);
    let roi_w = x1 - x0;
    let src = frame.as_bytes();

    // Rows the vertical pass will read.
    let mut needed = vec![false; h];
    for y in y0..y1 {
        for k in -r..=r {
            needed[reflect_101(y as isize + k, h)] = true;
        }
    }

    // Horizontal pass, restricted to ROI columns.
    let mut horiz = vec![0.0f64; h * roi_w * CHANNELS];
    let col_idx: Vec<Vec<usize>> = (x0..x1)
        .map(|x| (-r..=r).map(|k| reflect_101(x as isize + k, w)).collect())
        .collect();
    for y in (0..h).filter(|&y| needed[y]) {
        let row = &src[y * w * CHANNELS..(y + 1) * w * CHANNELS];
        for (i, cols) in col_idx.iter().enumerate() {
            let mut acc = [0.0f64; CHANNELS];
            for (&sx, &wt) in cols.iter().zip(&kernel) {
                let p = &row[sx * CHANNELS..sx * CHANNELS + CHANNELS];
                for c in 0..CHANNELS {
                    acc[c] += wt * p[c] as f64;
                }
            }
            let o = (y * roi_w + i) * CHANNELS;
            horiz[o..o + CHANNELS].copy_from_slice(&acc);
        }
    }

    // Vertical pass, written only inside the ROI.
    let dst = out.as_bytes_mut();
    for y in y0..y1 {
        let rows: Vec<usize> = (-r..=r).map(|k| reflect_101(y as isize + k, h)).collect();
        for i in 0..roi_w {
            let mut acc = [0.0f64; CHANNELS];
            for (&sy, &wt) in rows.iter().zip(&kernel) {
                let o = (sy * roi_w + i) * CHANNELS;
                for c in 0..CHANNELS {
                    acc[c] += wt * horiz[o + c];
                }
            }
            let o = (y * w + x0 + i) * CHANNELS;
            for c in 0..CHANNELS {
                dst[o + c] = (acc[c] + 0.5).clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mirror without repeating the edge sample, by explicit bouncing.
    fn bounce(mut i: isize, n: isize) -> isize {
        if n == 1 {
            return 0;
        }
        loop {
            if i < 0 {
                i = -i;
            } else if i >= n {
                i = 2 * (n - 1) - i;
            } else {
                return i;
            }
        }
    }

    /// Dense 2-D convolution with the unseparated Gaussian.
    fn dense_blur(frame: &Frame, x: u32, y: u32, sigma: f64) -> [f64; 3] {
        let r = libm::ceil(3.0 * sigma) as isize;
        let (w, h) = (frame.width() as isize, frame.height() as isize);
        let mut acc = [0.0; 3];
        let mut norm = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let wt = libm::exp(-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma));
                norm += wt;
                let sx = bounce(x as isize + dx, w) as u32;
                let sy = bounce(y as isize + dy, h) as u32;
                let p = frame.pixel(sx, sy);
                for c in 0..3 {
                    acc[c] += wt * p[c] as f64;
                }
            }
        }
        acc.map(|a| a / norm)
    }

    fn noise(w: u32, h: u32, seed: u32) -> Frame {
        let mut s = seed;
        let px = (0..w * h * 3)
            .map(|_| {
                s = s.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
                (s >> 24) as u8
            })
            .collect();
        Frame::new(w, h, px).unwrap()
    }

    #[test]
    fn kernel_is_normalized_with_radius_3_sigma() {
        let k = gaussian_kernel(15.0).unwrap();
        assert_eq!(k.len(), 91);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(gaussian_kernel(1.5).unwrap().len(), 11);
        assert!(gaussian_kernel(0.0).is_err());
    }

    #[test]
    fn constant_roi_unchanged() {
        let f = Frame::filled(64, 48, [90, 10, 250]);
        let out = tier1_blur(&f, Some(BBox::new(5, 5, 40, 40)), 15.0).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn outside_roi_untouched() {
        let f = noise(80, 60, 7);
        let roi = BBox::new(10, 12, 50, 41);
        let out = tier1_blur(&f, Some(roi), 3.0).unwrap();
        for y in 0..60 {
            for x in 0..80 {
                if !roi.contains(x, y) {
                    assert_eq!(out.pixel(x, y), f.pixel(x, y));
                }
            }
        }
        assert_ne!(out, f);
    }

    #[test]
    fn impulse_response_matches_dense_gaussian() {
        let mut f = Frame::black(224, 224);
        f.set_pixel(112, 112, [255, 255, 255]);
        let roi = BBox::new(62, 62, 163, 163);
        let out = tier1_blur(&f, Some(roi), 15.0).unwrap();
        for y in (62..163).step_by(3) {
            for x in (62..163).step_by(3) {
                let expect = dense_blur(&f, x, y, 15.0)[0];
                let got = out.pixel(x, y)[0] as f64;
                assert!((got - expect).abs() <= 1.0, "({x},{y}) {got} vs {expect}");
            }
        }
    }

    #[test]
    fn noise_matches_dense_convolution_with_borders() {
        let f = noise(40, 30, 99);
        let roi = BBox::new(0, 0, 40, 30);
        let out = tier1_blur(&f, Some(roi), 2.0).unwrap();
        for y in 0..30 {
            for x in 0..40 {
                let expect = dense_blur(&f, x, y, 2.0);
                let got = out.pixel(x, y);
                for c in 0..3 {
                    assert!((got[c] as f64 - expect[c]).abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn ramp_mean_preserved() {
        let mut f = Frame::black(224, 224);
        for y in 0..224 {
            for x in 0..224 {
                let v = (x / 2 + y / 3) as u8;
                f.set_pixel(x, y, [v, v, v]);
            }
        }
        let roi = BBox::new(60, 60, 160, 160);
        let out = tier1_blur(&f, Some(roi), 15.0).unwrap();
        let mean = |fr: &Frame| {
            let mut s = 0u64;
            for y in 60..160 {
                for x in 60..160 {
                    s += fr.pixel(x, y)[0] as u64;
                }
            }
            s as f64 / 10_000.0
        };
        assert!((mean(&out) - mean(&f)).abs() < 1.0);
    }

    #[test]
    fn missing_or_degenerate_roi_passes_through() {
        let f = noise(20, 20, 3);
        assert_eq!(tier1_blur(&f, None, 15.0).unwrap(), f);
        assert_eq!(tier1_blur(&f, Some(BBox::new(5, 5, 5, 9)), 15.0).unwrap(), f);
    }
}
