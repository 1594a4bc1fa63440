use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame::{Frame, CHANNELS, OUTPUT_SIZE};

struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

/// Source sample positions for each destination index, half-pixel-center aligned.
fn taps(src: u32, dst: u32) -> Vec<Tap> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = libm::floor(s) as usize;
            let hi = (lo + 1).min(src as usize - 1);
            Tap {
                lo,
                hi,
                frac: s - lo as f64,
            }
        })
        .collect()
}

/// Bilinear resample to `width`×`height`. Same-size input is returned unchanged.
pub fn resize_bilinear(frame: &Frame, width: u32, height: u32) -> Result<Frame> {
    if frame.width() == 0 || frame.height() == 0 || width == 0 || height == 0 {
        return Err(Error::Domain("cannot resize a zero-dimension frame"));
    }
    if frame.width() == width && frame.height() == height {
        return Ok(frame.clone());
    }
    let xs = taps(frame.width(), width);
    let ys = taps(frame.height(), height);
    let src = frame.as_bytes();
    let stride = frame.width() as usize * CHANNELS;
    let mut out = Vec::with_capacity(width as usize * height as usize * CHANNELS);
    for ty in &ys {
        let top = &src[ty.lo * stride..(ty.lo + 1) * stride];
        let bottom = &src[ty.hi * stride..(ty.hi + 1) * stride];
        for tx in &xs {
            for c in 0..CHANNELS {
                let a = top[tx.lo * CHANNELS + c] as f64;
                let b = top[tx.hi * CHANNELS + c] as f64;
                let p = bottom[tx.lo * CHANNELS + c] as f64;
                let q = bottom[tx.hi * CHANNELS + c] as f64;
                let upper = a + (b - a) * tx.frac;
                let lower = p + (q - p) * tx.frac;
                let v = upper + (lower - upper) * ty.frac;
                out.push((v + 0.5).clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::new(width, height, out)
}

/// Resamples to the 224×224 export size.
pub fn resize_frame(frame: &Frame) -> Result<Frame> {
    resize_bilinear(frame, OUTPUT_SIZE, OUTPUT_SIZE)
}
