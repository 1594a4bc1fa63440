//! Canny edges restricted to the ROI.
//!
//! Luma is BT.601 (integer, rounded). Gradients use 3×3 Sobel with reflect-101
//! borders and an L1 magnitude. Non-maximum suppression quantizes direction to
//! four sectors with the tan 22.5° fixed-point test, and on ties keeps the
//! pixel on the lower-index side. Hysteresis follows 8-connectivity from pixels
//! whose magnitude exceeds `high` through pixels exceeding `low`.

use alloc::vec;
use alloc::vec::Vec;

use super::reflect_101;
use crate::corpus::BBox;
use crate::error::{Error, Result};
use crate::frame::Frame;

/// tan(22.5°) in Q15.
const TAN22_Q15: i64 = 13_573;

pub fn luma_bt601(frame: &Frame) -> Vec<u8> {
    frame
        .as_bytes()
        .chunks_exact(3)
        .map(|p| ((299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32 + 500) / 1000) as u8)
        .collect()
}

/// Sobel derivatives, reflect-101 at the borders.
pub fn sobel(gray: &[u8], width: usize, height: usize) -> (Vec<i32>, Vec<i32>) {
    let mut gx = vec![0i32; width * height];
    let mut gy = vec![0i32; width * height];
    let at = |x: isize, y: isize| -> i32 {
        gray[reflect_101(y, height) * width + reflect_101(x, width)] as i32
    };
    for y in 0..height as isize {
        for x in 0..width as isize {
            let (tl, t, tr) = (at(x - 1, y - 1), at(x, y - 1), at(x + 1, y - 1));
            let (l, r) = (at(x - 1, y), at(x + 1, y));
            let (bl, b, br) = (at(x - 1, y + 1), at(x, y + 1), at(x + 1, y + 1));
            let i = y as usize * width + x as usize;
            gx[i] = (tr + 2 * r + br) - (tl + 2 * l + bl);
            gy[i] = (bl + 2 * b + br) - (tl + 2 * t + tr);
        }
    }
    (gx, gy)
}

/// Binary Canny edge map of a `width`×`height` grayscale image.
pub fn canny(gray: &[u8], width: usize, height: usize, low: f64, high: f64) -> Result<Vec<bool>> {
    if !(low < high) {
        return Err(Error::Domain("canny requires low < high"));
    }
    if gray.len() != width * height {
        return Err(Error::Domain("grayscale buffer does not match dimensions"));
    }
    let (gx, gy) = sobel(gray, width, height);
    let mag: Vec<i32> = gx.iter().zip(&gy).map(|(a, b)| a.abs() + b.abs()).collect();
    let m_at = |x: isize, y: isize| -> i32 {
        if x < 0 || y < 0 || x >= width as isize || y >= height as isize {
            0
        } else {
            mag[y as usize * width + x as usize]
        }
    };

    #[derive(Clone, Copy, PartialEq)]
    enum Class {
        None,
        Weak,
        Strong,
    }
    let mut class = vec![Class::None; width * height];
    for y in 0..height as isize {
        for x in 0..width as isize {
            let i = y as usize * width + x as usize;
            let m = mag[i];
            if (m as f64) <= low {
                continue;
            }
            let (ax, ay) = (gx[i].abs() as i64, gy[i].abs() as i64);
            let tg22 = ax * TAN22_Q15;
            let ys = ay << 15;
            let keep = if ys < tg22 {
                m > m_at(x - 1, y) && m >= m_at(x + 1, y)
            } else if ys > tg22 + (ax << 16) {
                m > m_at(x, y - 1) && m >= m_at(x, y + 1)
            } else {
                let s: isize = if (gx[i] ^ gy[i]) < 0 { -1 } else { 1 };
                m > m_at(x - s, y - 1) && m > m_at(x + s, y + 1)
            };
            if keep {
                class[i] = if (m as f64) > high {
                    Class::Strong
                } else {
                    Class::Weak
                };
            }
        }
    }

    let mut edges = vec![false; width * height];
    let mut stack: Vec<usize> = Vec::new();
    for (i, c) in class.iter().enumerate() {
        if *c == Class::Strong {
            edges[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % width) as isize, (i / width) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let j = ny as usize * width + nx as usize;
                if !edges[j] && class[j] == Class::Weak {
                    edges[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Ok(edges)
}

/// White Canny edges on black, inside the ROI only. No ROI gives an all-black frame.
pub fn tier2_edge(frame: &Frame, roi: Option<BBox>, low: f64, high: f64) -> Result<Frame> {
    if !(low < high) {
        return Err(Error::Domain("canny requires low < high"));
    }
    let (w, h) = (frame.width(), frame.height());
    let mut out = Frame::black(w, h);
    let Some(roi) = roi.map(|r| r.clamp_to(w, h)) else {
        return Ok(out);
    };
    if roi.is_empty() {
        return Ok(out);
    }
    let gray = luma_bt601(frame);
    let edges = canny(&gray, w as usize, h as usize, low, high)?;
    for y in roi.y_min..roi.y_max {
        for x in roi.x_min..roi.x_max {
            if edges[(y * w + x) as usize] {
                out.set_pixel(x, y, [255; 3]);
            }
        }
    }
    Ok(out)
}
