use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Side length of every exported frame.
pub const OUTPUT_SIZE: u32 = 224;
/// Interleaved RGB.
pub const CHANNELS: usize = 3;

/// An 8-bit RGB raster, row-major, channels interleaved.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl core::fmt::Debug for Frame {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain("frame dimensions must be positive"));
        }
        if pixels.len() != width as usize * height as usize * CHANNELS {
            return Err(Error::Domain("pixel buffer length does not match dimensions"));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A frame with every pixel set to `rgb`. Zero dimensions are allowed here so
    /// callers can build degenerate inputs; use [`Frame::new`] for validated frames.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * CHANNELS);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn black(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * CHANNELS],
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * CHANNELS
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }

    /// Bytes of row `y` between columns `x0` (inclusive) and `x1` (exclusive).
    #[inline]
    pub fn row_span(&self, y: u32, x0: u32, x1: u32) -> &[u8] {
        let a = self.offset(x0, y);
        let b = self.offset(x1, y);
        &self.pixels[a..b]
    }

    #[inline]
    pub fn row_span_mut(&mut self, y: u32, x0: u32, x1: u32) -> &mut [u8] {
        let a = self.offset(x0, y);
        let b = self.offset(x1, y);
        &mut self.pixels[a..b]
    }
}
