use crate::corpus::BBox;
use crate::error::{Error, Result};
use crate::frame::{Frame, CHANNELS};
use crate::permute::{block_permutation, BlockPermutation, Generator, KeyMaterial, PermutationSeed};

/// The largest B-aligned block grid anchored at the ROI's top-left corner and
/// contained in it. Right and bottom strips narrower than B stay untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    pub origin_x: u32,
    pub origin_y: u32,
    pub cols: u32,
    pub rows: u32,
    pub block_size: u32,
}

impl BlockGrid {
    /// `None` when the ROI cannot hold a single block.
    pub fn for_roi(roi: BBox, block_size: u32) -> Option<Self> {
        if block_size == 0 {
            return None;
        }
        let cols = roi.width() / block_size;
        let rows = roi.height() / block_size;
        (cols >= 1 && rows >= 1).then_some(Self {
            origin_x: roi.x_min,
            origin_y: roi.y_min,
            cols,
            rows,
            block_size,
        })
    }

    pub fn block_count(&self) -> usize {
        self.cols as usize * self.rows as usize
    }

    /// The scrambled region.
    pub fn region(&self) -> BBox {
        BBox::new(
            self.origin_x,
            self.origin_y,
            self.origin_x + self.cols * self.block_size,
            self.origin_y + self.rows * self.block_size,
        )
    }

    /// Top-left pixel of block (or slot) `i`, numbered row-major.
    pub fn block_origin(&self, i: usize) -> (u32, u32) {
        let col = i as u32 % self.cols;
        let row = i as u32 / self.cols;
        (
            self.origin_x + col * self.block_size,
            self.origin_y + row * self.block_size,
        )
    }

    /// Width of the unscrambled right and bottom ROI strips.
    pub fn residual(&self, roi: BBox) -> (u32, u32) {
        let r = self.region();
        (roi.x_max - r.x_max, roi.y_max - r.y_max)
    }
}

fn copy_block(src: &Frame, dst: &mut Frame, from: (u32, u32), to: (u32, u32), b: u32) {
    for dy in 0..b {
        let row = src.row_span(from.1 + dy, from.0, from.0 + b);
        dst.row_span_mut(to.1 + dy, to.0, to.0 + b).copy_from_slice(row);
    }
}

/// Moves block `i` to slot `perm.mapping()[i]`.
pub fn scramble_blocks(frame: &Frame, grid: &BlockGrid, perm: &BlockPermutation) -> Frame {
    debug_assert_eq!(perm.len(), grid.block_count());
    let mut out = frame.clone();
    for (i, &dst) in perm.mapping().iter().enumerate() {
        copy_block(
            frame,
            &mut out,
            grid.block_origin(i),
            grid.block_origin(dst as usize),
            grid.block_size,
        );
    }
    out
}

/// Inverse of [`scramble_blocks`].
pub fn unscramble_blocks(frame: &Frame, grid: &BlockGrid, perm: &BlockPermutation) -> Frame {
    debug_assert_eq!(perm.len(), grid.block_count());
    let mut out = frame.clone();
    for (i, &dst) in perm.mapping().iter().enumerate() {
        copy_block(
            frame,
            &mut out,
            grid.block_origin(dst as usize),
            grid.block_origin(i),
            grid.block_size,
        );
    }
    out
}

/// Identifies the frame being scrambled.
#[derive(Debug, Clone, Copy)]
pub struct ScrambleContext<'a> {
    pub key: &'a KeyMaterial,
    pub video_id: &'a str,
    pub frame_index: u64,
    pub generator: Generator,
}

impl ScrambleContext<'_> {
    pub fn permutation(&self, grid: &BlockGrid) -> Result<BlockPermutation> {
        let seed = PermutationSeed::new(self.video_id, self.frame_index, grid.block_size)?;
        block_permutation(self.key, &seed, grid.block_count(), self.generator)
    }
}

/// Keyed block permutation of the ROI. Without a ROI, or with a ROI smaller
/// than one block, the frame passes through unchanged.
pub fn tier3_scramble(
    frame: &Frame,
    roi: Option<BBox>,
    block_size: u32,
    ctx: &ScrambleContext<'_>,
) -> Result<Frame> {
    if block_size < 2 {
        return Err(Error::Domain("block size must be at least 2"));
    }
    let Some(roi) = roi.map(|r| r.clamp_to(frame.width(), frame.height())) else {
        return Ok(frame.clone());
    };
    let Some(grid) = BlockGrid::for_roi(roi, block_size) else {
        return Ok(frame.clone());
    };
    let perm = ctx.permutation(&grid)?;
    debug_assert_eq!(frame.as_bytes().len() % CHANNELS, 0);
    Ok(scramble_blocks(frame, &grid, &perm))
}
