//! Per-frame tier transforms and the clip-level tier set.

mod blur;
mod edge;
mod nobg;
mod resize;
mod scramble;
pub mod tiers;
mod window;

pub use blur::{gaussian_kernel, tier1_blur};
pub use edge::{canny, luma_bt601, sobel, tier2_edge};
pub use nobg::apply_nobg;
pub use resize::{resize_bilinear, resize_frame};
pub use scramble::{scramble_blocks, tier3_scramble, unscramble_blocks, BlockGrid, ScrambleContext};
pub use tiers::{
    generate_tier_set, CANONICAL_BLOCK_SIZES, DEFAULT_CANNY_HIGH, DEFAULT_CANNY_LOW, DEFAULT_SIGMA, ClipFrames, TierOutput, TierSet, TierSpec, TierWarning};
pub use window::{center_window, Window};

/// Reflect-101 border index (`dcb|abcd|cba`), folded as often as needed.
#[inline]
pub(crate) fn reflect_101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}
