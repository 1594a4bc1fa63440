use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A fixed-length temporal window cut from a longer sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    pub frames: Vec<T>,
    /// Index of the first selected source frame.
    pub start: usize,
    /// The source was shorter than the target and its last frame was repeated.
    pub padded: bool,
}

/// Selects `target` frames from the temporal center of `frames`.
///
/// Sequences shorter than `target` are kept whole and padded by repeating the
/// final frame.
pub fn center_window<T: Clone>(frames: &[T], target: usize) -> Result<Window<T>> {
    let Some(last) = frames.last() else {
        return Err(Error::Domain("cannot window an empty frame sequence"));
    };
    if target == 0 {
        return Err(Error::Domain("window length must be positive"));
    }
    let len = frames.len();
    if len >= target {
        let start = (len - target) / 2;
        return Ok(Window {
            frames: frames[start..start + target].to_vec(),
            start,
            padded: false,
        });
    }
    let mut out = frames.to_vec();
    out.resize(target, last.clone());
    Ok(Window {
        frames: out,
        start: 0,
        padded: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_clip_takes_center() {
        let src: Vec<usize> = (0..120).collect();
        let w = center_window(&src, 32).unwrap();
        // (120 - 32) / 2 = 44
        assert_eq!(w.start, 44);
        assert_eq!(w.frames.first(), Some(&44));
        assert_eq!(w.frames.last(), Some(&75));
        assert_eq!(w.frames.len(), 32);
        assert!(!w.padded);

        let odd: Vec<usize> = (0..33).collect();
        assert_eq!(center_window(&odd, 32).unwrap().start, 0);
    }

    #[test]
    fn exact_length_is_identity() {
        let src: Vec<usize> = (0..32).collect();
        let w = center_window(&src, 32).unwrap();
        assert_eq!(w.frames, src);
        assert!(!w.padded);
    }

    #[test]
    fn short_clip_is_padded_with_last_frame() {
        let src: Vec<usize> = (0..20).collect();
        let w = center_window(&src, 32).unwrap();
        assert!(w.padded);
        assert_eq!(&w.frames[..20], &src[..]);
        assert!(w.frames[20..].iter().all(|&f| f == 19));
        assert_eq!(w.frames[20..].len(), 12);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(center_window::<u8>(&[], 32).is_err());
    }
}
