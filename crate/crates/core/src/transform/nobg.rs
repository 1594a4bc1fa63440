use crate::corpus::BBox;
use crate::frame::{Frame, CHANNELS};

/// Multiplies every pixel by the rectangular ROI mask. No ROI means an all-black frame.
pub fn apply_nobg(frame: &Frame, roi: Option<BBox>) -> Frame {
    let (w, h) = (frame.width(), frame.height());
    let mut out = Frame::black(w, h);
    let Some(roi) = roi.map(|r| r.clamp_to(w, h)) else {
        return out;
    };
    if roi.is_empty() {
        return out;
    }
    for y in roi.y_min..roi.y_max {
        out.row_span_mut(y, roi.x_min, roi.x_max)
            .copy_from_slice(frame.row_span(y, roi.x_min, roi.x_max));
    }
    debug_assert_eq!(out.as_bytes().len(), (w * h) as usize * CHANNELS);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern() -> Frame {
        let mut f = Frame::black(30, 20);
        for y in 0..20 {
            for x in 0..30 {
                f.set_pixel(x, y, [x as u8 + 1, y as u8 + 1, 200]);
            }
        }
        f
    }

    #[test]
    fn full_mask_is_identity() {
        let f = pattern();
        assert_eq!(apply_nobg(&f, Some(BBox::full(30, 20))), f);
    }

    #[test]
    fn null_roi_blacks_out() {
        let f = pattern();
        assert!(apply_nobg(&f, None).as_bytes().iter().all(|&b| b == 0));
    }

    #[test]
    fn rectangle_mask() {
        let f = pattern();
        let roi = BBox::new(4, 3, 17, 11);
        let out = apply_nobg(&f, Some(roi));
        for y in 0..20 {
            for x in 0..30 {
                if roi.contains(x, y) {
                    assert_eq!(out.pixel(x, y), f.pixel(x, y));
                } else {
                    assert_eq!(out.pixel(x, y), [0, 0, 0]);
                }
            }
        }
    }
}
