//! Lossless 8-bit RGB PNG frames.

use std::path::Path;

use privtier_core::Frame;

use crate::error::{Error, Result};

/// Encodes `frame` as an 8-bit RGB PNG with fixed settings, so equal frames give equal bytes.
pub fn encode_png(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, frame.width(), frame.height());
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        enc.set_filter(png::Filter::Paeth);
        let mut w = enc.write_header().expect("writing to a Vec cannot fail");
        w.write_image_data(frame.as_bytes())
            .expect("buffer length matches frame dimensions");
    }
    out
}

/// Decodes any 8/16-bit gray, gray-alpha, RGB, RGBA or palette PNG into RGB8. Alpha is dropped.
pub fn decode_png(bytes: &[u8], path: &Path) -> Result<Frame> {
    let err = |message: String| Error::Png {
        path: path.to_path_buf(),
        message,
    };
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| err(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| err("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| err(e.to_string()))?;
    buf.truncate(info.buffer_size());
    let rgb: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        png::ColorType::Indexed => return Err(err("palette was not expanded".into())),
    };
    Frame::new(info.width, info.height, rgb).map_err(|e| err(e.to_string()))
}

pub fn read_png(path: &Path) -> Result<Frame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes, path)
}

/// `frame_00000.png`, `frame_00001.png`, ...
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}
