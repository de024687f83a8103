//! Strict 8-bit RGB PNG reads and writes. Channels map to `[0, 1]` by /255
//! on read; writes scale by 255 and round half up. Our own writes round-trip
//! byte-identically.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage};

use crate::image::Image;
use crate::model::Color;
use crate::scalar::Scalar;

use super::IoError;

/// Reads an 8-bit RGB PNG. Any other color layout is rejected rather than
/// converted, so quantization stays under this module's control.
pub fn read_image<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>, IoError> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|source| IoError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb: RgbImage = match decoded {
        DynamicImage::ImageRgb8(rgb) => rgb,
        other => {
            return Err(IoError::ImageFormat {
                path: path.to_path_buf(),
                message: format!("expected 8-bit RGB, found {:?}", other.color()),
            })
        }
    };
    let (width, height) = rgb.dimensions();
    let mut out = Image::<T>::new(width, height);
    for (slot, &byte) in out.data_mut().iter_mut().zip(rgb.as_raw()) {
        *slot = T::of(byte as f64 / 255.0);
    }
    Ok(out)
}

fn quantize<T: Scalar>(v: T) -> u8 {
    let scaled = v.widen().clamp(0.0, 1.0) * 255.0;
    (scaled + 0.5).floor() as u8
}

/// Writes an 8-bit RGB PNG, rounding each channel half up.
pub fn write_image<T: Scalar>(img: &Image<T>, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let rgb = RgbImage::from_raw(img.width(), img.height(), bytes)
        .expect("buffer length matches dimensions");
    let file = File::create(path).map_err(IoError::file(path))?;
    let mut writer = BufWriter::new(file);
    rgb.write_to(&mut writer, ImageFormat::Png)
        .map_err(|source| IoError::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Color seen after one write/read cycle; useful for quantization-aware
/// comparisons in tests.
pub fn quantized_color<T: Scalar>(c: Color<T>) -> Color<T> {
    Color::new(
        T::of(quantize(c.r) as f64 / 255.0),
        T::of(quantize(c.g) as f64 / 255.0),
        T::of(quantize(c.b) as f64 / 255.0),
    )
}
