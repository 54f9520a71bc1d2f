//! PNG and binary PGM/PPM decode/encode, plus 1-bit PNG masks.

use std::fs::File;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ChannelImage, RasterImage};

fn codec(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::Io {
            path: Default::default(),
            source: io,
        },
        other => Error::Codec(other.to_string()),
    }
}

fn from_dynamic(img: DynamicImage) -> Result<RasterImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => RasterImage::new(w, h, 1, buf.into_raw()),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            RasterImage::new(w, h, 1, img.to_luma8().into_raw())
        }
        other => RasterImage::new(w, h, 3, other.to_rgb8().into_raw()),
    }
}

/// Reads a PNG, PGM or PPM file into a 1- or 3-channel image.
pub fn read_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    let img = image::load_from_memory(bytes).map_err(codec)?;
    from_dynamic(img)
}

fn format_for(path: &Path) -> ImageFormat {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(ext) if ext == "pgm" || ext == "ppm" || ext == "pnm" => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    }
}

fn color_type(channels: usize) -> image::ExtendedColorType {
    if channels == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    }
}

/// Writes PNG, or binary PGM/PPM when the extension says so.
pub fn write_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    image::save_buffer_with_format(
        path,
        img.pixels(),
        img.width() as u32,
        img.height() as u32,
        color_type(img.channels()),
        format_for(path),
    )
    .map_err(|e| match codec(e) {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_channel(ch: &ChannelImage, path: impl AsRef<Path>) -> Result<()> {
    write_image(&RasterImage::from_gray(ch), path)
}

/// PNG-encodes into memory.
pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    image::write_buffer_with_format(
        &mut out,
        img.pixels(),
        img.width() as u32,
        img.height() as u32,
        color_type(img.channels()),
        ImageFormat::Png,
    )
    .map_err(codec)?;
    Ok(out.into_inner())
}

/// Writes a 1-bit grayscale PNG.
pub fn write_mask_png(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), mask.width() as u32, mask.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let mut writer = enc.write_header().map_err(|e| Error::Codec(e.to_string()))?;
    let stride = mask.width().div_ceil(8);
    let mut packed = vec![0u8; stride * mask.height()];
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                packed[y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    writer
        .write_image_data(&packed)
        .map_err(|e| Error::Codec(e.to_string()))?;
    writer.finish().map_err(|e| Error::Codec(e.to_string()))
}

/// Reads any grayscale/color image as a mask: nonzero luma is foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = read_image(path)?;
    let gray = crate::raster::to_grayscale(&img);
    BinaryMask::from_bytes(gray.width(), gray.height(), gray.values())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_pnm_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let img = RasterImage::new(3, 2, 3, (0..18).collect()).unwrap();
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            write_image(&img, &p).unwrap();
            assert_eq!(read_image(&p).unwrap(), img);
        }
        let gray = RasterImage::new(4, 2, 1, vec![0, 50, 100, 150, 200, 250, 1, 2]).unwrap();
        for name in ["g.png", "g.pgm"] {
            let p = dir.path().join(name);
            write_image(&gray, &p).unwrap();
            assert_eq!(read_image(&p).unwrap(), gray);
        }
    }

    #[test]
    fn one_bit_mask_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_fn(13, 5, |x, y| (x + y) % 3 == 0);
        let p = dir.path().join("m.png");
        write_mask_png(&m, &p).unwrap();
        assert_eq!(read_mask(&p).unwrap(), m);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_image("/definitely/not/here.png"), Err(Error::Io { .. })));
    }
}
