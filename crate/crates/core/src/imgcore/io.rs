//! 8-bit PNG reading and writing.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::imgcore::{ColorImage, ImagePlane};

/// Reads an 8-bit RGB(A) or grayscale PNG. Grayscale files are replicated
/// into three identical planes; alpha is dropped.
pub fn read_image(path: impl AsRef<Path>) -> Result<ColorImage> {
    let path = path.as_ref();
    let img = decode(path)?;
    match img.color() {
        ColorType::L8 | ColorType::La8 => {
            let g = img.to_luma8();
            let (w, h) = g.dimensions();
            let plane = ImagePlane::from_vec(
                w as usize,
                h as usize,
                g.into_raw().into_iter().map(f64::from).collect(),
            )?;
            Ok(ColorImage::from_gray(plane))
        }
        ColorType::Rgb8 | ColorType::Rgba8 => {
            let rgb = img.to_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            let raw = rgb.into_raw();
            let channel = |c: usize| {
                ImagePlane::from_vec(w, h, raw.iter().skip(c).step_by(3).map(|&v| f64::from(v)).collect())
            };
            ColorImage::from_planes(channel(0)?, channel(1)?, channel(2)?)
        }
        other => Err(Error::format(
            path,
            format!("unsupported pixel format {other:?}; only 8-bit gray or RGB is accepted"),
        )),
    }
}

/// Reads a PNG and returns its luminance.
pub fn read_gray(path: impl AsRef<Path>) -> Result<ImagePlane> {
    Ok(read_image(path)?.to_grayscale())
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader
        .decode()
        .map_err(|e| Error::format(path, e.to_string()))
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Writes an RGB PNG, rounding and clamping to 8 bits.
pub fn write_image(path: impl AsRef<Path>, img: &ColorImage) -> Result<()> {
    let (w, h) = img.dims();
    let [r, g, b] = img.planes();
    let mut buf = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        buf.push(quantize(r.data()[i]));
        buf.push(quantize(g.data()[i]));
        buf.push(quantize(b.data()[i]));
    }
    save_atomic(path.as_ref(), &buf, w, h, image::ExtendedColorType::Rgb8)
}

/// Writes a single plane as an 8-bit grayscale PNG.
pub fn write_gray(path: impl AsRef<Path>, img: &ImagePlane) -> Result<()> {
    let buf: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    save_atomic(
        path.as_ref(),
        &buf,
        img.width(),
        img.height(),
        image::ExtendedColorType::L8,
    )
}

fn save_atomic(
    path: &Path,
    buf: &[u8],
    w: usize,
    h: usize,
    color: image::ExtendedColorType,
) -> Result<()> {
    write_atomic_with(path, |tmp| {
        image::save_buffer_with_format(tmp, buf, w as u32, h as u32, color, ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::format(path, other.to_string()),
            })
    })
}

/// Writes through a sibling temporary file and renames it into place so a
/// failed write never leaves a partial file at `path`.
pub fn write_atomic_with(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = temp_sibling(path);
    let result = write(&tmp).and_then(|()| fs::rename(&tmp, path).map_err(|e| Error::io(path, e)));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Atomic write of an in-memory byte buffer.
pub fn write_bytes_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    write_atomic_with(path, |tmp| fs::write(tmp, bytes).map_err(|e| Error::io(path, e)))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_owned());
    path.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        let plane = ImagePlane::from_vec(2, 2, vec![0.0, 64.0, 128.0, 255.0]).unwrap();
        write_gray(&p, &plane).unwrap();
        let back = read_image(&p).unwrap();
        for c in 0..3 {
            assert_eq!(back.plane(c), &plane);
        }
    }

    #[test]
    fn rgb_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let mk = |o: usize| ImagePlane::from_fn(5, 3, |x, y| ((x * 40 + y * 70 + o) % 256) as f64);
        let img = ColorImage::from_planes(mk(0), mk(11), mk(99)).unwrap();
        write_image(&p, &img).unwrap();
        assert_eq!(read_image(&p).unwrap(), img);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.png");
        let img = ColorImage::from_gray(ImagePlane::from_fn(32, 32, |x, y| ((x ^ y) * 8 % 256) as f64));
        write_image(&p, &img).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(read_image(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn sixteen_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.png");
        let buf: Vec<u16> = vec![0, 1000, 40000, 65535];
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 2, buf)
            .unwrap()
            .save(&p)
            .unwrap();
        let err = read_image(&p).unwrap_err();
        assert!(err.to_string().contains("unsupported pixel format"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error_naming_path() {
        let err = read_image("/nonexistent/frame.png").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/frame.png"));
        assert!(err.is_validation());
    }
}
