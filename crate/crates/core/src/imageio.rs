//! Image ingestion: PNG / binary PPM decoding, bilinear resize, and
//! per-channel normalization into a CHW tensor.

use std::io::Write;
use std::path::Path;

use image::ImageFormat;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// RGB image with values in `[0, 1]`, row-major HWC.
#[derive(Debug, Clone, PartialEq)]
pub struct InputImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl InputImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::Geometry(format!(
                "{width}x{height} RGB image needs {} values, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Geometry(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        let pixels = std::iter::repeat_n(rgb, width * height).flatten().collect();
        Self::new(width, height, pixels)
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            bytes.iter().map(|&b| f32::from(b) / 255.0).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb.map(|v| v.clamp(0.0, 1.0)));
    }

    /// Per-channel mean over all pixels.
    pub fn channel_means(&self) -> [f32; 3] {
        let mut sums = [0f64; 3];
        for px in self.pixels.chunks_exact(3) {
            for (s, &v) in sums.iter_mut().zip(px) {
                *s += f64::from(v);
            }
        }
        let n = (self.width * self.height) as f64;
        sums.map(|s| (s / n) as f32)
    }

    /// Quantizes to 8-bit RGB, rounding to nearest.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<InputImage> {
    let format = if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        ImageFormat::Png
    } else if bytes.starts_with(b"P6") {
        ImageFormat::Pnm
    } else {
        let head: String = bytes
            .iter()
            .take(4)
            .map(|b| {
                if b.is_ascii_graphic() {
                    *b as char
                } else {
                    '.'
                }
            })
            .collect();
        return Err(Error::UnsupportedFormat(format!(
            "expected PNG or binary PPM (P6), header {head:?}"
        )));
    };
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    InputImage::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<InputImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Decode(msg) => Error::Decode(format!("{}: {msg}", path.display())),
        Error::UnsupportedFormat(msg) => {
            Error::UnsupportedFormat(format!("{}: {msg}", path.display()))
        }
        other => other,
    })
}

pub fn encode_ppm(img: &InputImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.to_rgb8());
    out
}

/// Writes PNG when the extension is `.png`, binary PPM otherwise.
pub fn save_image(img: &InputImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        image::save_buffer_with_format(
            path,
            &img.to_rgb8(),
            img.width as u32,
            img.height as u32,
            image::ExtendedColorType::Rgb8,
            ImageFormat::Png,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Decode(other.to_string()),
        })
    } else {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&encode_ppm(img))
            .map_err(|e| Error::io(path, e))
    }
}

/// Bilinear resize with half-pixel centers: output pixel `x` samples source
/// coordinate `(x + 0.5) * in / out - 0.5`, clamped to the image.
pub fn resize_bilinear(img: &InputImage, width: usize, height: usize) -> Result<InputImage> {
    if width == 0 || height == 0 {
        return Err(Error::Geometry(format!("resize target {width}x{height}")));
    }
    if width == img.width && height == img.height {
        return Ok(img.clone());
    }
    let xs = sample_axis(img.width, width);
    let ys = sample_axis(img.height, height);
    let mut pixels = Vec::with_capacity(width * height * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = img.pixel(x0, y0);
            let p01 = img.pixel(x1, y0);
            let p10 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            for c in 0..3 {
                let top = p00[c] + (p01[c] - p00[c]) * fx;
                let bottom = p10[c] + (p11[c] - p10[c]) * fx;
                pixels.push((top + (bottom - top) * fy).clamp(0.0, 1.0));
            }
        }
    }
    InputImage::new(width, height, pixels)
}

fn sample_axis(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, (s - i0 as f64) as f32)
        })
        .collect()
}

/// Per-channel affine normalization constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Normalization {
    pub const IMAGENET: Self = Self {
        mean: [0.485, 0.456, 0.406],
        std: [0.229, 0.224, 0.225],
    };

    pub const IDENTITY: Self = Self {
        mean: [0.0; 3],
        std: [1.0; 3],
    };

    pub fn new(mean: [f32; 3], std: [f32; 3]) -> Result<Self> {
        if let Some(s) = std
            .iter()
            .find(|s| s.partial_cmp(&&0.0) != Some(std::cmp::Ordering::Greater) || !s.is_finite())
        {
            return Err(Error::InvalidNormalization(format!(
                "std components must be positive, got {s}"
            )));
        }
        Ok(Self { mean, std })
    }
}

impl Default for Normalization {
    fn default() -> Self {
        Self::IMAGENET
    }
}

/// `(x - mean) / std` per channel, laid out CHW.
pub fn normalize(img: &InputImage, norm: &Normalization) -> Result<Tensor> {
    let norm = Normalization::new(norm.mean, norm.std)?;
    let plane = img.width * img.height;
    let mut data = vec![0.0f32; plane * 3];
    for (i, px) in img.pixels.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = (px[c] - norm.mean[c]) / norm.std[c];
        }
    }
    Tensor::new(vec![3, img.height, img.width], data)
}

/// Inverse of [`normalize`].
pub fn denormalize(t: &Tensor, norm: &Normalization) -> Result<InputImage> {
    let &[3, h, w] = t.shape() else {
        return Err(Error::Geometry(format!(
            "expected [3, H, W], got {:?}",
            t.shape()
        )));
    };
    let plane = h * w;
    let mut pixels = vec![0.0f32; plane * 3];
    for c in 0..3 {
        for i in 0..plane {
            let v = t.data()[c * plane + i] * norm.std[c] + norm.mean[c];
            pixels[i * 3 + c] = v.clamp(0.0, 1.0);
        }
    }
    InputImage::new(w, h, pixels)
}
