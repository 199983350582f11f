//! Raster types and image/mask file IO.
//!
//! Supported files are 8-bit PNG (gray or RGB) and binary PNM (`P6` RGB,
//! `P5` gray, maxval 255). Gray inputs are replicated to three channels when
//! loaded as images. Masks are thresholded at 128.

use std::fs;
use std::io::{self, Cursor};
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};
use thiserror::Error;

/// Mask threshold: a stored value `>= MASK_THRESHOLD` is lesion.
pub const MASK_THRESHOLD: u8 = 128;

pub type Rgb = [u8; 3];

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("file not found: {0}")]
    NotFound(String),
    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedFormat { path: String, reason: String },
    #[error("corrupt or truncated image {path}: {reason}")]
    CorruptHeader { path: String, reason: String },
    #[error("image and mask dimensions differ: {image_w}x{image_h} vs {mask_w}x{mask_h}")]
    DimensionMismatch {
        image_w: u32,
        image_h: u32,
        mask_w: u32,
        mask_h: u32,
    },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self, ImageIoError> {
        if width == 0 || height == 0 {
            return Err(ImageIoError::InvalidRaster(format!("zero dimension {width}x{height}")));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(ImageIoError::InvalidRaster(format!("{} pixels for {width}x{height}", pixels.len())));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, value: Rgb) -> Self {
        assert!(width > 0 && height > 0, "zero dimension");
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb) -> Self {
        assert!(width > 0 && height > 0, "zero dimension");
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.pixels
    }

    /// Pixel at column `x`, row `y`.
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: Rgb) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = value;
    }

    pub fn same_size_as(&self, mask: &SegMask) -> bool {
        self.width == mask.width() && self.height == mask.height()
    }

    /// Fails with `DimensionMismatch` unless `mask` has this image's size.
    pub fn check_pair(&self, mask: &SegMask) -> Result<(), ImageIoError> {
        if self.same_size_as(mask) {
            Ok(())
        } else {
            Err(ImageIoError::DimensionMismatch {
                image_w: self.width,
                image_h: self.height,
                mask_w: mask.width(),
                mask_h: mask.height(),
            })
        }
    }
}

/// Binary lesion mask, row-major, `true` = lesion.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl SegMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, ImageIoError> {
        if width == 0 || height == 0 || bits.len() != width as usize * height as usize {
            return Err(ImageIoError::InvalidRaster(format!("{} bits for {width}x{height}", bits.len())));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "zero dimension");
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        assert!(width > 0 && height > 0, "zero dimension");
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Coordinates `(x, y)` of every lesion pixel in row-major order.
    pub fn true_points(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, ImageIoError> {
    fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ImageIoError::NotFound(path_str(path)),
        _ => ImageIoError::Io {
            path: path_str(path),
            source: e,
        },
    })
}

fn decode(path: &Path) -> Result<DynamicImage, ImageIoError> {
    let bytes = read_bytes(path)?;
    let reader = ImageReader::new(Cursor::new(&bytes))
        .with_guessed_format()
        .map_err(|e| ImageIoError::Io {
            path: path_str(path),
            source: e,
        })?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => {
            return Err(ImageIoError::UnsupportedFormat {
                path: path_str(path),
                reason: format!("{other:?} files are not supported"),
            })
        }
        None if bytes.len() < 8 => {
            return Err(ImageIoError::CorruptHeader {
                path: path_str(path),
                reason: format!("only {} bytes", bytes.len()),
            })
        }
        None => {
            return Err(ImageIoError::UnsupportedFormat {
                path: path_str(path),
                reason: "unrecognised magic bytes".into(),
            })
        }
    }
    reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => ImageIoError::UnsupportedFormat {
            path: path_str(path),
            reason: u.to_string(),
        },
        other => ImageIoError::CorruptHeader {
            path: path_str(path),
            reason: other.to_string(),
        },
    })
}

/// Loads an 8-bit RGB or gray PNG/PNM file. Gray is replicated to RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer, ImageIoError> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width(), img.height());
    let pixels: Vec<Rgb> = match img {
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| p.0).collect(),
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| [p.0[0]; 3]).collect(),
        other => return Err(unsupported_color(path, other.color())),
    };
    ImageBuffer::new(w, h, pixels)
}

/// Loads an 8-bit single-channel mask; a value `>= 128` is lesion.
pub fn load_mask(path: impl AsRef<Path>) -> Result<SegMask, ImageIoError> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width(), img.height());
    let bits = match img {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] >= MASK_THRESHOLD).collect(),
        other => return Err(unsupported_color(path, other.color())),
    };
    SegMask::new(w, h, bits)
}

fn unsupported_color(path: &Path, color: ColorType) -> ImageIoError {
    ImageIoError::UnsupportedFormat {
        path: path_str(path),
        reason: format!("color type {color:?}; need 8-bit gray or RGB"),
    }
}

fn output_format(path: &Path) -> ImageFormat {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ppm") | Some("pgm") | Some("pnm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    }
}

fn write_encoded(path: &Path, img: DynamicImage) -> Result<(), ImageIoError> {
    let format = output_format(path);
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), format).map_err(|e| ImageIoError::Io {
        path: path_str(path),
        source: io::Error::other(e),
    })?;
    fs::write(path, bytes).map_err(|e| ImageIoError::Io {
        path: path_str(path),
        source: e,
    })
}

/// Writes PNG, or binary PPM when the extension is `.ppm`/`.pnm`.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), ImageIoError> {
    let raw: Vec<u8> = img.pixels.iter().flatten().copied().collect();
    let buf = image::RgbImage::from_raw(img.width, img.height, raw).expect("buffer length matches dimensions");
    write_encoded(path.as_ref(), DynamicImage::ImageRgb8(buf))
}

/// Writes a mask as an 8-bit gray file with values 0 / 255.
pub fn save_mask(mask: &SegMask, path: impl AsRef<Path>) -> Result<(), ImageIoError> {
    let raw: Vec<u8> = mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf = image::GrayImage::from_raw(mask.width, mask.height, raw).expect("buffer length matches dimensions");
    write_encoded(path.as_ref(), DynamicImage::ImageLuma8(buf))
}
