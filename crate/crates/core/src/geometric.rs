//! Lesion-preserving crops and the eight rotation/flip symmetries.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{ImageBuffer, SegMask};
use crate::rng::SeedContext;

pub const CROP_OP: &str = "crop";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("mask has no lesion pixels")]
    EmptyMask,
    #[error("region {region} exceeds {width}x{height} frame")]
    OutOfBounds { region: BBox, width: u32, height: u32 },
}

/// Axis-aligned box; `(x0, y0)` is the inclusive top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, w: u32, h: u32) -> Self {
        Self { x0, y0, w, h }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::new(0, 0, width, height)
    }

    /// Exclusive right edge.
    pub fn x1(&self) -> u32 {
        self.x0 + self.w
    }

    /// Exclusive bottom edge.
    pub fn y1(&self) -> u32 {
        self.y0 + self.h
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && other.x1() <= self.x1() && other.y1() <= self.y1()
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.w >= 1 && self.h >= 1 && self.x1() <= width && self.y1() <= height
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{} {}x{}]", self.x0, self.y0, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropSpec {
    pub region: BBox,
}

/// Tightest box around the lesion pixels.
pub fn lesion_bbox(mask: &SegMask) -> Result<BBox, GeometryError> {
    let mut pts = mask.true_points();
    let (fx, fy) = pts.next().ok_or(GeometryError::EmptyMask)?;
    let (mut x0, mut y0, mut x1, mut y1) = (fx, fy, fx, fy);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    Ok(BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

/// Draws a random window with the image's aspect ratio that contains `lesion`.
///
/// The scale `s` is uniform on `[s_min, 1]` with
/// `s_min = max(lesion.w / img_w, lesion.h / img_h)`; the window is
/// `round(s * img_w) x round(s * img_h)` and its position is uniform over
/// every integer placement that keeps the lesion inside.
pub fn sample_crop(img_w: u32, img_h: u32, lesion: BBox, seed: &SeedContext) -> CropSpec {
    assert!(lesion.fits_in(img_w, img_h), "lesion {lesion} does not fit in {img_w}x{img_h}");
    let mut rng = seed.rng(CROP_OP);
    let (wf, hf) = (f64::from(img_w), f64::from(img_h));
    let s_min = (f64::from(lesion.w) / wf).max(f64::from(lesion.h) / hf);
    let s = rng.uniform(s_min, 1.0);
    let cw = ((s * wf).round() as u32).clamp(lesion.w, img_w);
    let ch = ((s * hf).round() as u32).clamp(lesion.h, img_h);

    let x_lo = lesion.x1().saturating_sub(cw);
    let x_hi = lesion.x0.min(img_w - cw);
    let y_lo = lesion.y1().saturating_sub(ch);
    let y_hi = lesion.y0.min(img_h - ch);
    let x0 = rng.range_inclusive(u64::from(x_lo), u64::from(x_hi)) as u32;
    let y0 = rng.range_inclusive(u64::from(y_lo), u64::from(y_hi)) as u32;
    CropSpec {
        region: BBox::new(x0, y0, cw, ch),
    }
}

fn crop_slice<T: Copy>(data: &[T], width: u32, r: &BBox) -> Vec<T> {
    let w = width as usize;
    let mut out = Vec::with_capacity(r.w as usize * r.h as usize);
    for y in r.y0..r.y1() {
        let row = y as usize * w;
        out.extend_from_slice(&data[row + r.x0 as usize..row + r.x1() as usize]);
    }
    out
}

/// Pixel-exact extraction of `crop.region`.
pub fn apply_crop(img: &ImageBuffer, crop: &CropSpec) -> Result<ImageBuffer, GeometryError> {
    let r = crop.region;
    if !r.fits_in(img.width(), img.height()) {
        return Err(GeometryError::OutOfBounds {
            region: r,
            width: img.width(),
            height: img.height(),
        });
    }
    let px = crop_slice(img.pixels(), img.width(), &r);
    Ok(ImageBuffer::new(r.w, r.h, px).expect("crop dimensions are consistent"))
}

pub fn crop_mask(mask: &SegMask, crop: &CropSpec) -> Result<SegMask, GeometryError> {
    let r = crop.region;
    if !r.fits_in(mask.width(), mask.height()) {
        return Err(GeometryError::OutOfBounds {
            region: r,
            width: mask.width(),
            height: mask.height(),
        });
    }
    let bits = crop_slice(mask.bits(), mask.width(), &r);
    Ok(SegMask::new(r.w, r.h, bits).expect("crop dimensions are consistent"))
}

/// Counter-clockwise quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u32 {
        self.quarter_turns() * 90
    }

    pub fn quarter_turns(self) -> u32 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 1,
            Rotation::R180 => 2,
            Rotation::R270 => 3,
        }
    }

    pub fn from_quarter_turns(q: u32) -> Self {
        Self::ALL[(q % 4) as usize]
    }

    pub fn from_degrees(deg: u32) -> Option<Self> {
        (deg.is_multiple_of(90) && deg < 360).then(|| Self::from_quarter_turns(deg / 90))
    }
}

/// Element of the rectangle symmetry group in `(rotation, hflip)` normal form.
///
/// The action on an image is "flip horizontally (if `hflip`), then rotate
/// counter-clockwise by `rotation`". A vertical flip is `(R180, hflip)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct D4Element {
    pub rotation: Rotation,
    pub hflip: bool,
}

impl D4Element {
    pub const IDENTITY: D4Element = D4Element {
        rotation: Rotation::R0,
        hflip: false,
    };

    pub fn new(rotation: Rotation, hflip: bool) -> Self {
        Self { rotation, hflip }
    }

    pub fn vflip() -> Self {
        Self::new(Rotation::R180, true)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// `self.then(other)` acts as `self` first, then `other`.
    pub fn then(self, other: D4Element) -> D4Element {
        // F R^k = R^{-k} F, so (R^b F^g)(R^a F^f) = R^{b + (-1)^g a} F^{f+g}.
        let a = self.rotation.quarter_turns();
        let b = other.rotation.quarter_turns();
        let turns = if other.hflip { b + 4 - a } else { b + a };
        D4Element::new(Rotation::from_quarter_turns(turns), self.hflip ^ other.hflip)
    }

    pub fn inverse(self) -> D4Element {
        if self.hflip {
            self
        } else {
            D4Element::new(Rotation::from_quarter_turns(4 - self.rotation.quarter_turns()), false)
        }
    }

    /// Output dimensions for a `width x height` input.
    pub fn output_dims(&self, width: u32, height: u32) -> (u32, u32) {
        match self.rotation {
            Rotation::R90 | Rotation::R270 => (height, width),
            _ => (width, height),
        }
    }

    /// Source pixel feeding output pixel `(x, y)` of a `width x height` input.
    fn source_of(&self, x: u32, y: u32, width: u32, height: u32) -> (u32, u32) {
        // Undo the rotation (output -> flipped), then undo the flip.
        let (fx, fy) = match self.rotation {
            Rotation::R0 => (x, y),
            // CCW 90: flipped (u, v) lands at (v, width - 1 - u).
            Rotation::R90 => (width - 1 - y, x),
            Rotation::R180 => (width - 1 - x, height - 1 - y),
            Rotation::R270 => (y, height - 1 - x),
        };
        if self.hflip {
            (width - 1 - fx, fy)
        } else {
            (fx, fy)
        }
    }
}

impl fmt::Display for D4Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}{}", self.rotation.degrees(), if self.hflip { "_h" } else { "" })
    }
}

/// All eight elements, rotation-major then flip-minor; the identity is first.
pub fn enumerate_d4() -> Vec<D4Element> {
    Rotation::ALL
        .iter()
        .flat_map(|&r| [false, true].map(|h| D4Element::new(r, h)))
        .collect()
}

fn d4_slice<T: Copy>(data: &[T], width: u32, height: u32, g: D4Element) -> (u32, u32, Vec<T>) {
    let (ow, oh) = g.output_dims(width, height);
    let mut out = Vec::with_capacity(data.len());
    for y in 0..oh {
        for x in 0..ow {
            let (sx, sy) = g.source_of(x, y, width, height);
            out.push(data[sy as usize * width as usize + sx as usize]);
        }
    }
    (ow, oh, out)
}

pub fn apply_d4(img: &ImageBuffer, g: D4Element) -> ImageBuffer {
    let (w, h, px) = d4_slice(img.pixels(), img.width(), img.height(), g);
    ImageBuffer::new(w, h, px).expect("permutation preserves size")
}

pub fn apply_d4_mask(mask: &SegMask, g: D4Element) -> SegMask {
    let (w, h, bits) = d4_slice(mask.bits(), mask.width(), mask.height(), g);
    SegMask::new(w, h, bits).expect("permutation preserves size")
}
