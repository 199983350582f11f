//! Dataset color PCA and per-image principal-component color shifts.
//!
//! Covariance and eigenvalues are computed on channel values scaled to
//! `[0, 1]`; the mean is kept in intensity units. A shift is
//! `delta = 255 * sum_i alpha_i * lambda_i * e_i` with one
//! `alpha_i ~ N(0, 0.2^2)` per component per image, so the step scales with
//! the eigenvalue itself rather than its square root.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{ImageBuffer, Rgb};
use crate::linalg::{self, Mat3, Vec3};
use crate::rng::SeedContext;

pub const COLOR_OP: &str = "color";
/// Standard deviation of the per-component Gaussian factor.
pub const ALPHA_STD: f64 = 0.2;
/// Channel scale used for the covariance (values divided by this).
pub const INTENSITY_SCALE: f64 = 255.0;

#[derive(Debug, Error)]
pub enum ColorError {
    #[error("need at least 2 pixels to fit a color model, got {0}")]
    InsufficientPixels(u64),
    #[error("malformed color model file, line {line}: {reason}")]
    BadModelFile { line: usize, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Single-pass mean/covariance of 3-vectors (Welford, with Chan's merge).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CovarianceAccumulator {
    count: u64,
    mean: Vec3,
    /// Co-moment sums `sum (x_i - mean)(x_j - mean)`, upper triangle used.
    comoment: Mat3,
}

impl CovarianceAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Vec3 {
        self.mean
    }

    pub fn push(&mut self, x: Vec3) {
        self.count += 1;
        let n = self.count as f64;
        let d_old = [x[0] - self.mean[0], x[1] - self.mean[1], x[2] - self.mean[2]];
        for k in 0..3 {
            self.mean[k] += d_old[k] / n;
        }
        let d_new = [x[0] - self.mean[0], x[1] - self.mean[1], x[2] - self.mean[2]];
        for i in 0..3 {
            for j in i..3 {
                self.comoment[i][j] += d_old[i] * d_new[j];
            }
        }
    }

    pub fn push_rgb(&mut self, p: Rgb) {
        self.push([
            f64::from(p[0]) / INTENSITY_SCALE,
            f64::from(p[1]) / INTENSITY_SCALE,
            f64::from(p[2]) / INTENSITY_SCALE,
        ]);
    }

    /// Adds every `stride`-th pixel of `img` in row-major order.
    pub fn push_image(&mut self, img: &ImageBuffer, stride: usize) {
        for &p in img.pixels().iter().step_by(stride.max(1)) {
            self.push_rgb(p);
        }
    }

    /// Combines two partial accumulators (order matters only at rounding level).
    pub fn merge(&mut self, other: &CovarianceAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = [
            other.mean[0] - self.mean[0],
            other.mean[1] - self.mean[1],
            other.mean[2] - self.mean[2],
        ];
        for i in 0..3 {
            for j in i..3 {
                self.comoment[i][j] += other.comoment[i][j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for k in 0..3 {
            self.mean[k] += delta[k] * nb / n;
        }
        self.count += other.count;
    }

    /// Population covariance (divides by `n`).
    pub fn covariance(&self) -> Mat3 {
        let n = self.count.max(1) as f64;
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                c[i][j] = self.comoment[i][j] / n;
                c[j][i] = c[i][j];
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorPcaModel {
    /// Channel means in intensity units.
    pub mean: Vec3,
    /// Descending, non-negative, in units of (intensity / 255)^2.
    pub eigenvalues: Vec3,
    pub eigenvectors: [Vec3; 3],
    pub pixel_count: u64,
}

impl ColorPcaModel {
    pub fn from_accumulator(acc: &CovarianceAccumulator) -> Result<Self, ColorError> {
        if acc.count() < 2 {
            return Err(ColorError::InsufficientPixels(acc.count()));
        }
        let cov = acc.covariance();
        let (mut lambda, vecs) = linalg::symmetric_eigen3(&cov);
        for l in lambda.iter_mut() {
            if *l < 0.0 {
                *l = 0.0;
            }
        }
        let m = acc.mean();
        Ok(Self {
            mean: [m[0] * INTENSITY_SCALE, m[1] * INTENSITY_SCALE, m[2] * INTENSITY_SCALE],
            eigenvalues: lambda,
            eigenvectors: vecs,
            pixel_count: acc.count(),
        })
    }

    /// `sum_i lambda_i e_i e_i^T`.
    pub fn reconstruct_covariance(&self) -> Mat3 {
        let mut c = [[0.0; 3]; 3];
        for (l, e) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] += l * e[i] * e[j];
                }
            }
        }
        c
    }

    /// Line-oriented text form with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = |x: f64| format!("{x:.16e}");
        let _ = writeln!(s, "mean {} {} {}", g(self.mean[0]), g(self.mean[1]), g(self.mean[2]));
        let l = &self.eigenvalues;
        let _ = writeln!(s, "lambda {} {} {}", g(l[0]), g(l[1]), g(l[2]));
        for (i, e) in self.eigenvectors.iter().enumerate() {
            let _ = writeln!(s, "evec {} {} {} {}", i + 1, g(e[0]), g(e[1]), g(e[2]));
        }
        let _ = writeln!(s, "pixels {}", self.pixel_count);
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ColorError> {
        let bad = |line: usize, reason: &str| ColorError::BadModelFile {
            line,
            reason: reason.to_string(),
        };
        let mut mean = None;
        let mut lambda = None;
        let mut evecs: [Option<Vec3>; 3] = [None; 3];
        let mut pixels = None;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let mut toks = raw.split_whitespace();
            let Some(key) = toks.next() else { continue };
            let rest: Vec<&str> = toks.collect();
            let floats = |xs: &[&str]| -> Result<Vec3, ColorError> {
                if xs.len() != 3 {
                    return Err(bad(lineno, "expected 3 numbers"));
                }
                let mut v = [0.0; 3];
                for (slot, t) in v.iter_mut().zip(xs) {
                    *slot = t.parse().map_err(|_| bad(lineno, "not a number"))?;
                }
                Ok(v)
            };
            match key {
                "mean" => mean = Some(floats(&rest)?),
                "lambda" => lambda = Some(floats(&rest)?),
                "evec" => {
                    let i: usize = rest
                        .first()
                        .and_then(|t| t.parse().ok())
                        .filter(|i| (1..=3).contains(i))
                        .ok_or_else(|| bad(lineno, "evec index must be 1..3"))?;
                    evecs[i - 1] = Some(floats(&rest[1..])?);
                }
                "pixels" => {
                    pixels = Some(
                        rest.first()
                            .filter(|_| rest.len() == 1)
                            .and_then(|t| t.parse::<u64>().ok())
                            .ok_or_else(|| bad(lineno, "pixels needs one integer"))?,
                    )
                }
                other => return Err(bad(lineno, &format!("unknown key {other:?}"))),
            }
        }
        let end = text.lines().count();
        let [e1, e2, e3] = evecs;
        Ok(Self {
            mean: mean.ok_or_else(|| bad(end, "missing mean"))?,
            eigenvalues: lambda.ok_or_else(|| bad(end, "missing lambda"))?,
            eigenvectors: [
                e1.ok_or_else(|| bad(end, "missing evec 1"))?,
                e2.ok_or_else(|| bad(end, "missing evec 2"))?,
                e3.ok_or_else(|| bad(end, "missing evec 3"))?,
            ],
            pixel_count: pixels.ok_or_else(|| bad(end, "missing pixels"))?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ColorError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| ColorError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ColorError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ColorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }
}

/// Fits the model from a stream of pixels in one pass.
pub fn fit_color_pca(pixels: impl IntoIterator<Item = Rgb>) -> Result<ColorPcaModel, ColorError> {
    let mut acc = CovarianceAccumulator::new();
    for p in pixels {
        acc.push_rgb(p);
    }
    ColorPcaModel::from_accumulator(&acc)
}

/// Fits from a set of images by accumulating each image separately and
/// merging in the given order. Callers sort by sample id for reproducibility.
pub fn fit_color_pca_images<'a>(images: impl IntoIterator<Item = &'a ImageBuffer>, stride: usize) -> Result<ColorPcaModel, ColorError> {
    let mut total = CovarianceAccumulator::new();
    for img in images {
        let mut part = CovarianceAccumulator::new();
        part.push_image(img, stride);
        total.merge(&part);
    }
    ColorPcaModel::from_accumulator(&total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorShift {
    /// Offset in intensity units added to every pixel.
    pub delta: Vec3,
    pub alphas: Vec3,
}

impl ColorShift {
    pub fn from_alphas(model: &ColorPcaModel, alphas: Vec3) -> Self {
        let mut delta = [0.0; 3];
        for i in 0..3 {
            let w = alphas[i] * model.eigenvalues[i];
            for k in 0..3 {
                delta[k] += w * model.eigenvectors[i][k];
            }
        }
        for d in delta.iter_mut() {
            *d *= INTENSITY_SCALE;
        }
        Self { delta, alphas }
    }
}

pub fn sample_color_shift(model: &ColorPcaModel, seed: &SeedContext) -> ColorShift {
    let mut rng = seed.rng(COLOR_OP);
    let alphas = [rng.normal(0.0, ALPHA_STD), rng.normal(0.0, ALPHA_STD), rng.normal(0.0, ALPHA_STD)];
    ColorShift::from_alphas(model, alphas)
}

/// `clamp(round(p + delta), 0, 255)` per channel; rounding is half away from zero.
pub fn apply_color_shift(img: &ImageBuffer, shift: &ColorShift) -> ImageBuffer {
    let d = shift.delta;
    let px = img
        .pixels()
        .iter()
        .map(|p| {
            let mut out = [0u8; 3];
            for k in 0..3 {
                out[k] = (f64::from(p[k]) + d[k]).round().clamp(0.0, 255.0) as u8;
            }
            out
        })
        .collect();
    ImageBuffer::new(img.width(), img.height(), px).expect("same shape")
}
