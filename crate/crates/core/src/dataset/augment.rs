//! Per-sample augmentation steps that record exactly what they did.

use thiserror::Error;

use super::provenance::AugStep;
use crate::color::{apply_color_shift, sample_color_shift, ColorPcaModel, ColorShift};
use crate::geometric::{
    self, apply_crop, apply_d4, apply_d4_mask, crop_mask, lesion_bbox, sample_crop, CropSpec, D4Element, GeometryError,
};
use crate::image::{ImageBuffer, SegMask};
use crate::rng::SeedContext;
use crate::warp::{self, backward_transform, fit_ellipse, make_control_pair, warp_mask_with, warp_with, ControlPair, WarpError};

pub const D4_OP: &str = "d4";

#[derive(Debug, Error, PartialEq)]
pub enum AugError {
    #[error("operation needs a lesion mask")]
    MissingMask,
    #[error("color augmentation needs a PCA model")]
    MissingPcaModel,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Warp(#[from] WarpError),
}

/// An image with its optional lesion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: ImageBuffer,
    pub mask: Option<SegMask>,
}

impl Sample {
    pub fn new(image: ImageBuffer, mask: Option<SegMask>) -> Self {
        Self { image, mask }
    }

    fn require_mask(&self) -> Result<&SegMask, AugError> {
        self.mask.as_ref().ok_or(AugError::MissingMask)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpSettings {
    pub regularization: f64,
    pub max_frac: f64,
}

impl Default for WarpSettings {
    fn default() -> Self {
        Self {
            regularization: 0.0,
            max_frac: warp::DEFAULT_MAX_FRAC,
        }
    }
}

fn crop_sample(s: &Sample, crop: &CropSpec) -> Result<Sample, AugError> {
    Ok(Sample {
        image: apply_crop(&s.image, crop)?,
        mask: s.mask.as_ref().map(|m| crop_mask(m, crop)).transpose()?,
    })
}

fn d4_sample(s: &Sample, g: D4Element) -> Sample {
    Sample {
        image: apply_d4(&s.image, g),
        mask: s.mask.as_ref().map(|m| apply_d4_mask(m, g)),
    }
}

fn warp_sample(s: &Sample, pair: &ControlPair, reg: f64) -> Result<Sample, AugError> {
    let back = backward_transform(pair, reg)?;
    Ok(Sample {
        image: warp_with(&s.image, &back),
        mask: s.mask.as_ref().map(|m| warp_mask_with(m, &back)),
    })
}

pub fn random_crop(s: &Sample, seed: &SeedContext) -> Result<(Sample, AugStep), AugError> {
    let mask = s.require_mask()?;
    let lesion = lesion_bbox(mask)?;
    let crop = sample_crop(s.image.width(), s.image.height(), lesion, seed);
    Ok((crop_sample(s, &crop)?, AugStep::Crop(crop.region)))
}

pub fn d4(s: &Sample, g: D4Element) -> (Sample, AugStep) {
    (d4_sample(s, g), AugStep::D4(g))
}

/// Uniform over the seven non-identity elements.
pub fn random_nontrivial_d4(seed: &SeedContext) -> D4Element {
    let all = geometric::enumerate_d4();
    let k = seed.rng(D4_OP).below(7) as usize;
    all[1 + k]
}

pub fn random_color(s: &Sample, model: Option<&ColorPcaModel>, seed: &SeedContext) -> Result<(Sample, AugStep), AugError> {
    let model = model.ok_or(AugError::MissingPcaModel)?;
    let shift = sample_color_shift(model, seed);
    let out = Sample {
        image: apply_color_shift(&s.image, &shift),
        mask: s.mask.clone(),
    };
    Ok((
        out,
        AugStep::Color {
            alphas: shift.alphas,
            delta: shift.delta,
        },
    ))
}

/// Ellipse-axis warp. Lesions whose fitted semi-minor axis is under
/// [`warp::MIN_SEMI_MINOR`] are rejected with `DegenerateEllipse`.
pub fn random_warp(s: &Sample, seed: &SeedContext, settings: &WarpSettings) -> Result<(Sample, AugStep), AugError> {
    let mask = s.require_mask()?;
    let ellipse = fit_ellipse(mask)?;
    if ellipse.semi_minor < warp::MIN_SEMI_MINOR {
        return Err(WarpError::DegenerateEllipse(ellipse.semi_minor).into());
    }
    let pair = make_control_pair(&ellipse, seed, settings.max_frac);
    let out = warp_sample(s, &pair, settings.regularization)?;
    Ok((
        out,
        AugStep::Warp {
            regularization: settings.regularization,
            source: pair.source,
            target: pair.target,
            deltas: pair.deltas,
        },
    ))
}

/// Lesion-preserving crop (when a mask exists) followed by a random
/// non-identity rotation/flip.
pub fn random_geometric(s: &Sample, seed: &SeedContext) -> Result<(Sample, Vec<AugStep>), AugError> {
    let mut steps = Vec::with_capacity(2);
    let cropped = if s.mask.is_some() {
        let (c, step) = random_crop(s, seed)?;
        steps.push(step);
        c
    } else {
        s.clone()
    };
    let (out, step) = d4(&cropped, random_nontrivial_d4(seed));
    steps.push(step);
    Ok((out, steps))
}

/// Re-applies recorded steps without drawing any random numbers.
pub fn replay(s: &Sample, steps: &[AugStep]) -> Result<Sample, AugError> {
    let mut cur = s.clone();
    for step in steps {
        cur = match step {
            AugStep::Crop(region) => crop_sample(&cur, &CropSpec { region: *region })?,
            AugStep::D4(g) => d4_sample(&cur, *g),
            AugStep::Color { alphas, delta } => Sample {
                image: apply_color_shift(
                    &cur.image,
                    &ColorShift {
                        delta: *delta,
                        alphas: *alphas,
                    },
                ),
                mask: cur.mask.clone(),
            },
            AugStep::Warp {
                regularization,
                source,
                target,
                deltas,
            } => {
                let pair = ControlPair {
                    source: source.clone(),
                    target: target.clone(),
                    deltas: deltas.clone(),
                };
                warp_sample(&cur, &pair, *regularization)?
            }
        };
    }
    Ok(cur)
}
