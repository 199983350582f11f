//! Seed-reproducible augmentation and dataset preparation for dermoscopy
//! lesion classification.
//!
//! * [`geometric`]: lesion-preserving, aspect-preserving crops and the eight
//!   right-angle rotation/flip symmetries.
//! * [`color`]: dataset color PCA and per-image principal-component shifts.
//! * [`warp`]: moment ellipse fit of the lesion mask and a five-point
//!   thin-plate-spline warp that stretches or shrinks the lesion axes.
//! * [`dataset`]: manifests, stratified folds, class balancing plans and
//!   materialization of augmented datasets.
//! * [`eval`]: committee averaging, ROC AUC and the two-AUC challenge score.
//!
//! Every random choice flows through [`rng::SeedContext`], keyed by a master
//! seed, the sample id and the operation name, so outputs do not depend on
//! processing order or worker count.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod color;
pub mod dataset;
pub mod eval;
pub mod geometric;
pub mod image;
pub mod linalg;
pub mod preview;
pub mod rng;
pub mod synth;
pub mod warp;

pub use color::{apply_color_shift, fit_color_pca, sample_color_shift, ColorPcaModel, ColorShift};
pub use geometric::{apply_crop, apply_d4, enumerate_d4, lesion_bbox, sample_crop, BBox, CropSpec, D4Element, Rotation};
pub use image::{load_image, load_mask, save_image, save_mask, ImageBuffer, SegMask};
pub use rng::{SampleRng, SeedContext};
pub use warp::{fit_ellipse, make_control_pair, solve_tps, tps_eval, warp_image, ControlPair, Ellipse, TpsTransform};
