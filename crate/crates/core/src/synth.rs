//! Synthetic dermoscopy-like samples for demos and tests.
//!
//! Each sample is a skin-toned background with a darker textured elliptical
//! lesion, plus the matching mask. Everything is drawn from the sample's
//! seed stream, so a dataset is reproducible from `(master_seed, id)`.

use crate::image::{ImageBuffer, SegMask};
use crate::rng::SeedContext;

/// Filled ellipse raster: pixel centers with `(u/a)^2 + (v/b)^2 <= 1`.
pub fn ellipse_mask(width: u32, height: u32, center: [f64; 2], a: f64, b: f64, theta: f64) -> SegMask {
    let (ct, st) = (theta.cos(), theta.sin());
    SegMask::from_fn(width, height, |x, y| {
        let dx = f64::from(x) - center[0];
        let dy = f64::from(y) - center[1];
        let u = dx * ct + dy * st;
        let v = -dx * st + dy * ct;
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    })
}

#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub image: ImageBuffer,
    pub mask: SegMask,
}

pub fn synthetic_lesion(width: u32, height: u32, seed: &SeedContext) -> SyntheticSample {
    let mut rng = seed.rng("synth");
    let short = f64::from(width.min(height));
    let a = rng.uniform(0.18, 0.32) * short;
    let b = a * rng.uniform(0.45, 0.9);
    let theta = rng.uniform(-1.5, 1.5);
    let margin = a + 2.0;
    let cx = rng.uniform(
        margin.min(f64::from(width) / 2.0),
        (f64::from(width) - margin).max(f64::from(width) / 2.0),
    );
    let cy = rng.uniform(
        margin.min(f64::from(height) / 2.0),
        (f64::from(height) - margin).max(f64::from(height) / 2.0),
    );
    let mask = ellipse_mask(width, height, [cx, cy], a, b, theta);

    let skin = [rng.uniform(190.0, 235.0), rng.uniform(140.0, 180.0), rng.uniform(120.0, 160.0)];
    let lesion = [rng.uniform(70.0, 130.0), rng.uniform(40.0, 80.0), rng.uniform(30.0, 70.0)];
    let freq = rng.uniform(0.15, 0.4);
    let image = ImageBuffer::from_fn(width, height, |x, y| {
        let noise = rng.uniform(-6.0, 6.0);
        let base = if mask.get(x, y) {
            let tex = 12.0 * (freq * f64::from(x)).sin() * (freq * f64::from(y)).cos();
            [lesion[0] + tex, lesion[1] + tex, lesion[2] + tex]
        } else {
            skin
        };
        base.map(|v| (v + noise).round().clamp(0.0, 255.0) as u8)
    });
    SyntheticSample { image, mask }
}
