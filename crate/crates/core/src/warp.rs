//! Lesion-axis distortion: moment ellipse fit, endpoint perturbation and
//! thin-plate-spline warping.
//!
//! Coordinates are `(x, y)` = (column, row) with pixel centers at integer
//! positions. The spline kernel is `U(r) = r^2 ln(r^2)` with `U(0) = 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{ImageBuffer, SegMask};
use crate::linalg::LuFactors;
use crate::rng::SeedContext;

pub const WARP_OP: &str = "warp";
/// Default bound on the relative change of each semi-axis.
pub const DEFAULT_MAX_FRAC: f64 = 0.2;
/// Ellipses with a smaller semi-minor axis are not warped.
pub const MIN_SEMI_MINOR: f64 = 2.0;

const SINGULAR_REL_TOL: f64 = 1e-12;

pub type Point = [f64; 2];

#[derive(Debug, Error, PartialEq)]
pub enum WarpError {
    #[error("mask has no lesion pixels")]
    EmptyMask,
    #[error("lesion support is degenerate (collinear or a single point)")]
    DegenerateMask,
    #[error("thin-plate-spline system is singular (duplicate or collinear control points)")]
    SingularSystem,
    #[error("control point count mismatch: {0} sources, {1} targets")]
    PointCountMismatch(usize, usize),
    #[error("semi-minor axis {0:.3} px is below the {MIN_SEMI_MINOR} px warp limit")]
    DegenerateEllipse(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Point,
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Major-axis angle from the +x axis, in `[-pi/2, pi/2)`.
    pub theta: f64,
}

impl Ellipse {
    pub fn major_dir(&self) -> Point {
        [self.theta.cos(), self.theta.sin()]
    }

    pub fn minor_dir(&self) -> Point {
        [-self.theta.sin(), self.theta.cos()]
    }

    /// Center followed by the major then minor axis endpoints.
    pub fn control_points(&self) -> [Point; 5] {
        let [cx, cy] = self.center;
        let [ux, uy] = self.major_dir();
        let [vx, vy] = self.minor_dir();
        let (a, b) = (self.semi_major, self.semi_minor);
        [
            [cx, cy],
            [cx + a * ux, cy + a * uy],
            [cx - a * ux, cy - a * uy],
            [cx + b * vx, cy + b * vy],
            [cx - b * vx, cy - b * vy],
        ]
    }
}

/// Second-moment ellipse of the lesion pixels, semi-axes at two standard
/// deviations.
pub fn fit_ellipse(mask: &SegMask) -> Result<Ellipse, WarpError> {
    let mut n = 0u64;
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for (x, y) in mask.true_points() {
        n += 1;
        sx += f64::from(x);
        sy += f64::from(y);
    }
    if n == 0 {
        return Err(WarpError::EmptyMask);
    }
    if n < 3 {
        return Err(WarpError::DegenerateMask);
    }
    let nf = n as f64;
    let (cx, cy) = (sx / nf, sy / nf);
    let (mut m20, mut m02, mut m11) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in mask.true_points() {
        let dx = f64::from(x) - cx;
        let dy = f64::from(y) - cy;
        m20 += dx * dx;
        m02 += dy * dy;
        m11 += dx * dy;
    }
    let tie_tol = 1e-9 * nf;
    let theta = if (m20 - m02).abs() < tie_tol && m11.abs() < tie_tol {
        0.0
    } else {
        let t = 0.5 * (2.0 * m11).atan2(m20 - m02);
        if t >= FRAC_PI_2 {
            t - PI
        } else {
            t
        }
    };
    let (m20, m02, m11) = (m20 / nf, m02 / nf, m11 / nf);
    let half_tr = 0.5 * (m20 + m02);
    let disc = (0.25 * (m20 - m02) * (m20 - m02) + m11 * m11).sqrt();
    let l_max = half_tr + disc;
    let l_min = (half_tr - disc).max(0.0);
    if l_min <= 1e-9 * l_max.max(1.0) {
        return Err(WarpError::DegenerateMask);
    }
    Ok(Ellipse {
        center: [cx, cy],
        semi_major: 2.0 * l_max.sqrt(),
        semi_minor: 2.0 * l_min.sqrt(),
        theta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPair {
    pub source: Vec<Point>,
    pub target: Vec<Point>,
    /// Relative change applied to each endpoint (empty for hand-built pairs).
    pub deltas: Vec<f64>,
}

/// Moves each of the four axis endpoints along its own ray from the center
/// by a factor `1 + d`, `d` uniform on `[-max_frac, max_frac]`, independently.
pub fn make_control_pair(e: &Ellipse, seed: &SeedContext, max_frac: f64) -> ControlPair {
    let mut rng = seed.rng(WARP_OP);
    let source = e.control_points();
    let c = source[0];
    let mut target = vec![c];
    let mut deltas = Vec::with_capacity(4);
    for p in &source[1..] {
        let d = rng.uniform(-max_frac, max_frac);
        let f = 1.0 + d;
        target.push([c[0] + f * (p[0] - c[0]), c[1] + f * (p[1] - c[1])]);
        deltas.push(d);
    }
    ControlPair {
        source: source.to_vec(),
        target,
        deltas,
    }
}

#[inline]
pub fn tps_kernel(r2: f64) -> f64 {
    if r2 == 0.0 {
        0.0
    } else {
        r2 * r2.ln()
    }
}

/// Plane-to-plane thin-plate spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpsTransform {
    pub control_src: Vec<Point>,
    /// `(a1, ax, ay)` for the output x and y coordinates.
    pub affine: [[f64; 3]; 2],
    /// Radial weights per control point for output x and y.
    pub weights: [Vec<f64>; 2],
    pub regularization: f64,
}

impl TpsTransform {
    pub fn eval(&self, p: Point) -> Point {
        tps_eval(self, p)
    }

    /// `(sum w, sum w x, sum w y)` for each output coordinate.
    pub fn side_conditions(&self) -> [[f64; 3]; 2] {
        let mut out = [[0.0; 3]; 2];
        for (d, w) in self.weights.iter().enumerate() {
            for (wi, s) in w.iter().zip(&self.control_src) {
                out[d][0] += wi;
                out[d][1] += wi * s[0];
                out[d][2] += wi * s[1];
            }
        }
        out
    }
}

/// Solves the bordered system `[[K + rI, P], [P^T, 0]] [w; a] = [v; 0]` for
/// each output coordinate, mapping `src[i]` to `dst[i]`.
pub fn solve_tps_points(src: &[Point], dst: &[Point], regularization: f64) -> Result<TpsTransform, WarpError> {
    if src.len() != dst.len() {
        return Err(WarpError::PointCountMismatch(src.len(), dst.len()));
    }
    let n = src.len();
    if n < 3 {
        return Err(WarpError::SingularSystem);
    }
    let m = n + 3;
    let mut a = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let dx = src[i][0] - src[j][0];
            let dy = src[i][1] - src[j][1];
            a[i * m + j] = tps_kernel(dx * dx + dy * dy);
        }
        a[i * m + i] += regularization;
        let p = [1.0, src[i][0], src[i][1]];
        for k in 0..3 {
            a[i * m + n + k] = p[k];
            a[(n + k) * m + i] = p[k];
        }
    }
    let lu = LuFactors::factor(m, &a, SINGULAR_REL_TOL).map_err(|_| WarpError::SingularSystem)?;
    let mut weights: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut affine = [[0.0; 3]; 2];
    for d in 0..2 {
        let mut rhs = vec![0.0; m];
        for i in 0..n {
            rhs[i] = dst[i][d];
        }
        let sol = lu.solve(&rhs);
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(WarpError::SingularSystem);
        }
        weights[d] = sol[..n].to_vec();
        affine[d] = [sol[n], sol[n + 1], sol[n + 2]];
    }
    Ok(TpsTransform {
        control_src: src.to_vec(),
        affine,
        weights,
        regularization,
    })
}

/// Spline taking `pair.source` to `pair.target`.
pub fn solve_tps(pair: &ControlPair, regularization: f64) -> Result<TpsTransform, WarpError> {
    solve_tps_points(&pair.source, &pair.target, regularization)
}

pub fn tps_eval(t: &TpsTransform, p: Point) -> Point {
    let mut out = [0.0; 2];
    for d in 0..2 {
        let [a1, ax, ay] = t.affine[d];
        let mut v = a1 + ax * p[0] + ay * p[1];
        for (w, s) in t.weights[d].iter().zip(&t.control_src) {
            let dx = p[0] - s[0];
            let dy = p[1] - s[1];
            v += w * tps_kernel(dx * dx + dy * dy);
        }
        out[d] = v;
    }
    out
}

/// Bilinear sample at `(x, y)`, coordinates clamped to the frame first.
pub fn sample_bilinear(img: &ImageBuffer, x: f64, y: f64) -> [f64; 3] {
    let max_x = f64::from(img.width() - 1);
    let max_y = f64::from(img.height() - 1);
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, max_x) };
    let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, max_y) };
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = x - f64::from(x0);
    let fy = y - f64::from(y0);
    let (p00, p10, p01, p11) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut out = [0.0; 3];
    for k in 0..3 {
        let top = f64::from(p00[k]) * (1.0 - fx) + f64::from(p10[k]) * fx;
        let bot = f64::from(p01[k]) * (1.0 - fx) + f64::from(p11[k]) * fx;
        out[k] = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// Backward spline: maps output (target) coordinates into the source image.
pub fn backward_transform(pair: &ControlPair, regularization: f64) -> Result<TpsTransform, WarpError> {
    solve_tps_points(&pair.target, &pair.source, regularization)
}

/// Warps `img` so that the source control points move to the targets.
pub fn warp_image(img: &ImageBuffer, pair: &ControlPair, regularization: f64) -> Result<ImageBuffer, WarpError> {
    let back = backward_transform(pair, regularization)?;
    Ok(warp_with(img, &back))
}

/// Resamples `img` through an already-solved backward transform.
pub fn warp_with(img: &ImageBuffer, back: &TpsTransform) -> ImageBuffer {
    ImageBuffer::from_fn(img.width(), img.height(), |x, y| {
        let [sx, sy] = tps_eval(back, [f64::from(x), f64::from(y)]);
        let v = sample_bilinear(img, sx, sy);
        [
            v[0].round().clamp(0.0, 255.0) as u8,
            v[1].round().clamp(0.0, 255.0) as u8,
            v[2].round().clamp(0.0, 255.0) as u8,
        ]
    })
}

/// Same warp for a mask, nearest-neighbour sampled.
pub fn warp_mask(mask: &SegMask, pair: &ControlPair, regularization: f64) -> Result<SegMask, WarpError> {
    let back = backward_transform(pair, regularization)?;
    Ok(warp_mask_with(mask, &back))
}

pub fn warp_mask_with(mask: &SegMask, back: &TpsTransform) -> SegMask {
    let max_x = f64::from(mask.width() - 1);
    let max_y = f64::from(mask.height() - 1);
    SegMask::from_fn(mask.width(), mask.height(), |x, y| {
        let [sx, sy] = tps_eval(back, [f64::from(x), f64::from(y)]);
        let sx = if sx.is_nan() { 0.0 } else { sx.round().clamp(0.0, max_x) };
        let sy = if sy.is_nan() { 0.0 } else { sy.round().clamp(0.0, max_y) };
        mask.get(sx as u32, sy as u32)
    })
}
