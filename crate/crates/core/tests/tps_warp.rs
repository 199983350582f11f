mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

use lesion_aug::image::{ImageBuffer, SegMask};
use lesion_aug::rng::{SampleRng, SeedContext};
use lesion_aug::synth::{ellipse_mask, synthetic_lesion};
use lesion_aug::warp::{fit_ellipse, make_control_pair, solve_tps, solve_tps_points, tps_eval, warp_image, ControlPair, Ellipse, Point};
use proptest::prelude::*;

fn direction_error(c: Point, s: Point, t: Point) -> f64 {
    let a = (s[1] - c[1]).atan2(s[0] - c[0]);
    let b = (t[1] - c[1]).atan2(t[0] - c[0]);
    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

#[test]
fn ellipse_fit_against_moment_oracle() {
    for (deg, theta) in [(0, 0.0), (30, FRAC_PI_6), (90, FRAC_PI_2)] {
        let m = ellipse_mask(128, 128, [64.0, 64.0], 40.0, 20.0, theta);
        let e = fit_ellipse(&m).unwrap();
        let (cx, cy, a, b, t) = common::moment_oracle(&m);
        assert!((e.center[0] - cx).abs() < 1e-9 && (e.center[1] - cy).abs() < 1e-9);
        assert!((e.semi_major - a).abs() < 1e-6 && (e.semi_minor - b).abs() < 1e-6, "{deg}: {e:?}");
        assert!((e.semi_major - 40.0).abs() <= 0.8, "{deg}: {e:?}");
        assert!((e.semi_minor - 20.0).abs() <= 0.4, "{deg}: {e:?}");
        assert!(common::angle_diff_mod_pi(e.theta, theta) <= 0.02, "{deg}: {}", e.theta);
        assert!(common::angle_diff_mod_pi(e.theta, t) <= 1e-9);
        assert!((-FRAC_PI_2..FRAC_PI_2).contains(&e.theta));
    }
}

#[test]
fn ellipse_fit_equivariance() {
    let base = ellipse_mask(100, 90, [40.0, 38.0], 25.0, 12.0, 0.7);
    let e0 = fit_ellipse(&base).unwrap();
    let (dx, dy) = (7u32, 11u32);
    let moved = SegMask::from_fn(100, 90, |x, y| x >= dx && y >= dy && base.get(x - dx, y - dy));
    let e1 = fit_ellipse(&moved).unwrap();
    assert_eq!(e1.center, [e0.center[0] + 7.0, e0.center[1] + 11.0]);
    assert_eq!((e1.semi_major, e1.semi_minor, e1.theta), (e0.semi_major, e0.semi_minor, e0.theta));

    let rotated = lesion_aug::geometric::apply_d4_mask(&base, lesion_aug::D4Element::new(lesion_aug::Rotation::R90, false));
    let e2 = fit_ellipse(&rotated).unwrap();
    // Image rotation is counter-clockwise on screen; with y down that is -90 degrees in (x, y).
    assert!(common::angle_diff_mod_pi(e2.theta, e0.theta - FRAC_PI_2) <= 0.02);
    assert!(common::angle_diff_mod_pi(e2.theta, e0.theta + FRAC_PI_2) <= 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn control_pairs_stay_on_their_rays(seed in any::<u64>(), a in 3.0f64..80.0, ratio in 0.1f64..1.0, theta in -1.57f64..1.57) {
        let e = Ellipse { center: [100.0, 80.0], semi_major: a, semi_minor: a * ratio, theta };
        let pair = make_control_pair(&e, &SeedContext::new(seed, "w"), 0.2);
        prop_assert_eq!(pair.source[0], pair.target[0]);
        let c = pair.source[0];
        for i in 1..5 {
            let ds = ((pair.source[i][0] - c[0]).powi(2) + (pair.source[i][1] - c[1]).powi(2)).sqrt();
            let dt = ((pair.target[i][0] - c[0]).powi(2) + (pair.target[i][1] - c[1]).powi(2)).sqrt();
            prop_assert!((0.8 - 1e-12..=1.2 + 1e-12).contains(&(dt / ds)));
            prop_assert!(direction_error(c, pair.source[i], pair.target[i]) <= 1e-9);
        }
    }

    #[test]
    fn solved_splines_interpolate(seed in any::<u64>()) {
        let mut rng = SampleRng::from_key(seed);
        let e = Ellipse {
            center: [rng.uniform(30.0, 90.0), rng.uniform(30.0, 90.0)],
            semi_major: rng.uniform(10.0, 30.0),
            semi_minor: rng.uniform(4.0, 10.0),
            theta: rng.uniform(-1.5, 1.5),
        };
        let pair = make_control_pair(&e, &SeedContext::new(seed, "t"), 0.2);
        let t = solve_tps(&pair, 0.0).unwrap();
        for (s, d) in pair.source.iter().zip(&pair.target) {
            let p = tps_eval(&t, *s);
            prop_assert!(((p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)).sqrt() <= 1e-6);
        }
        for sc in t.side_conditions() {
            for v in sc {
                prop_assert!(v.abs() <= 1e-9, "{:?}", t.side_conditions());
            }
        }
    }
}

#[test]
fn affine_targets_reproduce_the_affine_map() {
    let e = Ellipse {
        center: [64.0, 60.0],
        semi_major: 30.0,
        semi_minor: 14.0,
        theta: 0.4,
    };
    let source = e.control_points().to_vec();
    let c = source[0];
    let affine = |p: Point| -> Point {
        // Uniform 1.2 scale about the center plus a shear and shift.
        let (x, y) = (p[0] - c[0], p[1] - c[1]);
        [c[0] + 1.2 * x + 0.1 * y + 3.0, c[1] - 0.05 * x + 1.2 * y - 2.0]
    };
    let target: Vec<Point> = source.iter().map(|&p| affine(p)).collect();
    let t = solve_tps_points(&source, &target, 0.0).unwrap();
    for w in &t.weights {
        assert!(w.iter().all(|v| v.abs() <= 1e-8), "{w:?}");
    }
    let mut rng = SampleRng::from_key(5);
    for _ in 0..100 {
        let p = [rng.uniform(0.0, 128.0), rng.uniform(0.0, 128.0)];
        let got = tps_eval(&t, p);
        let want = affine(p);
        assert!((got[0] - want[0]).abs() <= 1e-6 && (got[1] - want[1]).abs() <= 1e-6);
        // Midpoint maps to midpoint of images.
        let q = [rng.uniform(0.0, 128.0), rng.uniform(0.0, 128.0)];
        let mid = tps_eval(&t, [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]);
        let gq = tps_eval(&t, q);
        assert!((mid[0] - (got[0] + gq[0]) / 2.0).abs() <= 1e-6);
        assert!((mid[1] - (got[1] + gq[1]) / 2.0).abs() <= 1e-6);
    }
}

#[test]
fn identity_warp_is_within_one_level() {
    let s = synthetic_lesion(90, 70, &SeedContext::new(2, "id"));
    let e = fit_ellipse(&s.mask).unwrap();
    let pair = make_control_pair(&e, &SeedContext::new(0, "x"), 0.0);
    let out = warp_image(&s.image, &pair, 0.0).unwrap();
    for (p, q) in s.image.pixels().iter().zip(out.pixels()) {
        for k in 0..3 {
            assert!((i16::from(p[k]) - i16::from(q[k])).abs() <= 1);
        }
    }
}

#[test]
fn warp_is_deterministic_and_regularization_smooths() {
    let s = synthetic_lesion(80, 80, &SeedContext::new(8, "d"));
    let e = fit_ellipse(&s.mask).unwrap();
    let a = warp_image(&s.image, &make_control_pair(&e, &SeedContext::new(1, "d"), 0.2), 0.0).unwrap();
    let b = warp_image(&s.image, &make_control_pair(&e, &SeedContext::new(1, "d"), 0.2), 0.0).unwrap();
    assert_eq!(a, b);

    let pair = make_control_pair(&e, &SeedContext::new(1, "d"), 0.2);
    let t = solve_tps(&pair, 50.0).unwrap();
    // With smoothing the control points are approximated, not interpolated.
    let err: f64 = pair
        .source
        .iter()
        .zip(&pair.target)
        .map(|(s, d)| {
            let p = tps_eval(&t, *s);
            (p[0] - d[0]).hypot(p[1] - d[1])
        })
        .fold(0.0, f64::max);
    assert!(err > 1e-6);
    for sc in t.side_conditions() {
        assert!(sc.iter().all(|v| v.abs() <= 1e-9));
    }
}

#[test]
fn uniform_shrink_reduces_lesion_area() {
    let mask = ellipse_mask(120, 120, [60.0, 60.0], 35.0, 18.0, 0.2);
    let e = fit_ellipse(&mask).unwrap();
    let source = e.control_points().to_vec();
    let c = source[0];
    let target = source
        .iter()
        .map(|p| [c[0] + 0.8 * (p[0] - c[0]), c[1] + 0.8 * (p[1] - c[1])])
        .collect();
    let pair = ControlPair {
        source,
        target,
        deltas: vec![-0.2; 4],
    };
    let warped = lesion_aug::warp::warp_mask(&mask, &pair, 0.0).unwrap();
    assert!(warped.count() < mask.count());
    let img = ImageBuffer::from_fn(120, 120, |x, y| if mask.get(x, y) { [40, 20, 10] } else { [220, 170, 150] });
    let wi = warp_image(&img, &pair, 0.0).unwrap();
    let dark = |im: &ImageBuffer| im.pixels().iter().filter(|p| p[0] < 130).count();
    assert!(dark(&wi) < dark(&img));
}
