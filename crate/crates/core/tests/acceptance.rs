//! Acceptance criteria, one PASS/FAIL line each.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lesion_aug::color::{fit_color_pca, sample_color_shift, ColorPcaModel, CovarianceAccumulator};
use lesion_aug::dataset::{balance_oversample, balance_partition, stratified_kfold, Label};
use lesion_aug::eval::roc_auc_slices;
use lesion_aug::geometric::{apply_d4, enumerate_d4, lesion_bbox, sample_crop, D4Element, Rotation};
use lesion_aug::image::ImageBuffer;
use lesion_aug::linalg::{frobenius, mat_vec};
use lesion_aug::rng::{SampleRng, SeedContext};
use lesion_aug::synth::{ellipse_mask, synthetic_lesion};
use lesion_aug::warp::{fit_ellipse, make_control_pair, solve_tps, solve_tps_points, tps_eval, warp_image, Ellipse, Point};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fold_reconstruction() -> Outcome {
    let m = common::counts_manifest(374, 254, 1372);
    let plan = stratified_kfold(&m, 5, &SeedContext::new(2017, "split")).map_err(|e| e.to_string())?;
    let sizes = plan.fold_sizes();
    check!(sizes == vec![400; 5], "fold sizes {sizes:?}");
    let expected = [74.8, 50.8, 274.4];
    let counts = plan.class_counts(&m);
    for c in &counts {
        for k in 0..3 {
            check!((c[k] as f64 - expected[k]).abs() <= 1.0, "fold class counts {c:?}");
        }
    }
    Ok(format!("folds {sizes:?}, class counts {counts:?}"))
}

fn d4_suite() -> Outcome {
    let elems = enumerate_d4();
    check!(elems.len() == 8, "{} elements", elems.len());
    let distinct: BTreeSet<String> = elems.iter().map(|g| g.to_string()).collect();
    check!(distinct.len() == 8, "duplicate elements");
    let probe = ImageBuffer::from_fn(2, 3, |x, y| [(y * 2 + x) as u8 + 1, 10 * x as u8, 7 * y as u8]);
    let r = D4Element::new(Rotation::R90, false);
    let f = D4Element::new(Rotation::R0, true);
    let mut img = probe.clone();
    for _ in 0..4 {
        img = apply_d4(&img, r);
    }
    check!(img == probe, "r^4 != e");
    check!(apply_d4(&apply_d4(&probe, f), f) == probe, "f^2 != e");
    let outs: Vec<ImageBuffer> = elems.iter().map(|&g| apply_d4(&probe, g)).collect();
    for i in 0..8 {
        for j in i + 1..8 {
            check!(outs[i] != outs[j], "outputs {i} and {j} coincide");
        }
    }
    Ok("8 elements, group laws exact, 8 distinct outputs".into())
}

fn crop_suite() -> Outcome {
    let mut ok = 0;
    for seed in 0..1000u64 {
        let mut rng = SampleRng::from_key(seed ^ 0xC0FFEE);
        let w = 8 + rng.below(120) as u32;
        let h = 8 + rng.below(120) as u32;
        let mask = common::random_blob_mask(&mut rng, w, h);
        let lesion = lesion_bbox(&mask).map_err(|e| e.to_string())?;
        let r = sample_crop(w, h, lesion, &SeedContext::new(seed, "crop")).region;
        check!(r.contains(&lesion) && r.fits_in(w, h), "seed {seed}: {r:?} misses {lesion:?}");
        let (cw, ch) = (f64::from(r.w), f64::from(r.h));
        let ratio = f64::from(w) / f64::from(h);
        let bound = (1.0 / ch).max(f64::from(w) / (f64::from(h) * ch));
        check!((cw / ch - ratio).abs() <= bound + 1e-12, "seed {seed}: aspect {cw}x{ch} in {w}x{h}");
        ok += 1;
    }
    Ok(format!("{ok}/1000 crops contain the lesion and keep the aspect ratio"))
}

fn color_suite() -> Outcome {
    let mut rng = SampleRng::from_key(99);
    let px: Vec<[u8; 3]> = (0..20_000)
        .map(|_| {
            let b = rng.below(200) as f64;
            [
                (b + rng.uniform(0.0, 55.0)) as u8,
                (0.7 * b + rng.uniform(0.0, 40.0)) as u8,
                (0.2 * b + rng.uniform(0.0, 100.0)) as u8,
            ]
        })
        .collect();
    let mut acc = CovarianceAccumulator::new();
    px.iter().for_each(|&p| acc.push_rgb(p));
    let cov = acc.covariance();
    let oracle = common::two_pass_covariance(&px);
    let diff: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| cov[i][j] - oracle[i][j]));
    let rel = frobenius(&diff) / frobenius(&oracle);
    check!(rel <= 1e-9, "covariance relative error {rel:e}");

    let m = fit_color_pca(px.iter().copied()).map_err(|e| e.to_string())?;
    let lmax = m.eigenvalues[0].max(1.0);
    let mut worst = 0.0f64;
    for i in 0..3 {
        let ce = mat_vec(&oracle, &m.eigenvectors[i]);
        let res = common::norm(&std::array::from_fn(|k| ce[k] - m.eigenvalues[i] * m.eigenvectors[i][k]));
        worst = worst.max(res);
    }
    check!(worst <= 1e-6 * lmax, "eigen residual {worst:e}");
    let trace = oracle[0][0] + oracle[1][1] + oracle[2][2];
    let terr = (m.eigenvalues.iter().sum::<f64>() - trace).abs();
    check!(terr <= 1e-6, "trace error {terr:e}");

    let unit = ColorPcaModel {
        mean: [0.0; 3],
        eigenvalues: [1.0, 1.0, 1.0],
        eigenvectors: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        pixel_count: 2,
    };
    let n = 100_000;
    let (mut s, mut sq) = (0.0, 0.0);
    for i in 0..n {
        let a = sample_color_shift(&unit, &SeedContext::new(i, "alpha")).alphas[0];
        s += a;
        sq += a * a;
    }
    let mean = s / n as f64;
    let sd = (sq / n as f64 - mean * mean).sqrt();
    check!(mean.abs() <= 0.01 && (sd - 0.2).abs() <= 0.01, "alpha mean {mean} sd {sd}");
    Ok(format!(
        "cov rel err {rel:.1e}, residual {worst:.1e}, trace err {terr:.1e}, alpha mean {mean:.4} sd {sd:.4}"
    ))
}

fn tps_suite() -> Outcome {
    let mut worst_fit = 0.0f64;
    let mut worst_side = 0.0f64;
    for seed in 0..200u64 {
        let mut rng = SampleRng::from_key(seed);
        let e = Ellipse {
            center: [rng.uniform(20.0, 100.0), rng.uniform(20.0, 100.0)],
            semi_major: rng.uniform(8.0, 40.0),
            semi_minor: rng.uniform(3.0, 8.0),
            theta: rng.uniform(-1.5, 1.5),
        };
        let pair = make_control_pair(&e, &SeedContext::new(seed, "tps"), 0.2);
        let t = solve_tps(&pair, 0.0).map_err(|e| e.to_string())?;
        for (s, d) in pair.source.iter().zip(&pair.target) {
            let p = tps_eval(&t, *s);
            worst_fit = worst_fit.max((p[0] - d[0]).hypot(p[1] - d[1]));
        }
        for v in t.side_conditions().iter().flatten() {
            worst_side = worst_side.max(v.abs());
        }
    }
    check!(worst_fit <= 1e-6, "control point error {worst_fit:e}");
    check!(worst_side <= 1e-9, "side condition {worst_side:e}");

    let e = Ellipse {
        center: [60.0, 50.0],
        semi_major: 30.0,
        semi_minor: 12.0,
        theta: 0.3,
    };
    let src = e.control_points().to_vec();
    let affine = |p: Point| [1.2 * p[0] + 0.15 * p[1] - 4.0, -0.1 * p[0] + 0.9 * p[1] + 6.0];
    let dst: Vec<Point> = src.iter().map(|&p| affine(p)).collect();
    let t = solve_tps_points(&src, &dst, 0.0).map_err(|e| e.to_string())?;
    let wmax = t.weights.iter().flatten().fold(0.0f64, |m, w| m.max(w.abs()));
    check!(wmax <= 1e-8, "affine weights {wmax:e}");
    let mut rng = SampleRng::from_key(7);
    let mut aff_err = 0.0f64;
    for _ in 0..100 {
        let p = [rng.uniform(0.0, 128.0), rng.uniform(0.0, 128.0)];
        let (g, w) = (tps_eval(&t, p), affine(p));
        aff_err = aff_err.max((g[0] - w[0]).hypot(g[1] - w[1]));
    }
    check!(aff_err <= 1e-6, "affine probe error {aff_err:e}");

    let s = synthetic_lesion(96, 80, &SeedContext::new(1, "id"));
    let el = fit_ellipse(&s.mask).map_err(|e| e.to_string())?;
    let identity = make_control_pair(&el, &SeedContext::new(1, "id"), 0.0);
    let out = warp_image(&s.image, &identity, 0.0).map_err(|e| e.to_string())?;
    let level = s
        .image
        .pixels()
        .iter()
        .zip(out.pixels())
        .flat_map(|(p, q)| (0..3).map(move |k| (i16::from(p[k]) - i16::from(q[k])).abs()))
        .max()
        .unwrap_or(0);
    check!(level <= 1, "identity warp differs by {level}");
    Ok(format!(
        "fit {worst_fit:.1e}, side {worst_side:.1e}, affine weights {wmax:.1e}, probes {aff_err:.1e}, identity {level}"
    ))
}

fn endpoint_perturbation() -> Outcome {
    let mut worst_dir = 0.0f64;
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for seed in 0..10_000u64 {
        let mut rng = SampleRng::from_key(seed.wrapping_mul(31));
        let a = rng.uniform(4.0, 90.0);
        let e = Ellipse {
            center: [rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0)],
            semi_major: a,
            semi_minor: a * rng.uniform(0.1, 1.0),
            theta: rng.uniform(-1.57, 1.57),
        };
        let pair = make_control_pair(&e, &SeedContext::new(seed, "ep"), 0.2);
        let c = pair.source[0];
        for i in 1..5 {
            let (s, t) = (pair.source[i], pair.target[i]);
            let ds = (s[0] - c[0]).hypot(s[1] - c[1]);
            let dt = (t[0] - c[0]).hypot(t[1] - c[1]);
            let r = dt / ds;
            lo = lo.min(r);
            hi = hi.max(r);
            let a1 = (s[1] - c[1]).atan2(s[0] - c[0]);
            let a2 = (t[1] - c[1]).atan2(t[0] - c[0]);
            let d = (a1 - a2).rem_euclid(std::f64::consts::TAU);
            worst_dir = worst_dir.max(d.min(std::f64::consts::TAU - d));
        }
    }
    check!(lo >= 0.8 - 1e-12 && hi <= 1.2 + 1e-12, "ratio range [{lo}, {hi}]");
    check!(worst_dir <= 1e-9, "direction deviation {worst_dir:e}");
    Ok(format!("ratios in [{lo:.4}, {hi:.4}], direction {worst_dir:.1e} rad"))
}

fn ellipse_fit() -> Outcome {
    let mut parts = Vec::new();
    for deg in [0.0f64, 30.0, 90.0] {
        let theta = deg.to_radians();
        let m = ellipse_mask(128, 128, [64.0, 64.0], 40.0, 20.0, theta);
        let e = fit_ellipse(&m).map_err(|e| e.to_string())?;
        let (_, _, oa, ob, ot) = common::moment_oracle(&m);
        check!(
            (e.semi_major - oa).abs() <= 0.02 * oa && (e.semi_minor - ob).abs() <= 0.02 * ob,
            "{deg}: {e:?} vs oracle ({oa}, {ob})"
        );
        check!(
            (e.semi_major - 40.0).abs() <= 0.8 && (e.semi_minor - 20.0).abs() <= 0.4,
            "{deg}: axes {e:?}"
        );
        let da = common::angle_diff_mod_pi(e.theta, theta);
        check!(
            da <= 0.02 && common::angle_diff_mod_pi(e.theta, ot) <= 0.02,
            "{deg}: angle {}",
            e.theta
        );
        parts.push(format!("{deg}deg a={:.2} b={:.2}", e.semi_major, e.semi_minor));
    }
    Ok(parts.join(", "))
}

fn balancing() -> Outcome {
    let m = common::counts_manifest(374, 254, 1372);
    let seed = SeedContext::new(11, "balance");
    let over = balance_oversample(&m, &seed).map_err(|e| e.to_string())?;
    let s = &over.subsets[0];
    check!(s.class_counts() == [1372; 3], "oversample counts {:?}", s.class_counts());
    let aug = s.augmentation_counts();
    check!(aug == [998, 1118, 0], "scheduled augmentations {aug:?}");

    let part = balance_partition(&m, &seed).map_err(|e| e.to_string())?;
    let mut seen = BTreeSet::new();
    let mut sizes = Vec::new();
    for sub in &part.subsets {
        let c = sub.class_counts();
        check!(c[0] == c[2] && c[1] == c[2], "unbalanced subset {c:?}");
        sizes.push(c[2]);
        for id in sub.ids_with_label(Label::Nevus) {
            check!(seen.insert(id.to_string()), "{id} in two chunks");
        }
    }
    check!(seen.len() == 1372, "chunks cover {} majority ids", seen.len());
    Ok(format!(
        "oversample 3x1372 with {}+{} copies; partition {} chunks {sizes:?}",
        aug[0],
        aug[1],
        part.subsets.len()
    ))
}

fn auc_equivalence() -> Outcome {
    let mut rng = SampleRng::from_key(0xA0C);
    for inst in 0..500 {
        let n = 2 + rng.below(199) as usize;
        let levels = 1 + rng.below(15);
        let mut pos: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.35).collect();
        pos[0] = true;
        pos[1] = false;
        let s: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64).collect();
        let got = roc_auc_slices(&s, &pos).map_err(|e| e.to_string())?;
        let want = common::auc_pairs(&s, &pos);
        check!(got == want, "instance {inst}: {got} vs {want}");
    }
    let perfect = roc_auc_slices(&[0.1, 0.2, 0.7, 0.9], &[false, false, true, true]).map_err(|e| e.to_string())?;
    check!(perfect == 1.0, "perfect separation {perfect}");
    let ties = roc_auc_slices(&[0.4; 7], &[true, false, false, true, false, true, false]).map_err(|e| e.to_string())?;
    check!(ties == 0.5, "all ties {ties}");
    Ok("500/500 instances exact, separation 1.0, ties 0.5".into())
}

fn cli(args: &[&str], workers: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lesion-aug"))
        .args(args)
        .env("LESION_AUG_WORKERS", workers)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn pipeline(run_dir: &Path, workers: &str) -> Result<(), String> {
    common::write_synthetic_dataset(&run_dir.join("data"), 50, 64, 56, 2017);
    let p = |rel: &str| run_dir.join(rel).to_string_lossy().into_owned();
    cli(
        &[
            "split",
            "--manifest",
            &p("data/manifest.jsonl"),
            "--k",
            "5",
            "--seed",
            "42",
            "--out",
            &p("split.jsonl"),
        ],
        workers,
    )?;
    cli(
        &[
            "pca-fit",
            "--manifest",
            &p("split.jsonl"),
            "--model-out",
            &p("pca.txt"),
            "--val-fold",
            "0",
        ],
        workers,
    )?;
    cli(
        &[
            "augment",
            "--manifest",
            &p("split.jsonl"),
            "--ops",
            "crop,d4,color,warp",
            "--pca-model",
            &p("pca.txt"),
            "--seed",
            "42",
            "--out-dir",
            &p("augmented"),
            "--val-fold",
            "0",
        ],
        workers,
    )?;
    for strategy in ["oversample", "partition"] {
        cli(
            &[
                "balance",
                "--manifest",
                &p("split.jsonl"),
                "--strategy",
                strategy,
                "--pca-model",
                &p("pca.txt"),
                "--seed",
                "42",
                "--out-dir",
                &p(&format!("balanced_{strategy}")),
                "--val-fold",
                "0",
            ],
            workers,
        )?;
    }
    cli(
        &[
            "contact-sheet",
            "--manifest",
            &p("augmented/manifest.jsonl"),
            "--out-image",
            &p("sheet.png"),
            "--rows",
            "4",
            "--cols",
            "6",
        ],
        workers,
    )
}

fn end_to_end_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [("run_w1_a", "1"), ("run_w1_b", "1"), ("run_w8", "8")];
    let mut trees = Vec::new();
    for (name, workers) in runs {
        let dir = root.path().join(name);
        pipeline(&dir, workers)?;
        trees.push(common::read_tree(&dir));
    }
    for (i, t) in trees.iter().enumerate().skip(1) {
        let a: BTreeSet<_> = trees[0].keys().collect();
        let b: BTreeSet<_> = t.keys().collect();
        check!(
            a == b,
            "{}: file sets differ ({:?})",
            runs[i].0,
            a.symmetric_difference(&b).take(3).collect::<Vec<_>>()
        );
        if let Some((k, _)) = trees[0].iter().find(|(k, v)| t.get(*k) != Some(*v)) {
            return Err(format!("{}: {k} differs", runs[i].0));
        }
    }
    let images = trees[0].keys().filter(|k| k.ends_with(".png")).count();
    Ok(format!(
        "{} files ({images} png) identical across 3 runs (workers 1, 1, 8)",
        trees[0].len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("fold reconstruction", Duration::from_secs(1), fold_reconstruction),
        ("D4 suite", Duration::from_secs(1), d4_suite),
        ("crop suite", Duration::from_secs(5), crop_suite),
        ("color PCA suite", Duration::from_secs(10), color_suite),
        ("TPS suite", Duration::from_secs(5), tps_suite),
        ("endpoint perturbation", Duration::from_secs(5), endpoint_perturbation),
        ("ellipse fit", Duration::from_secs(5), ellipse_fit),
        ("balancing", Duration::from_secs(1), balancing),
        ("AUC oracle equivalence", Duration::from_secs(10), auc_equivalence),
        ("end-to-end determinism", Duration::from_secs(120), end_to_end_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > *limit => Err(format!("{detail}; too slow")),
            o => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {:>2} {name}: {detail} [{:.3}s / {}s]",
            i + 1,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
