//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lesion_aug::dataset::{Label, Manifest, SampleRecord};
use lesion_aug::image::{save_image, save_mask, SegMask};
use lesion_aug::rng::{SampleRng, SeedContext};
use lesion_aug::synth::synthetic_lesion;

/// Two-pass population covariance of RGB triples scaled to [0, 1].
pub fn two_pass_covariance(px: &[[u8; 3]]) -> [[f64; 3]; 3] {
    let n = px.len() as f64;
    let mut mean = [0.0; 3];
    for p in px {
        for k in 0..3 {
            mean[k] += f64::from(p[k]) / 255.0;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut c = [[0.0; 3]; 3];
    for p in px {
        let d: Vec<f64> = (0..3).map(|k| f64::from(p[k]) / 255.0 - mean[k]).collect();
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += d[i] * d[j];
            }
        }
    }
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    c
}

/// Closed-form (trigonometric) eigenvalues of a symmetric 3x3 matrix, descending.
pub fn textbook_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let l2 = 3.0 * q - l1 - l3;
    [l1, l2, l3]
}

/// Eigenvector for a simple eigenvalue: largest cross product of rows of A - lambda I.
pub fn textbook_eigenvector(a: &[[f64; 3]; 3], lambda: f64) -> [f64; 3] {
    let m: Vec<[f64; 3]> = (0..3)
        .map(|i| {
            [
                a[i][0] - if i == 0 { lambda } else { 0.0 },
                a[i][1] - if i == 1 { lambda } else { 0.0 },
                a[i][2] - if i == 2 { lambda } else { 0.0 },
            ]
        })
        .collect();
    let cross = |u: &[f64; 3], v: &[f64; 3]| [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let cands = [cross(&m[0], &m[1]), cross(&m[0], &m[2]), cross(&m[1], &m[2])];
    let best = cands.iter().max_by(|x, y| norm(x).total_cmp(&norm(y))).copied().unwrap();
    let n = norm(&best);
    [best[0] / n, best[1] / n, best[2] / n]
}

pub fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// O(n^2) Mann-Whitney pair count.
pub fn auc_pairs(scores: &[f64], pos: &[bool]) -> f64 {
    let (mut c, mut t, mut np, mut nn) = (0u64, 0u64, 0u64, 0u64);
    for &p in pos {
        if p {
            np += 1;
        } else {
            nn += 1;
        }
    }
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if pos[i] && !pos[j] {
                if scores[i] > scores[j] {
                    c += 1;
                } else if scores[i] == scores[j] {
                    t += 1;
                }
            }
        }
    }
    (c as f64 + 0.5 * t as f64) / (np * nn) as f64
}

/// Brute-force ellipse from pixel sums: (cx, cy, a, b, theta) with 2-sigma axes.
pub fn moment_oracle(mask: &SegMask) -> (f64, f64, f64, f64, f64) {
    let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0f64, 0.0, 0.0, 0.0, 0.0, 0.0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let (xf, yf) = (f64::from(x), f64::from(y));
                n += 1.0;
                sx += xf;
                sy += yf;
                sxx += xf * xf;
                syy += yf * yf;
                sxy += xf * yf;
            }
        }
    }
    let (cx, cy) = (sx / n, sy / n);
    let vxx = sxx / n - cx * cx;
    let vyy = syy / n - cy * cy;
    let vxy = sxy / n - cx * cy;
    let tr = vxx + vyy;
    let det = vxx * vyy - vxy * vxy;
    let l1 = tr / 2.0 + (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l2 = tr / 2.0 - (tr * tr / 4.0 - det).max(0.0).sqrt();
    let theta = 0.5 * (2.0 * vxy).atan2(vxx - vyy);
    (cx, cy, 2.0 * l1.sqrt(), 2.0 * l2.sqrt(), theta)
}

/// Angular distance modulo pi.
pub fn angle_diff_mod_pi(a: f64, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let d = (a - b).rem_euclid(pi);
    d.min(pi - d)
}

/// Manifest with the given class counts and no files behind it.
pub fn counts_manifest(mel: usize, seb: usize, nev: usize) -> Manifest {
    let mut recs = Vec::new();
    for (label, n) in [(Label::Melanoma, mel), (Label::SeborrheicKeratosis, seb), (Label::Nevus, nev)] {
        for i in 0..n {
            let id = format!("{label}_{i:05}");
            recs.push(SampleRecord::original(id.clone(), format!("images/{id}.png"), None, label));
        }
    }
    Manifest::new(recs, "").unwrap()
}

/// Writes `n` synthetic samples (images/, masks/, manifest.jsonl) into `dir`.
/// Labels cycle so that every class has members.
pub fn write_synthetic_dataset(dir: &Path, n: usize, w: u32, h: u32, seed: u64) -> Manifest {
    fs::create_dir_all(dir.join("images")).unwrap();
    fs::create_dir_all(dir.join("masks")).unwrap();
    let labels = [
        Label::Nevus,
        Label::Melanoma,
        Label::Nevus,
        Label::SeborrheicKeratosis,
        Label::Nevus,
    ];
    let mut recs = Vec::new();
    for i in 0..n {
        let id = format!("SYN_{i:04}");
        let s = synthetic_lesion(w, h, &SeedContext::new(seed, id.as_str()));
        save_image(&s.image, dir.join(format!("images/{id}.png"))).unwrap();
        save_mask(&s.mask, dir.join(format!("masks/{id}.png"))).unwrap();
        recs.push(SampleRecord::original(
            id.clone(),
            format!("images/{id}.png"),
            Some(format!("masks/{id}.png")),
            labels[i % labels.len()],
        ));
    }
    let m = Manifest::new(recs, dir).unwrap();
    m.save(dir.join("manifest.jsonl")).unwrap();
    m
}

/// Every file under `root` (relative path -> bytes).
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Random mask containing one or two filled blobs.
pub fn random_blob_mask(rng: &mut SampleRng, w: u32, h: u32) -> SegMask {
    let mut m = SegMask::empty(w, h);
    let blobs = 1 + rng.below(2);
    for _ in 0..blobs {
        let cx = rng.uniform(0.0, f64::from(w - 1));
        let cy = rng.uniform(0.0, f64::from(h - 1));
        let rx = rng.uniform(0.5, f64::from(w) / 3.0);
        let ry = rng.uniform(0.5, f64::from(h) / 3.0);
        for y in 0..h {
            for x in 0..w {
                let dx = (f64::from(x) - cx) / rx;
                let dy = (f64::from(y) - cy) / ry;
                if dx * dx + dy * dy <= 1.0 {
                    m.set(x, y, true);
                }
            }
        }
    }
    if m.count() == 0 {
        m.set(rng.below(u64::from(w)) as u32, rng.below(u64::from(h)) as u32, true);
    }
    m
}
