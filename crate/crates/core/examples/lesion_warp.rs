//! Ellipse fit of a lesion mask and thin-plate-spline deformation of its axes.
//!
//! ```text
//! cargo run --example lesion_warp -- [out_dir] [regularization]
//! ```

use std::path::PathBuf;

use lesion_aug::preview::contact_sheet;
use lesion_aug::synth::synthetic_lesion;
use lesion_aug::warp::{warp_mask, DEFAULT_MAX_FRAC};
use lesion_aug::{fit_ellipse, make_control_pair, save_image, solve_tps, tps_eval, warp_image, ImageBuffer, SeedContext};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/examples-out".into()));
    let reg: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.0);
    std::fs::create_dir_all(&out)?;

    let s = synthetic_lesion(128, 112, &SeedContext::new(5, "warp_demo"));
    let e = fit_ellipse(&s.mask)?;
    println!(
        "ellipse center ({:.2}, {:.2}) a={:.2} b={:.2} theta={:.3}",
        e.center[0], e.center[1], e.semi_major, e.semi_minor, e.theta
    );

    let mut tiles: Vec<ImageBuffer> = vec![s.image.clone()];
    for k in 0..5 {
        let pair = make_control_pair(&e, &SeedContext::new(5, format!("warp_demo__warp{k}")), DEFAULT_MAX_FRAC);
        let t = solve_tps(&pair, reg)?;
        let worst = pair
            .source
            .iter()
            .zip(&pair.target)
            .map(|(p, q)| {
                let m = tps_eval(&t, *p);
                (m[0] - q[0]).hypot(m[1] - q[1])
            })
            .fold(0.0, f64::max);
        let warped = warp_image(&s.image, &pair, reg)?;
        let area = warp_mask(&s.mask, &pair, reg)?.count();
        println!(
            "warp {k}: deltas {:+.3?} control error {worst:.1e} lesion area {} -> {area}",
            pair.deltas,
            s.mask.count()
        );
        tiles.push(warped);
    }
    save_image(&contact_sheet(&tiles, 2, 3).expect("tiles"), out.join("warps.png"))?;
    println!("wrote {}", out.join("warps.png").display());
    Ok(())
}
