//! Fit a color PCA model over a few synthetic images and apply jitter.
//!
//! ```text
//! cargo run --example color_pca -- [out_dir]
//! ```

use std::path::PathBuf;

use lesion_aug::color::fit_color_pca_images;
use lesion_aug::preview::contact_sheet;
use lesion_aug::synth::synthetic_lesion;
use lesion_aug::{apply_color_shift, sample_color_shift, save_image, SeedContext};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out)?;

    let samples: Vec<_> = (0..12)
        .map(|i| synthetic_lesion(80, 80, &SeedContext::new(1, format!("s{i}"))))
        .collect();
    let model = fit_color_pca_images(samples.iter().map(|s| &s.image), 1)?;
    println!("mean      {:?}", model.mean);
    println!("lambda    {:?}", model.eigenvalues);
    for (i, e) in model.eigenvectors.iter().enumerate() {
        println!("evec {i}    {e:?}");
    }
    model.save(out.join("pca.txt"))?;

    let base = &samples[0].image;
    let mut tiles = vec![base.clone()];
    for k in 0..7 {
        let shift = sample_color_shift(&model, &SeedContext::new(1, format!("s0__color{k}")));
        println!("alphas {:+.3?} -> delta {:+.2?}", shift.alphas, shift.delta);
        tiles.push(apply_color_shift(base, &shift));
    }
    save_image(&contact_sheet(&tiles, 2, 4).expect("tiles"), out.join("color_jitter.png"))?;
    println!("wrote {}", out.join("color_jitter.png").display());
    Ok(())
}
