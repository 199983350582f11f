//! Lesion-preserving crops of a synthetic dermoscopy image.
//!
//! ```text
//! cargo run --example geometric_crops -- [out_dir]
//! ```

use std::path::PathBuf;

use lesion_aug::geometric::crop_mask;
use lesion_aug::preview::contact_sheet;
use lesion_aug::synth::synthetic_lesion;
use lesion_aug::{apply_crop, lesion_bbox, sample_crop, save_image, SeedContext};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out)?;

    let s = synthetic_lesion(160, 120, &SeedContext::new(7, "ISIC_demo"));
    let lesion = lesion_bbox(&s.mask)?;
    println!("image 160x120, lesion box {lesion}");

    let mut crops = vec![s.image.clone()];
    for j in 0..8 {
        let spec = sample_crop(160, 120, lesion, &SeedContext::new(7, format!("ISIC_demo__crop{j}")));
        let img = apply_crop(&s.image, &spec)?;
        let kept = crop_mask(&s.mask, &spec)?.count();
        println!("crop {j}: {} (lesion pixels kept {kept}/{})", spec.region, s.mask.count());
        crops.push(img);
    }
    let sheet = contact_sheet(&crops, 3, 3).expect("non-empty");
    save_image(&sheet, out.join("crops.png"))?;
    println!("wrote {}", out.join("crops.png").display());
    Ok(())
}
