//! The eight rotation/flip variants of one image and a few group identities.
//!
//! ```text
//! cargo run --example d4_orbit -- [out_dir]
//! ```

use std::path::PathBuf;

use lesion_aug::preview::contact_sheet;
use lesion_aug::synth::synthetic_lesion;
use lesion_aug::{apply_d4, enumerate_d4, save_image, D4Element, Rotation, SeedContext};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out)?;
    let s = synthetic_lesion(96, 64, &SeedContext::new(3, "orbit"));

    let elems = enumerate_d4();
    let images: Vec<_> = elems.iter().map(|&g| apply_d4(&s.image, g)).collect();
    for (g, img) in elems.iter().zip(&images) {
        println!("{g:<7} -> {}x{}  inverse {}", img.width(), img.height(), g.inverse());
    }

    let r = D4Element::new(Rotation::R90, false);
    let f = D4Element::new(Rotation::R0, true);
    println!("r.then(f) = {}, f.then(r) = {}", r.then(f), f.then(r));
    println!("vertical flip = {}", D4Element::vflip());

    save_image(&contact_sheet(&images, 2, 4).expect("eight images"), out.join("d4_orbit.png"))?;
    println!("wrote {}", out.join("d4_orbit.png").display());
    Ok(())
}
