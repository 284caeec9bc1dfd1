//! Generates a few synthetic scenes and shows what the captioner sees: the
//! placed objects, the ranked proposal boxes with their k-scaled patches,
//! and the five template captions. Optionally writes the rasters as PNGs.
//!
//! ```text
//! cargo run --release --example dataset [png-dir]
//! ```

use std::path::PathBuf;

use cha::dataset::generate_scene;
use cha::features::{expand_patch, top_n_boxes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    for i in 0..3 {
        let s = generate_scene(42, i);
        let (w, h) = (s.raster.width(), s.raster.height());
        println!("{} ({w}x{h}, {})", s.image_id, s.scene.background.name());
        for o in &s.scene.objects {
            let b = o.bbox;
            println!("  {:<9} center ({:>4.1}, {:>4.1}) size {:>4.1} x {:>4.1}", o.class.name(), b.cx, b.cy, b.w, b.h);
        }
        for (rank, b) in top_n_boxes(&s.scene.boxes(), 5, w, h).iter().enumerate() {
            let p = expand_patch(b, 2.0, w, h)?;
            println!(
                "  proposal {}: [{:.0},{:.0}]x[{:.0},{:.0}] -> patch [{:.0},{:.0}]x[{:.0},{:.0}]",
                rank + 1,
                b.x0(),
                b.x1(),
                b.y0(),
                b.y1(),
                p.x0(),
                p.x1(),
                p.y0(),
                p.y1()
            );
        }
        for c in &s.captions {
            println!("  \"{c}\"");
        }
        if let Some(dir) = &out {
            let path = dir.join(format!("{}.png", s.image_id));
            image::RgbImage::from_raw(w, h, s.raster.to_rgb8())
                .ok_or("raster size")?
                .save(&path)?;
            println!("  wrote {}", path.display());
        }
    }
    Ok(())
}
