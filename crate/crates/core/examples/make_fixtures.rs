//! Regenerates the bundled fixtures in `crates/core/fixtures`.

use std::path::Path;

use specrec::csc::ConvDictionary;
use specrec::io::{save_cube, save_dictionary};
use specrec::synthetic::textured_scene;

fn main() -> specrec::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).map_err(|e| specrec::Error::Data(e.to_string()))?;
    save_dictionary(&ConvDictionary::dct(12), dir.join("dct12x144.srec"))?;
    save_cube(&textured_scene(64, 64, 8), dir.join("scene64x64x8.srec"))?;
    println!("fixtures written to {}", dir.display());
    Ok(())
}
