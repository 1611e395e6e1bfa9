//! Writes the procedural sedan, hatchback and SUV meshes as OBJ files.
//!
//! ```text
//! cargo run -p hawk-core --example write_meshes -- assets/meshes
//! ```

use std::path::PathBuf;

use hawk_core::meshgen::{self, CarDims};

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "assets/meshes".into()));
    std::fs::create_dir_all(&dir)?;
    for (name, mesh) in [
        ("sedan", meshgen::sedan(&CarDims::sedan())),
        ("hatchback", meshgen::hatchback(&CarDims::hatchback())),
        ("suv", meshgen::suv(&CarDims::suv())),
    ] {
        let path = dir.join(format!("{name}.obj"));
        std::fs::write(&path, mesh.to_obj())?;
        println!("{} ({} triangles)", path.display(), mesh.triangles().len());
    }
    Ok(())
}
