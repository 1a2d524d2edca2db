//! Generates shape images, writes and reads them back, and imports a PGM file.
//!
//! Run with `cargo run --example generate_dataset`.

use hmpnet::datagen::{file_size, generate, import_grayscale, load, save};

fn main() -> hmpnet::Result<()> {
    let dir = std::env::temp_dir().join("hmpnet_generate_example");
    std::fs::create_dir_all(&dir)?;
    let ds = generate(10, 7, 0.05);
    let path = dir.join("shapes.hmpd");
    save(&ds, &path)?;
    let back = load(&path)?;
    println!("{} images, {} bytes (expected {})", back.len(), std::fs::metadata(&path)?.len(), file_size(10, 31, 31));

    // Coarse preview of the first image.
    let (x, y) = &back.items()[0];
    println!("label {y}");
    for i in (1..=31).step_by(2) {
        let row: String = (1..=31)
            .step_by(2)
            .map(|j| {
                if x.get(i, j) < 0.5 {
                    '#'
                } else if x.get(i, j) < 0.9 {
                    '+'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{row}");
    }

    // A 32x32 PGM is cropped to 31x31.
    let mut pgm = b"P5 32 32 255\n".to_vec();
    pgm.extend((0..32 * 32).map(|v| (v % 256) as u8));
    let pgm_path = dir.join("ramp.pgm");
    std::fs::write(&pgm_path, pgm)?;
    let imported = import_grayscale(&[&pgm_path], |_| 1)?;
    println!("imported {:?} with label {}", imported.dims(), imported.items()[0].1);
    Ok(())
}
