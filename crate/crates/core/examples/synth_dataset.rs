//! Write a small synthetic dataset and print its manifest.
//!
//! `cargo run --example synth_dataset -- [out_dir]`

use bfdn::io::{synth_dataset, Split};

fn main() -> bfdn::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth_data".into());
    let m = synth_dataset(10, 64, 7, &out)?;
    for split in [Split::Train, Split::Validation, Split::Test] {
        println!("{split:?}: {} images", m.files_in(split).count());
    }
    for e in &m.files {
        println!("{}  {:?}  {}", e.file, e.split, &e.sha256[..16]);
    }
    println!("changed files: {:?}", m.verify()?);
    Ok(())
}
