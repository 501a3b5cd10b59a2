//! Piecewise-smooth synthetic grayscale images and dataset manifests.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::csv::sha256_hex;
use super::pgm::{load_pgm, save_pgm, PgmImage};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MIN_SYNTH_SIZE: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    pub split: Split,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub seed: Option<u64>,
    pub files: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn files_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.files.iter().filter(move |e| e.split == split)
    }

    /// Read a directory: its `manifest.json` when present, otherwise every
    /// `*.pgm` file in name order, all assigned to the training split.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            let mut m: DatasetManifest = serde_json::from_slice(&std::fs::read(&path)?)?;
            m.root = dir.to_path_buf();
            return Ok(m);
        }
        let mut names: Vec<String> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.to_ascii_lowercase().ends_with(".pgm"))
            .collect();
        names.sort();
        let files = names
            .into_iter()
            .map(|file| {
                let sha256 = sha256_hex(&std::fs::read(dir.join(&file))?);
                Ok(ManifestEntry {
                    file,
                    split: Split::Train,
                    sha256,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            root: dir.to_path_buf(),
            seed: None,
            files,
        })
    }

    /// Images of one split as `[1,H,W]` tensors on `[0,255]`.
    pub fn load(&self, split: Split) -> Result<Vec<Tensor<f32>>> {
        self.files_in(split)
            .map(|e| Ok(load_pgm(self.root.join(&e.file))?.to_tensor()))
            .collect()
    }

    /// Recompute every checksum; returns the names that no longer match.
    pub fn verify(&self) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for e in &self.files {
            if sha256_hex(&std::fs::read(self.root.join(&e.file))?) != e.sha256 {
                bad.push(e.file.clone());
            }
        }
        Ok(bad)
    }
}

/// One `size x size` image: a linear background gradient, 3 to 8
/// star-shaped polygons at distinct gray levels and a faint band-limited
/// texture. Values lie in `[0,255]`, rounded to integers.
pub fn synth_image(size: usize, rng: &mut Rng) -> Tensor<f32> {
    let s = size as f64;
    let base = rng.uniform(60.0, 190.0);
    let (gx, gy) = (rng.uniform(-40.0, 40.0) / s, rng.uniform(-40.0, 40.0) / s);
    let mut img: Vec<f64> = (0..size * size)
        .map(|i| base + gx * (i % size) as f64 + gy * (i / size) as f64)
        .collect();

    let mut levels: Vec<f64> = (0..12).map(|k| 15.0 + 20.0 * k as f64).collect();
    rng.shuffle(&mut levels);
    let n_poly = 3 + rng.below(6);
    for &level in levels.iter().take(n_poly) {
        let (cx, cy) = (rng.uniform(0.1, 0.9) * s, rng.uniform(0.1, 0.9) * s);
        let radius = rng.uniform(0.12, 0.3) * s;
        let k = 3 + rng.below(5);
        let mut angles: Vec<f64> = (0..k).map(|_| rng.uniform(0.0, 2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let verts: Vec<(f64, f64)> = angles
            .iter()
            .map(|&a| {
                let r = radius * rng.uniform(0.6, 1.0);
                (cx + r * a.cos(), cy + r * a.sin())
            })
            .collect();
        for i in 0..size {
            for j in 0..size {
                if inside(&verts, j as f64 + 0.5, i as f64 + 0.5) {
                    img[i * size + j] = level;
                }
            }
        }
    }

    for _ in 0..4 {
        let freq = rng.uniform(2.0, 6.0) / s;
        let theta = rng.uniform(0.0, PI);
        let phase = rng.uniform(0.0, 2.0 * PI);
        let amp = rng.uniform(0.5, 1.5);
        let (fx, fy) = (freq * theta.cos(), freq * theta.sin());
        for (idx, v) in img.iter_mut().enumerate() {
            let (x, y) = ((idx % size) as f64, (idx / size) as f64);
            *v += amp * (2.0 * PI * (fx * x + fy * y) + phase).sin();
        }
    }
    Tensor::new(
        vec![1, size, size],
        img.into_iter().map(|v| v.clamp(0.0, 255.0).round() as f32).collect(),
    )
    .expect("size x size")
}

/// Even-odd point-in-polygon test.
fn inside(verts: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut hit = false;
    let mut j = verts.len() - 1;
    for i in 0..verts.len() {
        let (xi, yi) = verts[i];
        let (xj, yj) = verts[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            hit = !hit;
        }
        j = i;
    }
    hit
}

/// `count` images from independent sub-streams of `seed`.
pub fn synth_images(count: usize, size: usize, seed: u64) -> Vec<Tensor<f32>> {
    let root = Rng::new(seed);
    (0..count)
        .map(|i| synth_image(size, &mut root.fork(i as u64)))
        .collect()
}

/// Write `count` images to `out_dir` with a manifest. A fifth of the images
/// (rounded down) is held out for testing and a tenth of the rest
/// (at least one when two or more remain) for validation.
pub fn synth_dataset(count: usize, size: usize, seed: u64, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    if size < MIN_SYNTH_SIZE {
        return Err(Error::invalid(format!(
            "synthetic images must be at least {MIN_SYNTH_SIZE}x{MIN_SYNTH_SIZE}, got {size}"
        )));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let mut order: Vec<usize> = (0..count).collect();
    Rng::new(seed).fork(u64::MAX - 1).shuffle(&mut order);
    let n_test = count / 5;
    let rest = count - n_test;
    let n_val = if rest >= 2 { ((rest as f64 * 0.1).round() as usize).max(1) } else { 0 };
    let mut split = vec![Split::Train; count];
    for &i in &order[..n_test] {
        split[i] = Split::Test;
    }
    for &i in &order[n_test..n_test + n_val] {
        split[i] = Split::Validation;
    }

    let mut files = Vec::with_capacity(count);
    for (i, img) in synth_images(count, size, seed).into_iter().enumerate() {
        let file = format!("synth_{i:04}.pgm");
        let pgm = PgmImage::from_tensor(&img)?;
        save_pgm(&pgm, out_dir.join(&file))?;
        files.push(ManifestEntry {
            file,
            split: split[i],
            sha256: sha256_hex(&pgm.to_bytes()),
        });
    }
    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        seed: Some(seed),
        files,
    };
    let stored = DatasetManifest {
        root: PathBuf::from("."),
        ..manifest.clone()
    };
    std::fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&stored)?)?;
    Ok(manifest)
}
