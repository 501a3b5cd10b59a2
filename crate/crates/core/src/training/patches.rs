//! Clean training patches with flip, rotation and rescaling augmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Rescaling factors used when downsampling augmentation is on.
pub const DOWNSAMPLE_FACTORS: [f64; 4] = [1.0, 0.9, 0.8, 0.7];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Augment {
    pub flips: bool,
    pub rotations: bool,
    pub downsampling: bool,
}

impl Default for Augment {
    fn default() -> Self {
        Self {
            flips: true,
            rotations: true,
            downsampling: true,
        }
    }
}

impl Augment {
    pub fn none() -> Self {
        Self {
            flips: false,
            rotations: false,
            downsampling: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PatchSet {
    /// `[1, P, P]` clean patches.
    pub patches: Vec<Tensor<f32>>,
    /// Image/scale combinations too small to hold one patch.
    pub skipped: usize,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

fn dims(img: &Tensor<f32>) -> Result<(usize, usize)> {
    match *img.shape() {
        [1, h, w] | [h, w] => Ok((h, w)),
        _ => Err(Error::shape(format!(
            "expected a single-channel image, got shape {:?}",
            img.shape()
        ))),
    }
}

/// Cut `patch x patch` tiles on a `stride` grid from every image (and every
/// rescaled copy), applying a random flip/rotation to each tile.
pub fn make_patches(
    images: &[Tensor<f32>],
    patch: usize,
    stride: usize,
    augment: Augment,
    rng: &mut Rng,
) -> Result<PatchSet> {
    if patch == 0 || stride == 0 {
        return Err(Error::invalid("patch size and stride must be positive"));
    }
    let factors: &[f64] = if augment.downsampling {
        &DOWNSAMPLE_FACTORS
    } else {
        &DOWNSAMPLE_FACTORS[..1]
    };
    let mut set = PatchSet::default();
    for img in images {
        let (h, w) = dims(img)?;
        for &f in factors {
            let (sh, sw) = ((h as f64 * f).floor() as usize, (w as f64 * f).floor() as usize);
            if sh < patch || sw < patch {
                set.skipped += 1;
                continue;
            }
            let scaled = if f == 1.0 {
                img.data().to_vec()
            } else {
                bilinear_resize(img.data(), h, w, sh, sw)
            };
            for top in (0..=sh - patch).step_by(stride) {
                for left in (0..=sw - patch).step_by(stride) {
                    let mut tile = Vec::with_capacity(patch * patch);
                    for r in top..top + patch {
                        tile.extend_from_slice(&scaled[r * sw + left..r * sw + left + patch]);
                    }
                    let flip = augment.flips && rng.coin();
                    let turns = if augment.rotations { rng.below(4) } else { 0 };
                    if flip {
                        tile = flip_horizontal(&tile, patch, patch);
                    }
                    for _ in 0..turns {
                        tile = rot90(&tile, patch);
                    }
                    set.patches.push(Tensor::new(vec![1, patch, patch], tile)?);
                }
            }
        }
    }
    Ok(set)
}

pub fn flip_horizontal<T: Copy>(data: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(h * w);
    for row in data.chunks(w).take(h) {
        out.extend(row.iter().rev().copied());
    }
    out
}

/// Counter-clockwise quarter turn of a square tile.
pub fn rot90<T: Copy>(data: &[T], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(data[j * n + (n - 1 - i)]);
        }
    }
    out
}

/// Bilinear resampling with pixel-center alignment.
pub fn bilinear_resize(data: &[f32], h: usize, w: usize, nh: usize, nw: usize) -> Vec<f32> {
    let sy = h as f64 / nh as f64;
    let sx = w as f64 / nw as f64;
    let mut out = Vec::with_capacity(nh * nw);
    for i in 0..nh {
        let fy = ((i as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for j in 0..nw {
            let fx = ((j as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            let at = |y: usize, x: usize| data[y * w + x] as f64;
            let top = at(y0, x0) * (1.0 - tx) + at(y0, x1) * tx;
            let bottom = at(y1, x0) * (1.0 - tx) + at(y1, x1) * tx;
            out.push((top * (1.0 - ty) + bottom * ty) as f32);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Tensor<f32> {
        Tensor::from_fn(vec![1, h, w], |i| i as f32)
    }

    #[test]
    fn plain_tiling() {
        let img = ramp(100, 100);
        let set = make_patches(&[img.clone()], 50, 50, Augment::none(), &mut Rng::new(0)).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.skipped, 0);
        // Bottom-right tile starts at (50, 50).
        assert_eq!(set.patches[3].data()[0], (50 * 100 + 50) as f32);
        let total: f64 = set.patches.iter().flat_map(|p| p.data()).map(|&v| v as f64).sum();
        assert_eq!(total, img.data().iter().map(|&v| v as f64).sum::<f64>());
    }

    #[test]
    fn small_images_are_counted_not_fatal() {
        let set = make_patches(&[ramp(30, 30), ramp(60, 60)], 40, 20, Augment::none(), &mut Rng::new(0)).unwrap();
        assert_eq!(set.skipped, 1);
        assert_eq!(set.len(), 4);
        let set = make_patches(&[ramp(50, 50)], 40, 40, Augment::default(), &mut Rng::new(0)).unwrap();
        // factors 0.7 (35px) and 0.8 (40px -> fits) ...
        assert_eq!(set.skipped, 1);
    }

    #[test]
    fn flips_and_rotations_are_group_actions() {
        let tile: Vec<u32> = (0..16).collect();
        assert_eq!(flip_horizontal(&flip_horizontal(&tile, 4, 4), 4, 4), tile);
        let mut t = tile.clone();
        for _ in 0..4 {
            t = rot90(&t, 4);
        }
        assert_eq!(t, tile);
        assert_ne!(rot90(&tile, 4), tile);
    }

    #[test]
    fn deterministic_under_seed() {
        let imgs = [ramp(64, 64), ramp(80, 72)];
        let a = make_patches(&imgs, 16, 8, Augment::default(), &mut Rng::new(5)).unwrap();
        let b = make_patches(&imgs, 16, 8, Augment::default(), &mut Rng::new(5)).unwrap();
        assert_eq!(a.patches, b.patches);
    }

    #[test]
    fn resize_preserves_constants() {
        let c = vec![7.5f32; 30 * 20];
        assert!(bilinear_resize(&c, 30, 20, 21, 14).iter().all(|&v| v == 7.5));
    }
}
