//! Image quality metrics on the `[0,255]` intensity scale.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse<T: Real>(x: &Tensor<T>, y: &Tensor<T>) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::shape(format!(
            "metric inputs differ in shape: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    if x.is_empty() {
        return Err(Error::shape("metric inputs are empty"));
    }
    let sum: f64 = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| {
            let d = a.to_f64_lossy() - b.to_f64_lossy();
            d * d
        })
        .sum();
    Ok(sum / x.len() as f64)
}

/// `10·log10(255² / MSE)`; `+∞` for identical images.
pub fn psnr<T: Real>(x: &Tensor<T>, estimate: &Tensor<T>) -> Result<f64> {
    Ok(psnr_from_mse(mse(x, estimate)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

fn plane<T: Real>(t: &Tensor<T>) -> Result<(usize, usize)> {
    let s = t.shape();
    if s.len() < 2 || s[..s.len() - 2].iter().product::<usize>() != 1 {
        return Err(Error::shape(format!(
            "expected a single image plane, got shape {s:?}"
        )));
    }
    Ok((s[s.len() - 2], s[s.len() - 1]))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable "valid" filtering of an `h x w` plane.
fn filter_valid(data: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = (0..k).map(|t| taps[t] * data[i * w + j + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..k).map(|t| taps[t] * rows[(i + t) * ow + j]).sum();
        }
    }
    out
}

/// Mean structural similarity over all fully-contained 11×11 Gaussian
/// windows (σ = 1.5, K1 = 0.01, K2 = 0.03, L = 255).
pub fn ssim<T: Real>(x: &Tensor<T>, y: &Tensor<T>) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::shape(format!(
            "ssim inputs differ in shape: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let (h, w) = plane(x)?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::shape(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let xs: Vec<f64> = x.data().iter().map(|v| v.to_f64_lossy()).collect();
    let ys: Vec<f64> = y.data().iter().map(|v| v.to_f64_lossy()).collect();
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = filter_valid(&xs, h, w, &taps);
    let my = filter_valid(&ys, h, w, &taps);
    let mxx = filter_valid(&prod(&xs, &xs), h, w, &taps);
    let myy = filter_valid(&prod(&ys, &ys), h, w, &taps);
    let mxy = filter_valid(&prod(&xs, &ys), h, w, &taps);
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}
