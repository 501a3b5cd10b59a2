//! Noise-level sweeps: net bias, effective dimensionality and denoising
//! quality.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::csv::{fmt_f64, write_table, CsvProvenance};
use crate::model::{Mode, Model};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::training::{psnr, sample_noise, ssim, NoiseDistribution};

use super::jacobian::{jacobian_full, net_bias, trace64};

/// PSNR values are capped here so that noiseless rows stay finite.
pub const PSNR_CAP: f64 = 100.0;

/// Named numeric columns, one row per noise level.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Value of `name` in the row whose `sigma` equals `sigma`.
    pub fn at(&self, sigma: f64, name: &str) -> Option<f64> {
        let sig = self.column("sigma")?;
        let k = self.columns.iter().position(|c| c == name)?;
        sig.iter().position(|&s| s == sigma).map(|r| self.rows[r][k])
    }

    pub fn write_csv(&self, w: &mut impl Write, provenance: &CsvProvenance) -> Result<()> {
        let header: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&v| fmt_f64(v)).collect())
            .collect();
        write_table(w, provenance, &header, &rows)
    }
}

fn check_sigmas(sigmas: &[f64]) -> Result<()> {
    if sigmas.is_empty() {
        return Err(Error::invalid("at least one noise level is required"));
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid("noise levels must be finite and non-negative"));
    }
    if sigmas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("noise levels must be strictly increasing"));
    }
    Ok(())
}

/// Noise stream for image `image` in sweep row `row`: independent of how
/// many draws any other row or image consumed.
pub fn noise_stream(seed: u64, row: usize, image: usize) -> Rng {
    Rng::new(seed).fork(((row as u64) << 32) | image as u64)
}

fn noisy(x: &Tensor<f64>, sigma: f64, dist: NoiseDistribution, rng: &mut Rng) -> Result<Tensor<f64>> {
    x.add(&sample_noise(x.shape(), sigma, dist, rng)?)
}

/// Per noise level, image-averaged `‖y − f(y)‖`, `‖b_y‖`, `‖f(y)‖` and
/// `‖n‖` (Gaussian noise, 64-bit infer mode).
pub fn bias_sweep(model: &Model, images: &[Tensor<f64>], sigmas: &[f64], seed: u64) -> Result<SweepTable> {
    check_sigmas(sigmas)?;
    if images.is_empty() {
        return Err(Error::invalid("bias sweep needs at least one image"));
    }
    let mut table = SweepTable::new(&["sigma", "residual_norm", "bias_norm", "output_norm", "noise_norm", "noise_stream"]);
    for (row, &sigma) in sigmas.iter().enumerate() {
        let mut acc = [0.0f64; 4];
        for (k, x) in images.iter().enumerate() {
            let x = model.crop_for_arch(x)?;
            let y = noisy(&x, sigma, NoiseDistribution::Gaussian, &mut noise_stream(seed, row, k))?;
            let f = trace64(model, &y)?.output_value().clone().reshape(x.shape().to_vec())?;
            let b = net_bias(model, &y)?;
            acc[0] += y.sub(&f)?.norm();
            acc[1] += b.norm();
            acc[2] += f.norm();
            acc[3] += y.sub(&x)?.norm();
        }
        let m = images.len() as f64;
        table.rows.push(vec![sigma, acc[0] / m, acc[1] / m, acc[2] / m, acc[3] / m, row as f64]);
    }
    Ok(table)
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("a line fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("a line fit needs distinct abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Mean effective dimensionality per noise level and the fitted exponent
/// of `d ∝ σ^exponent`.
///
/// Each image's `d` is `Σ s_i² = ‖A_y‖_F²`, read off the assembled
/// Jacobian without a full SVD.
pub fn dimensionality_vs_sigma(
    model: &Model,
    images: &[Tensor<f64>],
    sigmas: &[f64],
    seed: u64,
) -> Result<(SweepTable, LineFit)> {
    if sigmas.len() < 3 {
        return Err(Error::invalid(format!(
            "a dimensionality fit needs at least 3 noise levels, got {}",
            sigmas.len()
        )));
    }
    check_sigmas(sigmas)?;
    if sigmas[0] <= 0.0 {
        return Err(Error::invalid("a power-law fit needs positive noise levels"));
    }
    if images.is_empty() {
        return Err(Error::invalid("dimensionality sweep needs at least one image"));
    }
    let mut table = SweepTable::new(&["sigma", "d", "n", "noise_stream"]);
    for (row, &sigma) in sigmas.iter().enumerate() {
        let mut sum = 0.0;
        let mut n = 0;
        for (k, x) in images.iter().enumerate() {
            let x = model.crop_for_arch(x)?;
            let y = noisy(&x, sigma, NoiseDistribution::Gaussian, &mut noise_stream(seed, row, k))?;
            let lm = jacobian_full(model, &y)?;
            sum += lm.a.data().iter().map(|v| v * v).sum::<f64>();
            n = lm.n();
        }
        table.rows.push(vec![sigma, sum / images.len() as f64, n as f64, row as f64]);
    }
    let lx: Vec<f64> = sigmas.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = table.column("d").expect("d column").iter().map(|d| d.ln()).collect();
    let fit = fit_line(&lx, &ly)?;
    Ok((table, fit))
}

/// Per noise level, image-averaged input PSNR, output PSNR and output
/// SSIM. PSNRs are capped at [`PSNR_CAP`].
pub fn eval_sweep(
    model: &Model,
    images: &[Tensor<f64>],
    sigmas: &[f64],
    distribution: NoiseDistribution,
    seed: u64,
) -> Result<SweepTable> {
    check_sigmas(sigmas)?;
    if images.is_empty() {
        return Err(Error::invalid("evaluation needs at least one image"));
    }
    let mut table = SweepTable::new(&["sigma", "input_psnr", "output_psnr", "output_ssim", "noise_stream"]);
    for (row, &sigma) in sigmas.iter().enumerate() {
        let mut acc = [0.0f64; 3];
        for (k, x) in images.iter().enumerate() {
            let x = model.crop_for_arch(x)?;
            let y = noisy(&x, sigma, distribution, &mut noise_stream(seed, row, k))?;
            let f = model.forward(&y, Mode::Infer)?;
            acc[0] += psnr(&x, &y)?.min(PSNR_CAP);
            acc[1] += psnr(&x, &f)?.min(PSNR_CAP);
            acc[2] += ssim(&x, &f)?;
        }
        let m = images.len() as f64;
        table.rows.push(vec![sigma, acc[0] / m, acc[1] / m, acc[2] / m, row as f64]);
    }
    Ok(table)
}

/// Slope of output PSNR against input PSNR over rows with
/// `sigma ∈ [lo, hi]`.
pub fn psnr_slope(table: &SweepTable, lo: f64, hi: f64) -> Result<f64> {
    let (sig, inp, out) = match (table.column("sigma"), table.column("input_psnr"), table.column("output_psnr")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::invalid("table lacks sigma/input_psnr/output_psnr columns")),
    };
    let (x, y): (Vec<f64>, Vec<f64>) = sig
        .iter()
        .zip(inp.iter().zip(&out))
        .filter(|(s, _)| **s >= lo && **s <= hi)
        .map(|(_, (&i, &o))| (i, o))
        .unzip();
    Ok(fit_line(&x, &y)?.slope)
}
