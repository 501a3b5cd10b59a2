//! Exact local linear maps of a denoiser around one input.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Mode, Model, Trace};
use crate::tape::{GradScope, ReluMaskRecord};
use crate::tensor::Tensor;

/// Largest image (in pixels) [`jacobian_full`] accepts.
pub const MAX_JACOBIAN_PIXELS: usize = 4096;

/// `f(y) = A y + b` at one input, in 64-bit.
#[derive(Clone, Debug)]
pub struct LocalLinearModel {
    /// `[N,N]`; row `k` is the adaptive filter of output pixel `k`.
    pub a: Tensor<f64>,
    /// `[N]` net bias `f(y) - A y`.
    pub b: Tensor<f64>,
    /// `[1,H,W]` input after the architecture's crop rule.
    pub y: Tensor<f64>,
    /// `[1,H,W]` network output `f(y)`.
    pub f: Tensor<f64>,
    pub mask_record: ReluMaskRecord,
    pub height: usize,
    pub width: usize,
}

impl LocalLinearModel {
    pub fn n(&self) -> usize {
        self.height * self.width
    }

    /// `A v` for a flattened image `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        self.a
            .data()
            .chunks(n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `‖f(y) − A y‖ / ‖f(y)‖`.
    pub fn linear_residual(&self) -> f64 {
        let ay = self.apply(self.y.data());
        let diff: f64 = self
            .f
            .data()
            .iter()
            .zip(&ay)
            .map(|(f, a)| (f - a).powi(2))
            .sum::<f64>()
            .sqrt();
        diff / self.f.norm()
    }

    /// Row `(i,j)` reshaped to `[H,W]`.
    pub fn filter(&self, i: usize, j: usize) -> Result<Tensor<f64>> {
        let k = pixel_index(i, j, self.height, self.width)?;
        let n = self.n();
        Tensor::new(
            vec![self.height, self.width],
            self.a.data()[k * n..(k + 1) * n].to_vec(),
        )
    }
}

fn pixel_index(i: usize, j: usize, h: usize, w: usize) -> Result<usize> {
    if i >= h || j >= w {
        return Err(Error::invalid(format!(
            "pixel ({i},{j}) lies outside the {h}x{w} image"
        )));
    }
    Ok(i * w + j)
}

/// Infer-mode 64-bit trace of a single image.
pub fn trace64(model: &Model, y: &Tensor<f64>) -> Result<Trace<f64>> {
    let trace = model.trace(y, Mode::Infer)?;
    let (b, c, _, _) = trace.output_value().dims4()?;
    if b != 1 || c != 1 {
        return Err(Error::shape(format!(
            "analysis works on one single-channel image, got batch {b} with {c} channels"
        )));
    }
    Ok(trace)
}

fn vjp_row(trace: &Trace<f64>, k: usize, h: usize, w: usize) -> Result<Vec<f64>> {
    let cot = Tensor::one_hot(vec![1, 1, h, w], k);
    let mut g = trace.tape.backward_with(trace.output, &cot, GradScope::InputsOnly)?;
    Ok(g.take(trace.input).expect("input gradient").into_data())
}

fn spatial(trace: &Trace<f64>) -> (usize, usize) {
    let s = trace.output_value().shape();
    (s[2], s[3])
}

/// Adaptive filter of output pixel `(i,j)`: one vector-Jacobian product
/// with a one-hot cotangent, reshaped to `[H,W]`.
pub fn jacobian_row(model: &Model, y: &Tensor<f64>, pixel: (usize, usize)) -> Result<Tensor<f64>> {
    let trace = trace64(model, y)?;
    let (h, w) = spatial(&trace);
    let k = pixel_index(pixel.0, pixel.1, h, w)?;
    Tensor::new(vec![h, w], vjp_row(&trace, k, h, w)?)
}

/// Assemble `A` row by row (`N` backward passes, parallel over rows) and
/// set `b = f(y) − A y`.
pub fn jacobian_full(model: &Model, y: &Tensor<f64>) -> Result<LocalLinearModel> {
    let trace = trace64(model, y)?;
    let (h, w) = spatial(&trace);
    let n = h * w;
    if n > MAX_JACOBIAN_PIXELS {
        return Err(Error::invalid(format!(
            "a {h}x{w} image has {n} pixels, above the {MAX_JACOBIAN_PIXELS}-pixel Jacobian limit; crop it (e.g. to 40x40)"
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| vjp_row(&trace, k, h, w))
        .collect::<Result<_>>()?;
    let a = Tensor::new(vec![n, n], rows.concat())?;
    let y = trace.tape.value(trace.input).clone().reshape(vec![1, h, w])?;
    let f = trace.output_value().clone().reshape(vec![1, h, w])?;
    let mut lm = LocalLinearModel {
        a,
        b: Tensor::zeros(vec![n]),
        y,
        f,
        mask_record: trace.tape.mask_record(),
        height: h,
        width: w,
    };
    let ay = lm.apply(lm.y.data());
    lm.b = Tensor::new(
        vec![n],
        lm.f.data().iter().zip(&ay).map(|(f, a)| f - a).collect(),
    )?;
    Ok(lm)
}

/// The network at `y` with every ReLU mask and normalization statistic
/// frozen, applied to `v`.
pub fn frozen_response(model: &Model, y: &Tensor<f64>, v: &Tensor<f64>) -> Result<Tensor<f64>> {
    let trace = trace64(model, y)?;
    let v = model.crop_for_arch(v)?;
    trace.tape.replay_frozen(trace.output, &[(trace.input, &v)])
}

/// Net bias `b_y = f_frozen(0)` without assembling `A`.
pub fn net_bias(model: &Model, y: &Tensor<f64>) -> Result<Tensor<f64>> {
    let trace = trace64(model, y)?;
    let zero = Tensor::zeros(trace.tape.value(trace.input).shape().to_vec());
    trace.tape.replay_frozen(trace.output, &[(trace.input, &zero)])
}

/// `max_α ‖f(αy) − α f(y)‖ / (‖α f(y)‖ + 1e-12)` in 64-bit infer mode.
/// At `α = 0` the denominator is `‖f(y)‖` instead.
pub fn homogeneity_deviation(model: &Model, y: &Tensor<f64>, alphas: &[f64]) -> Result<f64> {
    let base = model.forward(y, Mode::Infer)?;
    let mut worst = 0.0f64;
    for &alpha in alphas {
        let out = model.forward(&y.scale(alpha), Mode::Infer)?;
        let expect = base.scale(alpha);
        let num = out.sub(&expect)?.norm();
        let scale = if alpha == 0.0 { base.norm() } else { expect.norm() };
        worst = worst.max(num / (scale + 1e-12));
    }
    Ok(worst)
}
