//! Denoiser architectures with an additive-parameter toggle.
//!
//! Every architecture maps a `[1,H,W]` (or `[B,1,H,W]`) image on the
//! `[0,255]` intensity scale to an image of the same scale. Internally the
//! input is multiplied by `1/255` and the output by `255`; both are linear,
//! so a model without additive parameters stays positively homogeneous.

mod checkpoint;
mod config;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load, load_from_bytes, save, save_to_bytes, CHECKPOINT_MAGIC};
pub use config::{Arch, ModelConfig, Precision};

use crate::conv::ConvSpec;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tape::{NormMode, NormStats, Tape, Var};
use crate::tensor::{Real, Tensor};

/// Multiplier applied to the input before the first layer.
pub const INPUT_SCALE: f64 = 1.0 / 255.0;
/// Exponential moving-average decay of running normalization statistics.
pub const RUNNING_DECAY: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Weight,
    Bias,
    Gain,
    Shift,
    RunningScale,
    RunningMean,
}

impl ParamRole {
    /// Whether the optimizer updates this tensor.
    pub fn trainable(self) -> bool {
        matches!(
            self,
            ParamRole::Weight | ParamRole::Bias | ParamRole::Gain | ParamRole::Shift
        )
    }

    /// Whether the tensor adds a constant to the layer output.
    pub fn additive(self) -> bool {
        matches!(
            self,
            ParamRole::Bias | ParamRole::Shift | ParamRole::RunningMean
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub role: ParamRole,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Param {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::new(
            self.shape.clone(),
            self.data.iter().map(|&v| T::from_f64_lossy(v as f64)).collect(),
        )
        .expect("param shape")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Conv {
        spec: ConvSpec,
        weight: usize,
        bias: Option<usize>,
    },
    Norm {
        gain: usize,
        shift: Option<usize>,
        running_scale: usize,
        running_mean: Option<usize>,
    },
}

/// One layer and the indices of the parameters it owns.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerRecord {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerRecord {
    pub fn param_indices(&self) -> Vec<usize> {
        match &self.kind {
            LayerKind::Conv { weight, bias, .. } => {
                std::iter::once(*weight).chain(*bias).collect()
            }
            LayerKind::Norm {
                gain,
                shift,
                running_scale,
                running_mean,
            } => std::iter::once(*gain)
                .chain(*shift)
                .chain(std::iter::once(*running_scale))
                .chain(*running_mean)
                .collect(),
        }
    }
}

/// Training provenance carried into checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub training_step: u64,
    /// `[sigma_min, sigma_max]` of the training noise.
    pub train_sigma: Option<[f64; 2]>,
    pub noise: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: Vec<Param>,
    layers: Vec<LayerRecord>,
    pub provenance: Provenance,
}

/// A recorded forward pass.
#[derive(Debug)]
pub struct Trace<T> {
    pub tape: Tape<T>,
    pub input: Var,
    pub output: Var,
    /// Tape leaf of each model parameter that took part, indexed like
    /// [`Model::params`].
    pub param_vars: Vec<Option<Var>>,
    /// Batch statistics of every normalization layer (train mode only).
    pub norm_stats: Vec<(usize, NormStats<T>)>,
}

impl<T: Real> Trace<T> {
    pub fn output_value(&self) -> &Tensor<T> {
        self.tape.value(self.output)
    }
}

struct Builder<'a> {
    params: Vec<Param>,
    layers: Vec<LayerRecord>,
    rng: &'a mut Rng,
    bias: bool,
}

impl Builder<'_> {
    fn push_param(&mut self, name: String, role: ParamRole, shape: Vec<usize>, data: Vec<f32>) -> usize {
        self.params.push(Param {
            name,
            role,
            shape,
            data,
        });
        self.params.len() - 1
    }

    /// He-style fan-in scaled Gaussian weights; zero bias when `with_bias`.
    fn conv(&mut self, name: &str, c_in: usize, c_out: usize, spec: ConvSpec, with_bias: bool) {
        let shape = if spec.transpose {
            vec![c_in, c_out, spec.kh, spec.kw]
        } else {
            vec![c_out, c_in, spec.kh, spec.kw]
        };
        let fan_in = if spec.transpose {
            (c_in * spec.kh * spec.kw / (spec.stride * spec.stride)).max(1)
        } else {
            c_in * spec.kh * spec.kw
        };
        let std = (2.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| (self.rng.normal() * std) as f32).collect();
        let weight = self.push_param(format!("{name}.weight"), ParamRole::Weight, shape, data);
        let bias = (with_bias && self.bias).then(|| {
            self.push_param(
                format!("{name}.bias"),
                ParamRole::Bias,
                vec![c_out],
                vec![0.0; c_out],
            )
        });
        self.layers.push(LayerRecord {
            name: name.to_string(),
            kind: LayerKind::Conv { spec, weight, bias },
        });
    }

    fn norm(&mut self, name: &str, channels: usize) {
        let gain = self.push_param(
            format!("{name}.gain"),
            ParamRole::Gain,
            vec![channels],
            vec![1.0; channels],
        );
        let shift = self.bias.then(|| {
            self.push_param(
                format!("{name}.shift"),
                ParamRole::Shift,
                vec![channels],
                vec![0.0; channels],
            )
        });
        let running_scale = self.push_param(
            format!("{name}.running_scale"),
            ParamRole::RunningScale,
            vec![channels],
            vec![1.0; channels],
        );
        let running_mean = self.bias.then(|| {
            self.push_param(
                format!("{name}.running_mean"),
                ParamRole::RunningMean,
                vec![channels],
                vec![0.0; channels],
            )
        });
        self.layers.push(LayerRecord {
            name: name.to_string(),
            kind: LayerKind::Norm {
                gain,
                shift,
                running_scale,
                running_mean,
            },
        });
    }
}

impl Model {
    /// Construct and initialize a model.
    pub fn build(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut b = Builder {
            params: Vec::new(),
            layers: Vec::new(),
            rng,
            bias: config.bias_enabled,
        };
        let c = config.channels;
        let k3 = ConvSpec::same(3);
        match config.arch {
            Arch::Dncnn => {
                let depth = config.depth;
                for l in 1..=depth {
                    let c_in = if l == 1 { 1 } else { c };
                    let c_out = if l == depth { 1 } else { c };
                    let normed = config.norm_enabled && l > 1 && l < depth;
                    // A following normalization subsumes the conv bias.
                    b.conv(&format!("conv{l}"), c_in, c_out, k3, !normed);
                    if normed {
                        b.norm(&format!("norm{l}"), c);
                    }
                }
            }
            Arch::Rcnn => {
                let depth = config.depth;
                for l in 1..=depth {
                    let c_in = if l == 1 { 2 } else { c };
                    let c_out = if l == depth { 1 } else { c };
                    b.conv(&format!("body.conv{l}"), c_in, c_out, k3, l < depth);
                }
            }
            Arch::Unet => {
                let half = c / 2;
                b.conv("conv1", 1, half, ConvSpec::same(5), true);
                b.conv("conv2", half, half, k3, true);
                b.conv("conv3", half, c, ConvSpec::strided(3, 2, 1), true);
                b.conv("conv4", c, c, k3, true);
                b.conv("conv5", c, c, ConvSpec::same_dilated(3, 2), true);
                b.conv("conv6", c, c, ConvSpec::same_dilated(3, 4), true);
                b.conv("conv7", c, c, ConvSpec::transposed(4, 2, 1), true);
                b.conv("conv8", c + half, c, k3, true);
                b.conv("conv9", c, 1, ConvSpec::same(5), false);
            }
            Arch::Densenet => {
                let depth = config.depth;
                for blk in 1..=4 {
                    for l in 1..=depth {
                        let c_in = match (blk, l) {
                            (1, 1) => 1,
                            (_, 1) => c + 1,
                            _ => c,
                        };
                        let last_layer = l == depth;
                        let c_out = if last_layer && blk == 4 { 1 } else { c };
                        b.conv(
                            &format!("block{blk}.conv{l}"),
                            c_in,
                            c_out,
                            k3,
                            !(blk == 4 && last_layer),
                        );
                    }
                }
            }
        }
        Ok(Self {
            config: config.clone(),
            params: b.params,
            layers: b.layers,
            provenance: Provenance::default(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn arch(&self) -> Arch {
        self.config.arch
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn layers(&self) -> &[LayerRecord] {
        &self.layers
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.role.trainable())
            .map(Param::len)
            .sum()
    }

    /// Number of stored additive scalars (biases, shifts, running means).
    pub fn additive_parameter_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.role.additive())
            .map(Param::len)
            .sum()
    }

    pub fn trainable_indices(&self) -> Vec<usize> {
        (0..self.params.len())
            .filter(|&i| self.params[i].role.trainable())
            .collect()
    }

    /// Radius of the output pixel's dependence on input pixels, when the
    /// architecture has a small fixed one.
    pub fn receptive_radius(&self) -> Option<usize> {
        match self.config.arch {
            Arch::Dncnn => Some(self.config.depth),
            Arch::Rcnn => Some(self.config.depth * self.config.recurrence_t_max),
            Arch::Densenet => Some(4 * self.config.depth),
            Arch::Unet => None,
        }
    }

    /// Smallest accepted spatial extent.
    pub fn min_extent(&self) -> usize {
        match self.config.arch {
            Arch::Unet => 2,
            _ => 1,
        }
    }

    /// Drop the last row/column of odd-sized inputs for `unet`; identity
    /// for the other architectures.
    pub fn crop_for_arch<T: Real>(&self, y: &Tensor<T>) -> Result<Tensor<T>> {
        if self.config.arch != Arch::Unet {
            return Ok(y.clone());
        }
        let (b, c, h, w) = y.dims4()?;
        let (nh, nw) = (h - h % 2, w - w % 2);
        if (nh, nw) == (h, w) {
            return Ok(y.clone());
        }
        let mut data = Vec::with_capacity(b * c * nh * nw);
        for plane in y.data().chunks(h * w) {
            for row in plane.chunks(w).take(nh) {
                data.extend_from_slice(&row[..nw]);
            }
        }
        let shape = if y.shape().len() == 3 {
            vec![c, nh, nw]
        } else {
            vec![b, c, nh, nw]
        };
        Tensor::new(shape, data)
    }

    /// Denoise `y`; the result has `y`'s rank (after the `unet` crop rule).
    pub fn forward<T: Real>(&self, y: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let trace = self.trace(y, mode)?;
        let out = trace.output_value().clone();
        if y.shape().len() == 3 {
            let s = out.shape()[1..].to_vec();
            out.reshape(s)
        } else {
            Ok(out)
        }
    }

    /// `rcnn` with an explicit number of recurrence steps.
    pub fn forward_recurrent<T: Real>(&self, y: &Tensor<T>, steps: usize, mode: Mode) -> Result<Tensor<T>> {
        let trace = self.trace_recurrent(y, mode, steps)?;
        let out = trace.output_value().clone();
        if y.shape().len() == 3 {
            let s = out.shape()[1..].to_vec();
            out.reshape(s)
        } else {
            Ok(out)
        }
    }

    /// Record a forward pass on a fresh tape. `rcnn` runs
    /// `recurrence_t_max` steps.
    pub fn trace<T: Real>(&self, y: &Tensor<T>, mode: Mode) -> Result<Trace<T>> {
        self.trace_steps(y, mode, self.config.recurrence_t_max)
    }

    pub fn trace_recurrent<T: Real>(&self, y: &Tensor<T>, mode: Mode, steps: usize) -> Result<Trace<T>> {
        if self.config.arch != Arch::Rcnn {
            return Err(Error::config(format!(
                "recurrent forward requires rcnn, model is {}",
                self.config.arch.name()
            )));
        }
        if steps == 0 {
            return Err(Error::invalid("recurrence steps must be >= 1"));
        }
        self.trace_steps(y, mode, steps)
    }

    fn trace_steps<T: Real>(&self, y: &Tensor<T>, mode: Mode, steps: usize) -> Result<Trace<T>> {
        let y = self.crop_for_arch(y)?;
        let (_, c, h, w) = y.dims4()?;
        if c != 1 {
            return Err(Error::shape(format!(
                "models take single-channel images, got {c} channels"
            )));
        }
        let min = self.min_extent();
        if h < min || w < min {
            return Err(Error::shape(format!(
                "{} needs spatial extents of at least {min}x{min}, got {h}x{w}",
                self.config.arch.name()
            )));
        }
        let mut run = Run {
            model: self,
            tape: Tape::new(),
            param_vars: vec![None; self.params.len()],
            norm_stats: Vec::new(),
            mode,
        };
        let input = run.tape.input(y)?;
        let output = run.network(input, steps)?;
        Ok(Trace {
            tape: run.tape,
            input,
            output,
            param_vars: run.param_vars,
            norm_stats: run.norm_stats,
        })
    }

    /// Fold train-mode batch statistics into the running estimates.
    pub fn update_running_stats<T: Real>(&mut self, stats: &[(usize, NormStats<T>)]) {
        let decay = RUNNING_DECAY as f32;
        for (layer, s) in stats {
            let LayerKind::Norm {
                running_scale,
                running_mean,
                ..
            } = self.layers[*layer].kind
            else {
                continue;
            };
            for (r, &b) in self.params[running_scale].data.iter_mut().zip(&s.scale) {
                *r = decay * *r + (1.0 - decay) * b.to_f64_lossy() as f32;
            }
            if let (Some(idx), Some(mean)) = (running_mean, &s.mean) {
                for (r, &b) in self.params[idx].data.iter_mut().zip(mean) {
                    *r = decay * *r + (1.0 - decay) * b.to_f64_lossy() as f32;
                }
            }
        }
    }
}

struct Run<'m, T> {
    model: &'m Model,
    tape: Tape<T>,
    param_vars: Vec<Option<Var>>,
    norm_stats: Vec<(usize, NormStats<T>)>,
    mode: Mode,
}

impl<T: Real> Run<'_, T> {
    fn param(&mut self, idx: usize) -> Var {
        if let Some(v) = self.param_vars[idx] {
            return v;
        }
        let v = self.tape.param(self.model.params[idx].tensor());
        self.param_vars[idx] = Some(v);
        v
    }

    fn running(&self, idx: usize) -> Vec<T> {
        self.model.params[idx]
            .data
            .iter()
            .map(|&v| T::from_f64_lossy(v as f64))
            .collect()
    }

    fn layer(&mut self, li: usize, x: Var) -> Result<Var> {
        match self.model.layers[li].kind.clone() {
            LayerKind::Conv { spec, weight, bias } => {
                let w = self.param(weight);
                let b = bias.map(|b| self.param(b));
                self.tape.conv2d(x, w, b, spec)
            }
            LayerKind::Norm {
                gain,
                shift,
                running_scale,
                running_mean,
            } => {
                let g = self.param(gain);
                let s = shift.map(|s| self.param(s));
                let (out, stats) = match self.mode {
                    Mode::Train => self.tape.scale_norm(x, g, s, NormMode::Train)?,
                    Mode::Infer => {
                        let scale = self.running(running_scale);
                        let mean = running_mean.map(|m| self.running(m));
                        self.tape.scale_norm(
                            x,
                            g,
                            s,
                            NormMode::Infer {
                                scale: &scale,
                                mean: mean.as_deref(),
                            },
                        )?
                    }
                };
                if let Some(stats) = stats {
                    self.norm_stats.push((li, stats));
                }
                Ok(out)
            }
        }
    }

    /// Conv layers in `range`, each followed by its normalization (if any)
    /// and a ReLU; the final conv of the range gets no ReLU unless
    /// `final_relu`.
    fn stack(&mut self, x: Var, range: Range<usize>, final_relu: bool) -> Result<Var> {
        let mut h = x;
        let end = range.end;
        let mut li = range.start;
        while li < end {
            h = self.layer(li, h)?;
            li += 1;
            if li < end && matches!(self.model.layers[li].kind, LayerKind::Norm { .. }) {
                h = self.layer(li, h)?;
                li += 1;
            }
            if li < end || final_relu {
                h = self.tape.relu(h);
            }
        }
        Ok(h)
    }

    fn network(&mut self, y: Var, steps: usize) -> Result<Var> {
        let down = T::from_f64_lossy(INPUT_SCALE);
        let up = T::from_f64_lossy(1.0 / INPUT_SCALE);
        let n_layers = self.model.layers.len();
        match self.model.config.arch {
            Arch::Dncnn => {
                let ys = self.tape.scale(y, down);
                let r = self.stack(ys, 0..n_layers, false)?;
                let r = self.tape.scale(r, up);
                self.tape.add(y, r)
            }
            Arch::Rcnn => {
                let ys = self.tape.scale(y, down);
                let mut est = ys;
                for _ in 0..steps {
                    let fused = self.tape.concat_channels(est, ys)?;
                    est = self.stack(fused, 0..n_layers, false)?;
                }
                Ok(self.tape.scale(est, up))
            }
            Arch::Unet => {
                let ys = self.tape.scale(y, down);
                let mut acts = Vec::with_capacity(9);
                let mut h = ys;
                for li in 0..7 {
                    h = self.layer(li, h)?;
                    h = self.tape.relu(h);
                    acts.push(h);
                }
                let skip = self.tape.concat_channels(acts[6], acts[1])?;
                let h = self.layer(7, skip)?;
                let h = self.tape.relu(h);
                let h = self.layer(8, h)?;
                Ok(self.tape.scale(h, up))
            }
            Arch::Densenet => {
                let ys = self.tape.scale(y, down);
                let per_block = self.model.config.depth;
                let mut h = ys;
                for blk in 0..4 {
                    let input = if blk == 0 {
                        ys
                    } else {
                        self.tape.concat_channels(h, ys)?
                    };
                    h = self.stack(input, blk * per_block..(blk + 1) * per_block, false)?;
                }
                Ok(self.tape.scale(h, up))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(h: usize, w: usize, seed: u64) -> Tensor<f64> {
        let mut rng = Rng::new(seed);
        Tensor::from_fn(vec![1, h, w], |_| rng.uniform(0.0, 255.0))
    }

    #[test]
    fn full_dncnn_has_twenty_3x3_convs() {
        let m = Model::build(&ModelConfig::full(Arch::Dncnn), &mut Rng::new(0)).unwrap();
        let convs: Vec<_> = m
            .layers()
            .iter()
            .filter_map(|l| match &l.kind {
                LayerKind::Conv { spec, weight, .. } => Some((spec, &m.params()[*weight].shape)),
                _ => None,
            })
            .collect();
        assert_eq!(convs.len(), 20);
        assert!(convs.iter().all(|(s, _)| s.kh == 3 && s.kw == 3));
        assert_eq!(convs[0].1, &vec![64, 1, 3, 3]);
        assert_eq!(convs[10].1, &vec![64, 64, 3, 3]);
        assert_eq!(convs[19].1, &vec![1, 64, 3, 3]);
        let norms = m
            .layers()
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Norm { .. }))
            .count();
        assert_eq!(norms, 18);
    }

    #[test]
    fn full_unet_layer_table() {
        let m = Model::build(&ModelConfig::full(Arch::Unet), &mut Rng::new(0)).unwrap();
        let shapes: Vec<(String, Vec<usize>, ConvSpec)> = m
            .layers()
            .iter()
            .map(|l| match &l.kind {
                LayerKind::Conv { spec, weight, .. } => {
                    (l.name.clone(), m.params()[*weight].shape.clone(), *spec)
                }
                _ => panic!("unet has no normalization"),
            })
            .collect();
        let expect: [(&str, [usize; 4]); 9] = [
            ("conv1", [32, 1, 5, 5]),
            ("conv2", [32, 32, 3, 3]),
            ("conv3", [64, 32, 3, 3]),
            ("conv4", [64, 64, 3, 3]),
            ("conv5", [64, 64, 3, 3]),
            ("conv6", [64, 64, 3, 3]),
            ("conv7", [64, 64, 4, 4]),
            ("conv8", [64, 96, 3, 3]),
            ("conv9", [1, 64, 5, 5]),
        ];
        for ((name, shape, _), (en, es)) in shapes.iter().zip(expect) {
            assert_eq!(name, en);
            assert_eq!(shape.as_slice(), es.as_slice(), "{name}");
        }
        assert_eq!(shapes[2].2.stride, 2);
        assert_eq!(shapes[4].2.dilation, 2);
        assert_eq!(shapes[5].2.dilation, 4);
        assert!(shapes[6].2.transpose && shapes[6].2.stride == 2);
    }

    #[test]
    fn full_densenet_and_rcnn_tables() {
        let m = Model::build(&ModelConfig::full(Arch::Densenet), &mut Rng::new(0)).unwrap();
        assert_eq!(m.layers().len(), 20);
        let w = |name: &str| {
            m.params()
                .iter()
                .find(|p| p.name == format!("{name}.weight"))
                .unwrap()
                .shape
                .clone()
        };
        assert_eq!(w("block1.conv1"), vec![64, 1, 3, 3]);
        assert_eq!(w("block2.conv1"), vec![64, 65, 3, 3]);
        assert_eq!(w("block3.conv5"), vec![64, 64, 3, 3]);
        assert_eq!(w("block4.conv5"), vec![1, 64, 3, 3]);
        assert!(m.params().iter().all(|p| p.name != "block4.conv5.bias"));
        assert!(m.params().iter().any(|p| p.name == "block4.conv4.bias"));

        let r = Model::build(&ModelConfig::full(Arch::Rcnn), &mut Rng::new(0)).unwrap();
        assert_eq!(r.layers().len(), 5);
        assert_eq!(r.params()[0].shape, vec![64, 2, 3, 3]);
        assert!(r.params().iter().all(|p| p.name != "body.conv5.bias"));
    }

    #[test]
    fn bias_free_models_store_no_additive_parameters() {
        for arch in Arch::ALL {
            let cfg = ModelConfig::desk(arch).with_bias(false);
            let m = Model::build(&cfg, &mut Rng::new(1)).unwrap();
            assert_eq!(m.additive_parameter_count(), 0, "{arch:?}");
            let biased = Model::build(&cfg.clone().with_bias(true), &mut Rng::new(1)).unwrap();
            assert!(biased.additive_parameter_count() > 0, "{arch:?}");
        }
    }

    #[test]
    fn build_is_deterministic() {
        let cfg = ModelConfig::desk(Arch::Unet);
        let a = Model::build(&cfg, &mut Rng::new(9)).unwrap();
        let b = Model::build(&cfg, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unsupported_combinations_are_rejected() {
        let mut cfg = ModelConfig::desk(Arch::Unet);
        cfg.norm_enabled = true;
        assert!(Model::build(&cfg, &mut Rng::new(0)).is_err());
        let mut cfg = ModelConfig::desk(Arch::Dncnn);
        cfg.depth = 1;
        assert!(Model::build(&cfg, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn bias_free_zero_input_maps_to_zero() {
        for arch in Arch::ALL {
            let cfg = ModelConfig::desk(arch).with_bias(false);
            let m = Model::build(&cfg, &mut Rng::new(2)).unwrap();
            let out = m
                .forward(&Tensor::<f64>::zeros(vec![1, 8, 8]), Mode::Infer)
                .unwrap();
            assert!(out.data().iter().all(|&v| v == 0.0), "{arch:?}");
        }
    }

    #[test]
    fn zero_weight_dncnn_is_identity() {
        let cfg = ModelConfig::desk(Arch::Dncnn).with_bias(true);
        let mut m = Model::build(&cfg, &mut Rng::new(3)).unwrap();
        for p in m.params_mut() {
            if matches!(p.role, ParamRole::Weight | ParamRole::Bias | ParamRole::Shift) {
                p.data.fill(0.0);
            }
        }
        let y = image(6, 7, 4);
        let out = m.forward(&y, Mode::Infer).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn recurrent_steps() {
        let cfg = ModelConfig::desk(Arch::Rcnn).with_bias(false);
        let m = Model::build(&cfg, &mut Rng::new(5)).unwrap();
        let y = image(6, 6, 6);
        assert!(m.forward_recurrent(&y, 0, Mode::Infer).is_err());

        // One step equals one body application on concat(y, y).
        let one = m.forward_recurrent(&y, 1, Mode::Infer).unwrap();
        let mut tape = Tape::<f64>::new();
        let x = tape.input(y.scale(INPUT_SCALE)).unwrap();
        let fused = tape.concat_channels(x, x).unwrap();
        let mut h = fused;
        for (i, layer) in m.layers().iter().enumerate() {
            let LayerKind::Conv { spec, weight, .. } = layer.kind else { unreachable!() };
            let wv = tape.param(m.params()[weight].tensor());
            h = tape.conv2d(h, wv, None, spec).unwrap();
            if i + 1 < m.layers().len() {
                h = tape.relu(h);
            }
        }
        let manual = tape.value(h).scale(255.0);
        assert!(one.rel_diff(&manual.reshape(vec![1, 6, 6]).unwrap()).unwrap() < 1e-12);

        // A zero body outputs zeros for every T >= 1.
        let mut z = m.clone();
        for p in z.params_mut() {
            p.data.fill(0.0);
        }
        for t in 1..=4 {
            let out = z.forward_recurrent(&y, t, Mode::Infer).unwrap();
            assert!(out.data().iter().all(|&v| v == 0.0));
        }

        let d = Model::build(&ModelConfig::desk(Arch::Dncnn), &mut Rng::new(0)).unwrap();
        assert!(d.forward_recurrent(&y, 2, Mode::Infer).is_err());
    }

    #[test]
    fn unet_crops_odd_sizes() {
        let m = Model::build(&ModelConfig::desk(Arch::Unet), &mut Rng::new(0)).unwrap();
        let y = image(9, 12, 1);
        let out = m.forward(&y, Mode::Infer).unwrap();
        assert_eq!(out.shape(), &[1, 8, 12]);
        assert!(m.forward(&image(1, 1, 1), Mode::Infer).is_err());
    }

    #[test]
    fn running_stats_follow_the_moving_average() {
        let cfg = ModelConfig::desk(Arch::Dncnn).with_bias(false);
        let mut m = Model::build(&cfg, &mut Rng::new(0)).unwrap();
        let y = image(8, 8, 2);
        let trace = m.trace(&y, Mode::Train).unwrap();
        assert_eq!(trace.norm_stats.len(), cfg.depth - 2);
        let (layer, stats) = trace.norm_stats[0].clone();
        m.update_running_stats(&trace.norm_stats);
        let LayerKind::Norm { running_scale, .. } = m.layers()[layer].kind else {
            panic!()
        };
        let got = m.params()[running_scale].data[0] as f64;
        let want = 0.9 + 0.1 * stats.scale[0];
        assert!((got - want).abs() < 1e-6);
    }
}
