//! Recorded computation graph with a reverse (vector-Jacobian) pass.
//!
//! The tape stores every value it produces together with the context its
//! adjoint needs: ReLU masks, normalization divisors and means. Besides
//! `backward`, a finished tape can be *replayed* on a new input with every
//! ReLU frozen to its recorded mask and every normalization frozen to its
//! recorded statistics. That frozen network is the affine map
//! `y ↦ A y + b` the network realizes around the recorded input.

use crate::conv::{ConvPlan, ConvSpec};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Handle to a value on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Binary activation mask of one ReLU site (`true` where the
/// pre-activation was strictly positive).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReluMask {
    pub shape: Vec<usize>,
    pub active: Vec<bool>,
}

/// One mask per ReLU site, in execution order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReluMaskRecord {
    pub masks: Vec<ReluMask>,
}

impl ReluMaskRecord {
    pub fn active_count(&self) -> usize {
        self.masks
            .iter()
            .map(|m| m.active.iter().filter(|&&a| a).count())
            .sum()
    }
}

/// Statistics a normalization site divides by (and, when centered,
/// subtracts).
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats<T> {
    pub scale: Vec<T>,
    pub mean: Option<Vec<T>>,
}

/// Whether a normalization site computes batch statistics or uses frozen
/// running ones.
#[derive(Clone, Copy, Debug)]
pub enum NormMode<'a, T> {
    Train,
    Infer {
        scale: &'a [T],
        mean: Option<&'a [T]>,
    },
}

/// Stabilizer added to the variance of centered (biased) normalization.
pub const CENTERED_NORM_EPS: f64 = 1e-5;
/// Channels whose divisor falls below this are rejected.
pub const MIN_NORM_SCALE: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Op<T> {
    Input,
    Param,
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        spec: ConvSpec,
    },
    Relu {
        x: Var,
        site: usize,
    },
    Norm {
        x: Var,
        gain: Var,
        shift: Option<Var>,
        stats: NormStats<T>,
        batch_stats: bool,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: T,
    },
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Which leaves receive gradients in [`Tape::backward_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradScope {
    /// Inputs and parameters.
    All,
    /// Inputs only; parameter adjoints are skipped entirely.
    InputsOnly,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    masks: Vec<ReluMask>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            masks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn mask_record(&self) -> ReluMaskRecord {
        ReluMaskRecord {
            masks: self.masks.clone(),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input leaf; always receives a gradient. Rank-3 values are promoted to
    /// a batch of one.
    pub fn input(&mut self, value: Tensor<T>) -> Result<Var> {
        let value = promote4(value)?;
        Ok(self.push(value, Op::Input))
    }

    /// Parameter leaf; receives a gradient under [`GradScope::All`].
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Param)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(w);
        let plan = ConvPlan::new(xv.shape(), wv.shape(), &spec)?;
        let bias = match b {
            Some(b) => {
                let bv = self.value(b);
                if bv.shape() != [plan.out_shape.0] {
                    return Err(Error::shape(format!(
                        "bias shape {:?} must be [{}] (output channels)",
                        bv.shape(),
                        plan.out_shape.0
                    )));
                }
                Some(bv.data())
            }
            None => None,
        };
        let out = plan.forward(xv.data(), wv.data(), bias);
        let out = Tensor::new(plan.output_shape(), out)?;
        Ok(self.push(out, Op::Conv { x, w, b, spec }))
    }

    /// `max(x, 0)`; records the strict-positivity mask.
    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let active: Vec<bool> = xv.data().iter().map(|&v| v > T::zero()).collect();
        let out = Tensor::new(
            xv.shape().to_vec(),
            xv.data()
                .iter()
                .zip(&active)
                .map(|(&v, &a)| if a { v } else { T::zero() })
                .collect(),
        )
        .expect("same shape");
        self.masks.push(ReluMask {
            shape: xv.shape().to_vec(),
            active,
        });
        let site = self.masks.len() - 1;
        self.push(out, Op::Relu { x, site })
    }

    /// Per-channel normalization.
    ///
    /// Without `shift` this is the scale-only variant: divide by the channel
    /// root-mean-square (no centering) and multiply by `gain`. With `shift`
    /// it is standard batch normalization. In train mode the batch
    /// statistics are returned so the caller can update running estimates.
    pub fn scale_norm(
        &mut self,
        x: Var,
        gain: Var,
        shift: Option<Var>,
        mode: NormMode<'_, T>,
    ) -> Result<(Var, Option<NormStats<T>>)> {
        let xv = self.value(x);
        let (b, c, h, w) = xv.dims4()?;
        let gv = self.value(gain);
        if gv.shape() != [c] {
            return Err(Error::shape(format!(
                "normalization gain shape {:?} must be [{c}]",
                gv.shape()
            )));
        }
        if let Some(s) = shift {
            if self.value(s).shape() != [c] {
                return Err(Error::shape(format!(
                    "normalization shift shape {:?} must be [{c}]",
                    self.value(s).shape()
                )));
            }
        }
        let centered = shift.is_some();
        let plane = h * w;
        let (stats, batch_stats) = match mode {
            NormMode::Train => {
                let count = T::from_usize(b * plane).expect("count");
                let mut scale = Vec::with_capacity(c);
                let mut means = Vec::with_capacity(c);
                for ch in 0..c {
                    let chan = || {
                        (0..b).flat_map(move |n| {
                            let start = (n * c + ch) * plane;
                            xv.data()[start..start + plane].iter().copied()
                        })
                    };
                    let mean = if centered {
                        chan().sum::<T>() / count
                    } else {
                        T::zero()
                    };
                    let var = chan().map(|v| (v - mean) * (v - mean)).sum::<T>() / count;
                    let s = if centered {
                        (var + T::from_f64_lossy(CENTERED_NORM_EPS)).sqrt()
                    } else {
                        var.sqrt()
                    };
                    if !(s.to_f64_lossy() >= MIN_NORM_SCALE) {
                        return Err(Error::DegenerateChannel {
                            channel: ch,
                            scale: s.to_f64_lossy(),
                        });
                    }
                    scale.push(s);
                    means.push(mean);
                }
                (
                    NormStats {
                        scale,
                        mean: centered.then_some(means),
                    },
                    true,
                )
            }
            NormMode::Infer { scale, mean } => {
                if scale.len() != c {
                    return Err(Error::shape(format!(
                        "running scale has {} channels, activation has {c}",
                        scale.len()
                    )));
                }
                if let Some((ch, &s)) = scale
                    .iter()
                    .enumerate()
                    .find(|(_, &s)| !(s.to_f64_lossy() >= MIN_NORM_SCALE))
                {
                    return Err(Error::DegenerateChannel {
                        channel: ch,
                        scale: s.to_f64_lossy(),
                    });
                }
                let mean = match (centered, mean) {
                    (true, Some(m)) if m.len() == c => Some(m.to_vec()),
                    (true, _) => {
                        return Err(Error::shape(
                            "centered normalization needs a running mean per channel",
                        ))
                    }
                    (false, _) => None,
                };
                (
                    NormStats {
                        scale: scale.to_vec(),
                        mean,
                    },
                    false,
                )
            }
        };
        let out = apply_norm(
            xv,
            self.value(gain).data(),
            shift.map(|s| self.value(s).data()),
            &stats,
        );
        let returned = batch_stats.then(|| stats.clone());
        let v = self.push(
            out,
            Op::Norm {
                x,
                gain,
                shift,
                stats,
                batch_stats,
            },
        );
        Ok((v, returned))
    }

    /// Channel-wise concatenation, `a` first.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = concat(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Concat { a, b }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.push(out, Op::Add { a, b }))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let out = self.value(x).scale(factor);
        self.push(out, Op::Scale { x, factor })
    }

    /// Full vector-Jacobian product from `output`.
    pub fn backward(&self, output: Var, cotangent: &Tensor<T>) -> Result<Gradients<T>> {
        self.backward_with(output, cotangent, GradScope::All)
    }

    pub fn backward_with(
        &self,
        output: Var,
        cotangent: &Tensor<T>,
        scope: GradScope,
    ) -> Result<Gradients<T>> {
        let out_shape = self.value(output).shape();
        let cot_ok = cotangent.shape() == out_shape
            || (out_shape.len() == 4
                && out_shape[0] == 1
                && cotangent.shape() == &out_shape[1..]);
        if !cot_ok {
            return Err(Error::shape(format!(
                "cotangent shape {:?} does not match output shape {:?}",
                cotangent.shape(),
                out_shape
            )));
        }
        let needs = self.needs_grad(output, scope);
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::new(out_shape.to_vec(), cotangent.data().to_vec())?);

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            let leaf = matches!(node.op, Op::Input | Op::Param);
            if leaf {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            match &node.op {
                Op::Input | Op::Param => unreachable!(),
                Op::Conv { x, w, b, spec } => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    let plan = ConvPlan::new(xv.shape(), wv.shape(), spec)?;
                    if needs[x.0] {
                        let dx = Tensor::new(plan.input_shape(), plan.input_grad(g.data(), wv.data()))?;
                        accumulate(&mut grads, *x, dx)?;
                    }
                    if needs[w.0] {
                        let dw = Tensor::new(
                            wv.shape().to_vec(),
                            plan.weight_grad(xv.data(), g.data(), wv.len()),
                        )?;
                        accumulate(&mut grads, *w, dw)?;
                    }
                    if let Some(b) = b {
                        if needs[b.0] {
                            let db = Tensor::new(vec![plan.out_shape.0], plan.bias_grad(g.data()))?;
                            accumulate(&mut grads, *b, db)?;
                        }
                    }
                }
                Op::Relu { x, site } => {
                    if needs[x.0] {
                        let mask = &self.masks[*site].active;
                        let dx = Tensor::new(
                            g.shape().to_vec(),
                            g.data()
                                .iter()
                                .zip(mask)
                                .map(|(&v, &a)| if a { v } else { T::zero() })
                                .collect(),
                        )?;
                        accumulate(&mut grads, *x, dx)?;
                    }
                }
                Op::Norm {
                    x,
                    gain,
                    shift,
                    stats,
                    batch_stats,
                } => {
                    let (dx, dgain, dshift) = norm_backward(
                        self.value(*x),
                        self.value(*gain).data(),
                        stats,
                        *batch_stats,
                        &g,
                    )?;
                    if needs[x.0] {
                        accumulate(&mut grads, *x, dx)?;
                    }
                    if needs[gain.0] {
                        accumulate(&mut grads, *gain, dgain)?;
                    }
                    if let Some(s) = shift {
                        if needs[s.0] {
                            accumulate(&mut grads, *s, dshift)?;
                        }
                    }
                }
                Op::Concat { a, b } => {
                    let ca = self.value(*a).dims4()?.1;
                    let (ga, gb) = split_channels(&g, ca)?;
                    if needs[a.0] {
                        accumulate(&mut grads, *a, ga)?;
                    }
                    if needs[b.0] {
                        accumulate(&mut grads, *b, gb)?;
                    }
                }
                Op::Add { a, b } => {
                    if needs[a.0] {
                        accumulate(&mut grads, *a, g.clone())?;
                    }
                    if needs[b.0] {
                        accumulate(&mut grads, *b, g)?;
                    }
                }
                Op::Scale { x, factor } => {
                    if needs[x.0] {
                        accumulate(&mut grads, *x, g.scale(*factor))?;
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn needs_grad(&self, output: Var, scope: GradScope) -> Vec<bool> {
        let mut needs = vec![false; self.nodes.len()];
        for i in 0..=output.0 {
            needs[i] = match &self.nodes[i].op {
                Op::Input => true,
                Op::Param => scope == GradScope::All,
                Op::Conv { x, w, b, .. } => {
                    needs[x.0] || needs[w.0] || b.is_some_and(|b| needs[b.0])
                }
                Op::Relu { x, .. } | Op::Scale { x, .. } => needs[x.0],
                Op::Norm { x, gain, shift, .. } => {
                    needs[x.0] || needs[gain.0] || shift.is_some_and(|s| needs[s.0])
                }
                Op::Concat { a, b } | Op::Add { a, b } => needs[a.0] || needs[b.0],
            };
        }
        needs
    }

    /// Re-evaluate the recorded graph up to `output` with new values for
    /// the given input leaves, ReLUs frozen to their recorded masks and
    /// normalizations frozen to their recorded statistics.
    ///
    /// Replaying with the original inputs reproduces the recorded output
    /// bit for bit.
    pub fn replay_frozen(&self, output: Var, inputs: &[(Var, &Tensor<T>)]) -> Result<Tensor<T>> {
        let mut values: Vec<Option<Tensor<T>>> = vec![None; output.0 + 1];
        for &(v, t) in inputs {
            if !matches!(self.nodes[v.0].op, Op::Input) {
                return Err(Error::invalid(format!("var {} is not an input leaf", v.0)));
            }
            let recorded = self.value(v);
            let t = promote4(t.clone())?;
            if t.shape() != recorded.shape() {
                return Err(Error::shape(format!(
                    "replay input shape {:?} differs from recorded {:?}",
                    t.shape(),
                    recorded.shape()
                )));
            }
            values[v.0] = Some(t);
        }
        for i in 0..=output.0 {
            if values[i].is_some() {
                continue;
            }
            let get = |v: &Var, values: &[Option<Tensor<T>>]| -> Tensor<T> {
                values[v.0].clone().expect("topological order")
            };
            let out = match &self.nodes[i].op {
                Op::Input | Op::Param => self.nodes[i].value.clone(),
                Op::Conv { x, w, b, spec } => {
                    let xv = get(x, &values);
                    let wv = get(w, &values);
                    let plan = ConvPlan::new(xv.shape(), wv.shape(), spec)?;
                    let bv = b.map(|b| get(&b, &values));
                    Tensor::new(
                        plan.output_shape(),
                        plan.forward(xv.data(), wv.data(), bv.as_ref().map(|t| t.data())),
                    )?
                }
                Op::Relu { x, site } => {
                    let xv = get(x, &values);
                    let mask = &self.masks[*site].active;
                    Tensor::new(
                        xv.shape().to_vec(),
                        xv.data()
                            .iter()
                            .zip(mask)
                            .map(|(&v, &a)| if a { v } else { T::zero() })
                            .collect(),
                    )?
                }
                Op::Norm {
                    x,
                    gain,
                    shift,
                    stats,
                    ..
                } => {
                    let xv = get(x, &values);
                    let gv = get(gain, &values);
                    let sv = shift.map(|s| get(&s, &values));
                    apply_norm(&xv, gv.data(), sv.as_ref().map(|t| t.data()), stats)
                }
                Op::Concat { a, b } => concat(&get(a, &values), &get(b, &values))?,
                Op::Add { a, b } => get(a, &values).add(&get(b, &values))?,
                Op::Scale { x, factor } => get(x, &values).scale(*factor),
            };
            values[i] = Some(out);
        }
        Ok(values[output.0].take().expect("evaluated"))
    }
}

fn promote4<T: Real>(t: Tensor<T>) -> Result<Tensor<T>> {
    match t.shape().len() {
        4 => Ok(t),
        3 => {
            let mut shape = vec![1];
            shape.extend_from_slice(t.shape());
            t.reshape(shape)
        }
        _ => Err(Error::shape(format!(
            "graph inputs must be [C,H,W] or [B,C,H,W], got {:?}",
            t.shape()
        ))),
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn apply_norm<T: Real>(
    x: &Tensor<T>,
    gain: &[T],
    shift: Option<&[T]>,
    stats: &NormStats<T>,
) -> Tensor<T> {
    let (b, c, h, w) = x.dims4().expect("validated rank");
    let plane = h * w;
    let mut out = x.clone();
    let data = out.data_mut();
    for n in 0..b {
        for ch in 0..c {
            let start = (n * c + ch) * plane;
            let mean = stats.mean.as_ref().map_or(T::zero(), |m| m[ch]);
            let k = gain[ch] / stats.scale[ch];
            let beta = shift.map_or(T::zero(), |s| s[ch]);
            for v in &mut data[start..start + plane] {
                *v = (*v - mean) * k + beta;
            }
        }
    }
    out
}

type NormGrads<T> = (Tensor<T>, Tensor<T>, Tensor<T>);

fn norm_backward<T: Real>(
    x: &Tensor<T>,
    gain: &[T],
    stats: &NormStats<T>,
    batch_stats: bool,
    g: &Tensor<T>,
) -> Result<NormGrads<T>> {
    let (b, c, h, w) = x.dims4()?;
    let plane = h * w;
    let count = T::from_usize(b * plane).expect("count");
    let mut dx = Tensor::zeros(x.shape().to_vec());
    let mut dgain = vec![T::zero(); c];
    let mut dshift = vec![T::zero(); c];
    let xd = x.data();
    let gd = g.data();
    for ch in 0..c {
        let mean = stats.mean.as_ref().map_or(T::zero(), |m| m[ch]);
        let s = stats.scale[ch];
        let idx = |n: usize| {
            let start = (n * c + ch) * plane;
            start..start + plane
        };
        // Σ g and Σ g·x̂ over the channel.
        let mut sum_g = T::zero();
        let mut sum_gx = T::zero();
        for n in 0..b {
            for i in idx(n) {
                let xhat = (xd[i] - mean) / s;
                sum_g = sum_g + gd[i];
                sum_gx = sum_gx + gd[i] * xhat;
            }
        }
        dgain[ch] = sum_gx;
        dshift[ch] = sum_g;
        let k = gain[ch] / s;
        let dd = dx.data_mut();
        for n in 0..b {
            for i in idx(n) {
                dd[i] = if batch_stats {
                    let xhat = (xd[i] - mean) / s;
                    let centered_term = if stats.mean.is_some() {
                        sum_g / count
                    } else {
                        T::zero()
                    };
                    k * (gd[i] - centered_term - xhat * sum_gx / count)
                } else {
                    k * gd[i]
                };
            }
        }
    }
    Ok((
        dx,
        Tensor::new(vec![c], dgain)?,
        Tensor::new(vec![c], dshift)?,
    ))
}

fn concat<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (na, ca, ha, wa) = a.dims4()?;
    let (nb, cb, hb, wb) = b.dims4()?;
    if (na, ha, wa) != (nb, hb, wb) {
        return Err(Error::shape(format!(
            "concat needs matching batch and spatial extents, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let plane = ha * wa;
    let mut data = Vec::with_capacity(a.len() + b.len());
    for n in 0..na {
        data.extend_from_slice(&a.data()[n * ca * plane..(n + 1) * ca * plane]);
        data.extend_from_slice(&b.data()[n * cb * plane..(n + 1) * cb * plane]);
    }
    let shape = if a.shape().len() == 3 {
        vec![ca + cb, ha, wa]
    } else {
        vec![na, ca + cb, ha, wa]
    };
    Tensor::new(shape, data)
}

fn split_channels<T: Real>(g: &Tensor<T>, ca: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, c, h, w) = g.dims4()?;
    let cb = c - ca;
    let plane = h * w;
    let mut a = Vec::with_capacity(n * ca * plane);
    let mut b = Vec::with_capacity(n * cb * plane);
    for i in 0..n {
        let base = i * c * plane;
        a.extend_from_slice(&g.data()[base..base + ca * plane]);
        b.extend_from_slice(&g.data()[base + ca * plane..base + c * plane]);
    }
    Ok((
        Tensor::new(vec![n, ca, h, w], a)?,
        Tensor::new(vec![n, cb, h, w], b)?,
    ))
}

/// Channel-wise concatenation outside a tape.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    concat(a, b)
}

/// `max(x, 0)` outside a tape, returning the activation mask.
pub fn relu<T: Real>(x: &Tensor<T>) -> (Tensor<T>, ReluMask) {
    let active: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
    let out = Tensor::new(
        x.shape().to_vec(),
        x.data()
            .iter()
            .zip(&active)
            .map(|(&v, &a)| if a { v } else { T::zero() })
            .collect(),
    )
    .expect("same shape");
    (
        out,
        ReluMask {
            shape: x.shape().to_vec(),
            active,
        },
    )
}

/// Normalization outside a tape. Returns the output and, in train mode,
/// the batch statistics.
pub fn scale_norm<T: Real>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    shift: Option<&Tensor<T>>,
    mode: NormMode<'_, T>,
) -> Result<(Tensor<T>, Option<NormStats<T>>)> {
    let mut tape = Tape::new();
    let rank3 = x.shape().len() == 3;
    let xv = tape.input(x.clone())?;
    let gv = tape.param(gain.clone());
    let sv = shift.map(|s| tape.param(s.clone()));
    let (out, stats) = tape.scale_norm(xv, gv, sv, mode)?;
    let mut value = tape.value(out).clone();
    if rank3 {
        value = value.reshape(x.shape().to_vec())?;
    }
    Ok((value, stats))
}
