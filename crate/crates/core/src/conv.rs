//! Cross-correlation kernels (im2col + GEMM) for regular and transpose
//! convolutions, together with their adjoints.
//!
//! A transpose convolution is implemented as the adjoint of the regular
//! convolution that maps its output space back to its input space, so every
//! layer is served by the same three primitives: forward, adjoint and
//! weight-gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{gemm, Real, Tensor};

/// Geometry of one convolution layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub dilation: usize,
    /// Zero padding applied on each side.
    pub padding: usize,
    pub transpose: bool,
}

impl ConvSpec {
    /// Stride-1 layer whose output has the input's spatial size.
    pub fn same(k: usize) -> Self {
        Self::same_dilated(k, 1)
    }

    pub fn same_dilated(k: usize, dilation: usize) -> Self {
        Self {
            kh: k,
            kw: k,
            stride: 1,
            dilation,
            padding: (k / 2) * dilation,
            transpose: false,
        }
    }

    pub fn strided(k: usize, stride: usize, padding: usize) -> Self {
        Self {
            kh: k,
            kw: k,
            stride,
            dilation: 1,
            padding,
            transpose: false,
        }
    }

    pub fn transposed(k: usize, stride: usize, padding: usize) -> Self {
        Self {
            transpose: true,
            ..Self::strided(k, stride, padding)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kh == 0 || self.kw == 0 || self.stride == 0 || self.dilation == 0 {
            return Err(Error::shape(format!(
                "kernel extents, stride and dilation must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Output spatial extents for an input of `h x w`.
    pub fn output_extent(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let span_h = self.dilation * (self.kh - 1) + 1;
        let span_w = self.dilation * (self.kw - 1) + 1;
        if self.transpose {
            let oh = ((h as isize - 1) * self.stride as isize - 2 * self.padding as isize
                + span_h as isize) as isize;
            let ow = ((w as isize - 1) * self.stride as isize - 2 * self.padding as isize
                + span_w as isize) as isize;
            if h == 0 || oh < 1 {
                return Err(Error::shape(format!(
                    "transpose convolution height {h} yields empty output under {self:?}"
                )));
            }
            if w == 0 || ow < 1 {
                return Err(Error::shape(format!(
                    "transpose convolution width {w} yields empty output under {self:?}"
                )));
            }
            Ok((oh as usize, ow as usize))
        } else {
            if h + 2 * self.padding < span_h {
                return Err(Error::shape(format!(
                    "height {h} with padding {} is smaller than the dilated kernel height {span_h}",
                    self.padding
                )));
            }
            if w + 2 * self.padding < span_w {
                return Err(Error::shape(format!(
                    "width {w} with padding {} is smaller than the dilated kernel width {span_w}",
                    self.padding
                )));
            }
            Ok((
                (h + 2 * self.padding - span_h) / self.stride + 1,
                (w + 2 * self.padding - span_w) / self.stride + 1,
            ))
        }
    }
}

/// Geometry of a regular (non-transposed) cross-correlation from a
/// `c_in x h_in x w_in` space to a `c_out x h_out x w_out` space.
#[derive(Clone, Copy, Debug)]
struct Geom {
    c_in: usize,
    h_in: usize,
    w_in: usize,
    c_out: usize,
    h_out: usize,
    w_out: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    dilation: usize,
    padding: usize,
}

impl Geom {
    fn patch_len(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn in_len(&self) -> usize {
        self.c_in * self.h_in * self.w_in
    }

    fn out_pixels(&self) -> usize {
        self.h_out * self.w_out
    }

    /// Output columns `oj` whose tap `kj` lands inside the input, as a
    /// half-open range, with the input column of the first one.
    #[inline]
    fn valid_cols(&self, kj: usize) -> (usize, usize, usize) {
        let off = (kj * self.dilation) as isize - self.padding as isize;
        let s = self.stride as isize;
        // smallest oj with oj*s + off >= 0
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        // largest oj with oj*s + off < w_in, plus one
        let hi = ((self.w_in as isize - off + s - 1) / s).clamp(0, self.w_out as isize);
        let lo = (lo as usize).min(hi as usize);
        let first = (lo as isize * s + off).max(0) as usize;
        (lo, hi as usize, first)
    }

    /// Visit every (column row, input row) pair of the im2col matrix whose
    /// taps land inside the unpadded input, with the contiguous run of
    /// valid output columns.
    #[inline]
    fn for_each_run(&self, mut f: impl FnMut(usize, usize, usize)) {
        let hi = self.h_in as isize;
        let pad = self.padding as isize;
        let (s, d) = (self.stride as isize, self.dilation as isize);
        let np = self.out_pixels();
        for c in 0..self.c_in {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let (lo, end, first) = self.valid_cols(kj);
                    if lo >= end {
                        continue;
                    }
                    for oi in 0..self.h_out {
                        let ii = oi as isize * s - pad + ki as isize * d;
                        if ii < 0 || ii >= hi {
                            continue;
                        }
                        let base_in = (c * self.h_in + ii as usize) * self.w_in + first;
                        let base_col = row * np + oi * self.w_out + lo;
                        f(base_col, base_in, end - lo);
                    }
                }
            }
        }
    }

    fn im2col<T: Real>(&self, x: &[T], cols: &mut [T]) {
        cols.fill(T::zero());
        let s = self.stride;
        self.for_each_run(|col, inp, n| {
            if s == 1 {
                cols[col..col + n].copy_from_slice(&x[inp..inp + n]);
            } else {
                for (k, c) in cols[col..col + n].iter_mut().enumerate() {
                    *c = x[inp + k * s];
                }
            }
        });
    }

    fn col2im<T: Real>(&self, cols: &[T], x: &mut [T]) {
        let s = self.stride;
        self.for_each_run(|col, inp, n| {
            if s == 1 {
                for (xv, &c) in x[inp..inp + n].iter_mut().zip(&cols[col..col + n]) {
                    *xv = *xv + c;
                }
            } else {
                for k in 0..n {
                    x[inp + k * s] = x[inp + k * s] + cols[col + k];
                }
            }
        });
    }

    /// `out = W * im2col(x)` for one sample; `w` is `c_out x patch_len`.
    fn forward<T: Real>(&self, x: &[T], w: &[T], cols: &mut [T], out: &mut [T]) {
        self.im2col(x, cols);
        gemm(
            false,
            false,
            self.c_out,
            self.out_pixels(),
            self.patch_len(),
            w,
            cols,
            T::zero(),
            out,
        );
    }

    /// `x += col2im(Wᵀ * g)` for one sample.
    fn adjoint<T: Real>(&self, g: &[T], w: &[T], cols: &mut [T], x: &mut [T]) {
        gemm(
            true,
            false,
            self.patch_len(),
            self.out_pixels(),
            self.c_out,
            w,
            g,
            T::zero(),
            cols,
        );
        self.col2im(cols, x);
    }

    /// `dw += g * im2col(x)ᵀ` for one sample.
    fn weight_grad<T: Real>(&self, x: &[T], g: &[T], cols: &mut [T], dw: &mut [T]) {
        self.im2col(x, cols);
        gemm(
            false,
            true,
            self.c_out,
            self.patch_len(),
            self.out_pixels(),
            g,
            cols,
            T::one(),
            dw,
        );
    }
}

/// Resolved shapes for one conv application on a batch.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvPlan {
    batch: usize,
    geom: Geom,
    transpose: bool,
    /// Channels and extents of the layer's input and output.
    pub(crate) in_shape: (usize, usize, usize),
    pub(crate) out_shape: (usize, usize, usize),
}

impl ConvPlan {
    pub(crate) fn new(x_shape: &[usize], w_shape: &[usize], spec: &ConvSpec) -> Result<Self> {
        let (batch, c, h, w) = match *x_shape {
            [b, c, h, w] => (b, c, h, w),
            [c, h, w] => (1, c, h, w),
            _ => {
                return Err(Error::shape(format!(
                    "conv2d input must be [C,H,W] or [B,C,H,W], got {x_shape:?}"
                )))
            }
        };
        let [w0, w1, kh, kw] = *w_shape else {
            return Err(Error::shape(format!(
                "conv2d weight must be rank 4, got {w_shape:?}"
            )));
        };
        if kh != spec.kh || kw != spec.kw {
            return Err(Error::shape(format!(
                "weight kernel extents {kh}x{kw} disagree with spec {}x{}",
                spec.kh, spec.kw
            )));
        }
        let (oh, ow) = spec.output_extent(h, w)?;
        if spec.transpose {
            // weight: [c_in_of_layer, c_out_of_layer, kh, kw]
            if w0 != c {
                return Err(Error::shape(format!(
                    "transpose conv weight dim 0 ({w0}) must equal input channels ({c})"
                )));
            }
            let geom = Geom {
                c_in: w1,
                h_in: oh,
                w_in: ow,
                c_out: c,
                h_out: h,
                w_out: w,
                kh,
                kw,
                stride: spec.stride,
                dilation: spec.dilation,
                padding: spec.padding,
            };
            Ok(Self {
                batch,
                geom,
                transpose: true,
                in_shape: (c, h, w),
                out_shape: (w1, oh, ow),
            })
        } else {
            if w1 != c {
                return Err(Error::shape(format!(
                    "conv weight input-channel dim ({w1}) must equal input channels ({c})"
                )));
            }
            let geom = Geom {
                c_in: c,
                h_in: h,
                w_in: w,
                c_out: w0,
                h_out: oh,
                w_out: ow,
                kh,
                kw,
                stride: spec.stride,
                dilation: spec.dilation,
                padding: spec.padding,
            };
            Ok(Self {
                batch,
                geom,
                transpose: false,
                in_shape: (c, h, w),
                out_shape: (w0, oh, ow),
            })
        }
    }

    fn in_len(&self) -> usize {
        self.in_shape.0 * self.in_shape.1 * self.in_shape.2
    }

    fn out_len(&self) -> usize {
        self.out_shape.0 * self.out_shape.1 * self.out_shape.2
    }

    fn cols_buffer<T: Real>(&self) -> Vec<T> {
        vec![T::zero(); self.geom.patch_len() * self.geom.out_pixels()]
    }

    pub(crate) fn output_shape(&self) -> Vec<usize> {
        vec![
            self.batch,
            self.out_shape.0,
            self.out_shape.1,
            self.out_shape.2,
        ]
    }

    pub(crate) fn input_shape(&self) -> Vec<usize> {
        vec![self.batch, self.in_shape.0, self.in_shape.1, self.in_shape.2]
    }

    /// Layer forward pass on the whole batch.
    pub(crate) fn forward<T: Real>(&self, x: &[T], w: &[T], bias: Option<&[T]>) -> Vec<T> {
        let mut out = vec![T::zero(); self.batch * self.out_len()];
        let mut cols = self.cols_buffer();
        for n in 0..self.batch {
            let xs = &x[n * self.in_len()..(n + 1) * self.in_len()];
            let os = &mut out[n * self.out_len()..(n + 1) * self.out_len()];
            if self.transpose {
                debug_assert_eq!(os.len(), self.geom.in_len());
                self.geom.adjoint(xs, w, &mut cols, os);
            } else {
                self.geom.forward(xs, w, &mut cols, os);
            }
            if let Some(b) = bias {
                let plane = self.out_shape.1 * self.out_shape.2;
                for (c, &bc) in b.iter().enumerate() {
                    for v in &mut os[c * plane..(c + 1) * plane] {
                        *v = *v + bc;
                    }
                }
            }
        }
        out
    }

    /// Gradient with respect to the layer input.
    pub(crate) fn input_grad<T: Real>(&self, g: &[T], w: &[T]) -> Vec<T> {
        let mut dx = vec![T::zero(); self.batch * self.in_len()];
        let mut cols = self.cols_buffer();
        for n in 0..self.batch {
            let gs = &g[n * self.out_len()..(n + 1) * self.out_len()];
            let ds = &mut dx[n * self.in_len()..(n + 1) * self.in_len()];
            if self.transpose {
                self.geom.forward(gs, w, &mut cols, ds);
            } else {
                self.geom.adjoint(gs, w, &mut cols, ds);
            }
        }
        dx
    }

    /// Gradient with respect to the weight, summed over the batch in order.
    pub(crate) fn weight_grad<T: Real>(&self, x: &[T], g: &[T], w_len: usize) -> Vec<T> {
        let mut dw = vec![T::zero(); w_len];
        let mut cols = self.cols_buffer();
        for n in 0..self.batch {
            let xs = &x[n * self.in_len()..(n + 1) * self.in_len()];
            let gs = &g[n * self.out_len()..(n + 1) * self.out_len()];
            if self.transpose {
                // Regular direction runs from the layer output to its input.
                self.geom.weight_grad(gs, xs, &mut cols, &mut dw);
            } else {
                self.geom.weight_grad(xs, gs, &mut cols, &mut dw);
            }
        }
        dw
    }

    pub(crate) fn bias_grad<T: Real>(&self, g: &[T]) -> Vec<T> {
        let (c_out, oh, ow) = self.out_shape;
        let plane = oh * ow;
        let mut db = vec![T::zero(); c_out];
        for n in 0..self.batch {
            for (c, acc) in db.iter_mut().enumerate() {
                let start = n * self.out_len() + c * plane;
                *acc = *acc + g[start..start + plane].iter().copied().sum::<T>();
            }
        }
        db
    }
}

/// Standalone 2-D convolution (deep-learning cross-correlation, no kernel
/// flip). `x` is `[Cin,H,W]` or `[B,Cin,H,W]`; regular weights are
/// `[Cout,Cin,kh,kw]` and transpose weights `[Cin,Cout,kh,kw]`.
pub fn conv2d<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    let plan = ConvPlan::new(x.shape(), w.shape(), spec)?;
    if let Some(b) = bias {
        if b.shape() != [plan.out_shape.0] {
            return Err(Error::shape(format!(
                "bias shape {:?} must be [{}] (output channels)",
                b.shape(),
                plan.out_shape.0
            )));
        }
    }
    let out = plan.forward(x.data(), w.data(), bias.map(|b| b.data()));
    let shape = if x.shape().len() == 3 {
        plan.output_shape()[1..].to_vec()
    } else {
        plan.output_shape()
    };
    Tensor::new(shape, out)
}
