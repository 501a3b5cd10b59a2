//! Independent reference implementations used by the integration tests and
//! the acceptance runner.

#![allow(dead_code)]

use bfdn::conv::ConvSpec;
use bfdn::{Rng, Tensor};

pub fn random(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.normal())
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct seven-loop convolution. Transposed layers are evaluated as the
/// scatter of every input pixel through the kernel.
pub fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: Option<&Tensor<f64>>, spec: &ConvSpec) -> Tensor<f64> {
    let s = x.shape();
    let (bn, cin, h, wd) = (s[0], s[1], s[2], s[3]);
    let ws = w.shape();
    let (k_h, k_w) = (ws[2], ws[3]);
    let (st, dil, pad) = (spec.stride as isize, spec.dilation as isize, spec.padding as isize);
    let xv = |n: usize, c: usize, i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= h as isize || j >= wd as isize {
            0.0
        } else {
            x.data()[((n * cin + c) * h + i as usize) * wd + j as usize]
        }
    };
    if !spec.transpose {
        let cout = ws[0];
        let oh = ((h as isize + 2 * pad - dil * (k_h as isize - 1) - 1) / st + 1) as usize;
        let ow = ((wd as isize + 2 * pad - dil * (k_w as isize - 1) - 1) / st + 1) as usize;
        let mut out = vec![0.0; bn * cout * oh * ow];
        for n in 0..bn {
            for o in 0..cout {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = b.map_or(0.0, |b| b.data()[o]);
                        for c in 0..cin {
                            for p in 0..k_h {
                                for q in 0..k_w {
                                    let wv = w.data()[((o * cin + c) * k_h + p) * k_w + q];
                                    acc += wv
                                        * xv(
                                            n,
                                            c,
                                            i as isize * st - pad + p as isize * dil,
                                            j as isize * st - pad + q as isize * dil,
                                        );
                                }
                            }
                        }
                        out[((n * cout + o) * oh + i) * ow + j] = acc;
                    }
                }
            }
        }
        Tensor::new(vec![bn, cout, oh, ow], out).unwrap()
    } else {
        let cout = ws[1];
        let oh = ((h as isize - 1) * st - 2 * pad + dil * (k_h as isize - 1) + 1) as usize;
        let ow = ((wd as isize - 1) * st - 2 * pad + dil * (k_w as isize - 1) + 1) as usize;
        let mut out = vec![0.0; bn * cout * oh * ow];
        for n in 0..bn {
            for o in 0..cout {
                let bias = b.map_or(0.0, |b| b.data()[o]);
                for v in &mut out[(n * cout + o) * oh * ow..(n * cout + o + 1) * oh * ow] {
                    *v = bias;
                }
            }
            for c in 0..cin {
                for i in 0..h {
                    for j in 0..wd {
                        let xin = x.data()[((n * cin + c) * h + i) * wd + j];
                        for o in 0..cout {
                            for p in 0..k_h {
                                for q in 0..k_w {
                                    let oi = i as isize * st - pad + p as isize * dil;
                                    let oj = j as isize * st - pad + q as isize * dil;
                                    if oi < 0 || oj < 0 || oi >= oh as isize || oj >= ow as isize {
                                        continue;
                                    }
                                    let wv = w.data()[((c * cout + o) * k_h + p) * k_w + q];
                                    out[((n * cout + o) * oh + oi as usize) * ow + oj as usize] += wv * xin;
                                }
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(vec![bn, cout, oh, ow], out).unwrap()
    }
}

/// `10 log10(255² / mse)` by explicit summation.
pub fn psnr_direct(x: &[f64], y: &[f64]) -> f64 {
    let mut sq = 0.0;
    for i in 0..x.len() {
        sq += (x[i] - y[i]) * (x[i] - y[i]);
    }
    10.0 * (255.0f64 * 255.0 / (sq / x.len() as f64)).log10()
}

/// Mean SSIM over every full 11x11 window, evaluated with a 2-D Gaussian
/// weight table (σ = 1.5) and no separability shortcut.
pub fn ssim_direct(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    const K: usize = 11;
    let mut g = [[0.0f64; K]; K];
    let mut total = 0.0;
    for (p, row) in g.iter_mut().enumerate() {
        for (q, v) in row.iter_mut().enumerate() {
            let (dp, dq) = (p as f64 - 5.0, q as f64 - 5.0);
            *v = (-(dp * dp + dq * dq) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..=h - K {
        for j in 0..=w - K {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for p in 0..K {
                for q in 0..K {
                    let wt = g[p][q] / total;
                    let a = x[(i + p) * w + j + q];
                    let b = y[(i + p) * w + j + q];
                    mx += wt * a;
                    my += wt * b;
                    xx += wt * a * a;
                    yy += wt * b * b;
                    xy += wt * a * b;
                }
            }
            let (vx, vy, cxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}

/// Central differences of a scalar function along every coordinate in
/// `coords`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, at: &[f64], coords: &[usize], h: f64) -> Vec<f64> {
    coords
        .iter()
        .map(|&k| {
            let mut p = at.to_vec();
            p[k] += h;
            let up = f(&p);
            p[k] -= 2.0 * h;
            let down = f(&p);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Column-major `U diag(s) Vᵀ` rebuilt from the column layouts the
/// analysis stores.
pub fn reconstruct(u: &Tensor<f64>, s: &[f64], v: &Tensor<f64>) -> Vec<f64> {
    let n = s.len();
    let (u, v) = (u.data(), v.data());
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += u[r * n + k] * s[k] * v[c * n + k];
            }
            out[r * n + c] = acc;
        }
    }
    out
}

/// Centered `size x size` crop of a `[1,H,W]` image.
pub fn crop(img: &Tensor<f64>, size: usize) -> Tensor<f64> {
    let s = img.shape();
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    let (top, left) = ((h - size) / 2, (w - size) / 2);
    let mut data = Vec::with_capacity(size * size);
    for r in top..top + size {
        data.extend_from_slice(&img.data()[r * w + left..r * w + left + size]);
    }
    Tensor::new(vec![1, size, size], data).unwrap()
}
