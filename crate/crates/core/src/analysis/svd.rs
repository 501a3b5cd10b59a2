//! Singular value analysis of a local linear map.

use faer::Mat;

use super::jacobian::LocalLinearModel;
use crate::error::{Error, Result};
use crate::tensor::{gemm, Tensor};

#[derive(Clone, Debug)]
pub struct SvdAnalysis {
    /// Noise level the analyzed input was drawn at.
    pub sigma: f64,
    /// Singular values, non-increasing.
    pub s: Vec<f64>,
    /// `[N,N]`, column `i` is the left singular vector `U_i`.
    pub u: Tensor<f64>,
    /// `[N,N]`, column `i` is the right singular vector `V_i`.
    pub v: Tensor<f64>,
    /// Effective dimensionality `Σ s_i²`.
    pub d: f64,
    /// `|⟨U_i, V_i⟩|` for every `i`.
    pub alignment: Vec<f64>,
}

impl SvdAnalysis {
    pub fn n(&self) -> usize {
        self.s.len()
    }

    /// `⌈d⌉`, clamped to `1..=N`.
    pub fn signal_rank(&self) -> usize {
        cut(self.d, self.n())
    }

    /// Median of `|⟨U_i,V_i⟩|` over the top `⌈d⌉` indices.
    pub fn median_alignment(&self) -> f64 {
        median(&self.alignment[..self.signal_rank()])
    }

    /// Fraction of singular values below `ratio · s_max`.
    pub fn fraction_below(&self, ratio: f64) -> f64 {
        let limit = ratio * self.s[0];
        self.s.iter().filter(|&&s| s < limit).count() as f64 / self.n() as f64
    }

    /// Column `i` of `U`.
    pub fn left(&self, i: usize) -> Vec<f64> {
        column(&self.u, i)
    }

    pub fn right(&self, i: usize) -> Vec<f64> {
        column(&self.v, i)
    }
}

fn column(m: &Tensor<f64>, i: usize) -> Vec<f64> {
    let n = m.shape()[1];
    m.data().iter().skip(i).step_by(n).copied().collect()
}

/// `⌈d⌉` ignoring float noise just above an integer.
fn cut(d: f64, n: usize) -> usize {
    ((d - 1e-9).ceil() as usize).clamp(1, n)
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

/// Full SVD of an `[N,N]` matrix.
pub fn svd_of(a: &Tensor<f64>, sigma: f64) -> Result<SvdAnalysis> {
    let (n, m) = match *a.shape() {
        [n, m] => (n, m),
        _ => return Err(Error::shape(format!("svd needs a matrix, got shape {:?}", a.shape()))),
    };
    if n != m || n == 0 {
        return Err(Error::shape(format!("svd needs a non-empty square matrix, got {n}x{m}")));
    }
    let data = a.data();
    let mat = Mat::<f64>::from_fn(n, n, |i, j| data[i * n + j]);
    let svd = mat.svd().map_err(|_| Error::SvdNoConvergence)?;
    let (fu, fv) = (svd.U(), svd.V());
    let sv = svd.S().column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]));
    let s: Vec<f64> = order.iter().map(|&k| sv[k]).collect();
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::SvdNoConvergence);
    }
    let u = Tensor::from_fn(vec![n, n], |idx| fu[(idx / n, order[idx % n])]);
    let v = Tensor::from_fn(vec![n, n], |idx| fv[(idx / n, order[idx % n])]);
    let alignment = (0..n)
        .map(|k| {
            (0..n)
                .map(|r| fu[(r, order[k])] * fv[(r, order[k])])
                .sum::<f64>()
                .abs()
        })
        .collect();
    let d = s.iter().map(|x| x * x).sum();
    Ok(SvdAnalysis {
        sigma,
        s,
        u,
        v,
        d,
        alignment,
    })
}

pub fn svd_analyze(lm: &LocalLinearModel, sigma: f64) -> Result<SvdAnalysis> {
    svd_of(&lm.a, sigma)
}

/// `‖P x‖² / ‖x‖²` with `P` the projector onto the top `⌈d_cut⌉` left
/// singular vectors. A zero `x` counts as fully preserved.
pub fn projection_energy(svd: &SvdAnalysis, x: &[f64], d_cut: f64) -> Result<f64> {
    let n = svd.n();
    if x.len() != n {
        return Err(Error::shape(format!("image has {} pixels, analysis has {n}", x.len())));
    }
    if d_cut > n as f64 {
        return Err(Error::invalid(format!("d_cut {d_cut} exceeds N = {n}")));
    }
    let total: f64 = x.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let k = cut(d_cut, n);
    // coefficients c = U_kᵀ x
    let mut c = vec![0.0; k];
    let u = svd.u.data();
    for (r, &xr) in x.iter().enumerate() {
        let row = &u[r * n..r * n + k];
        for (ci, &ui) in c.iter_mut().zip(row) {
            *ci += ui * xr;
        }
    }
    Ok(c.iter().map(|v| v * v).sum::<f64>() / total)
}

/// Share of the high-noise signal subspace that lies inside the low-noise
/// one: `Σ_j ‖P_low U_high,j‖² / ⌈d_high⌉` over the top `⌈d_high⌉` axes.
pub fn nested_overlap(low: &SvdAnalysis, high: &SvdAnalysis) -> Result<f64> {
    let n = low.n();
    if high.n() != n {
        return Err(Error::shape(format!(
            "analyses differ in size: {n} vs {}",
            high.n()
        )));
    }
    let (kl, kh) = (low.signal_rank(), high.signal_rank());
    let take = |m: &Tensor<f64>, k: usize| -> Vec<f64> {
        m.data().chunks(n).flat_map(|row| row[..k].iter().copied()).collect()
    };
    let ul = take(&low.u, kl);
    let uh = take(&high.u, kh);
    // m = U_lowᵀ U_high, kl x kh
    let mut m = vec![0.0; kl * kh];
    gemm(true, false, kl, kh, n, &ul, &uh, 0.0, &mut m);
    Ok(m.iter().map(|v| v * v).sum::<f64>() / kh as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let n = 6;
        let eye = Tensor::from_fn(vec![n, n], |k| if k / n == k % n { 1.0 } else { 0.0 });
        let s = svd_of(&eye, 0.0).unwrap();
        assert!(s.s.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((s.d - n as f64).abs() < 1e-12);
        assert!(s.alignment.iter().all(|&a| (a - 1.0).abs() < 1e-12));
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        assert!((projection_energy(&s, &x, n as f64).unwrap() - 1.0).abs() < 1e-12);
        assert!((nested_overlap(&s, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_projector() {
        let u = [0.6, 0.0, 0.8];
        let a = Tensor::from_fn(vec![3, 3], |k| u[k / 3] * u[k % 3]);
        let s = svd_of(&a, 0.0).unwrap();
        assert!((s.s[0] - 1.0).abs() < 1e-12 && s.s[1].abs() < 1e-12);
        assert!((s.d - 1.0).abs() < 1e-12);
        assert_eq!(s.signal_rank(), 1);
        assert!((projection_energy(&s, &u, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(projection_energy(&s, &[0.0, 1.0, 0.0], 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn orthogonal_subspaces_do_not_overlap() {
        let p = |i: usize| Tensor::from_fn(vec![4, 4], move |k| if k == i * 5 { 1.0 } else { 0.0 });
        let a = svd_of(&p(0), 0.0).unwrap();
        let b = svd_of(&p(3), 0.0).unwrap();
        assert!(nested_overlap(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
