mod common;

use bfdn::analysis::{
    bias_sweep, dimensionality_vs_sigma, eval_sweep, frozen_response, homogeneity_deviation, jacobian_full,
    jacobian_row, nested_overlap, net_bias, projection_energy, svd_analyze, svd_of, PSNR_CAP,
};
use bfdn::model::ParamRole;
use bfdn::training::NoiseDistribution;
use bfdn::{Arch, Mode, Model, ModelConfig, Rng, Tensor};
use common::{reconstruct, rel};

fn model(arch: Arch, bias: bool, seed: u64) -> Model {
    let cfg = ModelConfig::desk(arch).with_bias(bias).with_seed(seed);
    let mut m = Model::build(&cfg, &mut Rng::new(seed)).unwrap();
    let mut rng = Rng::new(seed ^ 0x5eed);
    for p in m.params_mut() {
        match p.role {
            ParamRole::Bias | ParamRole::Shift => p.data.iter_mut().for_each(|v| *v = (0.1 * rng.normal()) as f32),
            ParamRole::RunningScale => p.data.iter_mut().for_each(|v| *v = rng.uniform(0.5, 2.0) as f32),
            _ => {}
        }
    }
    m
}

fn image(side: usize, seed: u64) -> Tensor<f64> {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(vec![1, 1, side, side], |_| rng.uniform(0.0, 255.0))
}

#[test]
fn bias_free_maps_are_exactly_linear_and_biased_maps_affine() {
    for arch in Arch::ALL {
        for bias in [false, true] {
            let m = model(arch, bias, 1);
            let y = image(14, 2);
            let lm = jacobian_full(&m, &y).unwrap();
            let b = net_bias(&m, &y).unwrap();
            let ay = lm.apply(lm.y.data());
            let recon: Vec<f64> = ay.iter().zip(b.data()).map(|(a, b)| a + b).collect();
            assert!(rel(&recon, lm.f.data()) <= 1e-9, "{arch:?} bias={bias}");
            assert!(rel(lm.b.data(), b.data()) <= 1e-6 || b.norm() < 1e-9 * lm.f.norm());
            if !bias {
                assert!(lm.linear_residual() <= 1e-9, "{arch:?}");
                assert!(b.norm() <= 1e-9 * lm.f.norm(), "{arch:?}");
            } else {
                assert!(b.norm() > 1e-6 * lm.f.norm(), "{arch:?} biased model has no net bias");
            }
        }
    }
}

#[test]
fn jacobian_rows_equal_frozen_mask_columns() {
    for arch in Arch::ALL {
        for bias in [false, true] {
            let m = model(arch, bias, 3);
            let side = 10;
            let y = image(side, 4);
            let lm = jacobian_full(&m, &y).unwrap();
            let n = lm.n();
            let zero = frozen_response(&m, &y, &Tensor::zeros(vec![1, 1, side, side])).unwrap();
            for j in 0..n {
                let col = frozen_response(&m, &y, &Tensor::one_hot(vec![1, 1, side, side], j))
                    .unwrap()
                    .sub(&zero)
                    .unwrap();
                for i in 0..n {
                    let d = (lm.a.data()[i * n + j] - col.data()[i]).abs();
                    assert!(d <= 1e-9, "{arch:?} bias={bias} ({i},{j}): {d}");
                }
            }
            let row = jacobian_row(&m, &y, (3, 4)).unwrap();
            let k = 3 * side + 4;
            assert_eq!(row.data(), &lm.a.data()[k * n..(k + 1) * n]);
        }
    }
}

#[test]
fn homogeneity_holds_for_every_bias_free_architecture() {
    for arch in Arch::ALL {
        let m = model(arch, false, 5);
        let dev = homogeneity_deviation(&m, &image(24, 6), &[0.0, 0.25, 1.0, 2.0, 7.5]).unwrap();
        assert!(dev <= 1e-6, "{arch:?}: {dev}");
    }
}

#[test]
fn jacobian_is_scale_invariant_when_masks_agree() {
    let m = model(Arch::Dncnn, false, 7);
    let y = image(12, 8);
    for alpha in [0.5, 3.0] {
        let a = jacobian_full(&m, &y).unwrap();
        let b = jacobian_full(&m, &y.scale(alpha)).unwrap();
        assert_eq!(a.mask_record, b.mask_record);
        assert!(rel(b.a.data(), a.a.data()) <= 1e-12);
    }
}

#[test]
fn svd_identities() {
    let m = model(Arch::Unet, false, 9);
    let lm = jacobian_full(&m, &image(12, 10)).unwrap();
    let s = svd_analyze(&lm, 20.0).unwrap();
    let n = s.n();
    assert!(rel(&reconstruct(&s.u, &s.s, &s.v), lm.a.data()) <= 1e-10);
    assert!(s.s.windows(2).all(|w| w[0] >= w[1]));
    let fro: f64 = lm.a.data().iter().map(|v| v * v).sum();
    assert!((s.d - fro).abs() <= 1e-10 * fro);
    for k in 0..n {
        let (u, v) = (s.left(k), s.right(k));
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - s.alignment[k]).abs() < 1e-12);
        assert!((u.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-10);
    }
    assert!((1..=n).contains(&s.signal_rank()));
}

#[test]
fn monte_carlo_noise_variance_matches_d() {
    let m = model(Arch::Dncnn, false, 11);
    let lm = jacobian_full(&m, &image(16, 12)).unwrap();
    let d = svd_analyze(&lm, 1.0).unwrap().d;
    let mut rng = Rng::new(13);
    let sigma = 30.0;
    let est = (0..200)
        .map(|_| {
            let n: Vec<f64> = (0..lm.n()).map(|_| sigma * rng.normal()).collect();
            lm.apply(&n).iter().map(|v| v * v).sum::<f64>() / (sigma * sigma)
        })
        .sum::<f64>()
        / 200.0;
    assert!((est - d).abs() <= 0.1 * d, "monte-carlo {est} vs d {d}");
}

#[test]
fn projection_and_overlap_limits() {
    let m = model(Arch::Densenet, false, 14);
    let lm = jacobian_full(&m, &image(8, 15)).unwrap();
    let s = svd_analyze(&lm, 10.0).unwrap();
    let n = s.n() as f64;
    let x: Vec<f64> = (0..s.n()).map(|i| (i as f64).sin()).collect();
    assert!((projection_energy(&s, &x, n).unwrap() - 1.0).abs() < 1e-12);
    let top = s.left(0);
    assert!((projection_energy(&s, &top, 1.0).unwrap() - 1.0).abs() < 1e-12);
    assert!(projection_energy(&s, &x, n + 1.0).is_err());
    assert!((nested_overlap(&s, &s).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn identity_map_has_full_dimensionality_at_every_sigma() {
    let cfg = ModelConfig {
        norm_enabled: false,
        ..ModelConfig::desk(Arch::Dncnn).with_bias(false)
    };
    let mut m = Model::build(&cfg, &mut Rng::new(0)).unwrap();
    m.params_mut().iter_mut().for_each(|p| p.data.iter_mut().for_each(|v| *v = 0.0));
    let imgs = vec![image(6, 1), image(6, 2)];
    let (table, fit) = dimensionality_vs_sigma(&m, &imgs, &[10.0, 20.0, 40.0], 0).unwrap();
    assert!(table.column("d").unwrap().iter().all(|&d| (d - 36.0).abs() < 1e-9));
    assert!(fit.slope.abs() < 1e-9);
    assert!(dimensionality_vs_sigma(&m, &imgs, &[10.0, 20.0], 0).is_err());
    let s = svd_of(&lm_identity(36), 0.0).unwrap();
    assert!(s.s.iter().all(|&v| (v - 1.0).abs() < 1e-12));
}

fn lm_identity(n: usize) -> Tensor<f64> {
    Tensor::from_fn(vec![n, n], |k| if k / n == k % n { 1.0 } else { 0.0 })
}

#[test]
fn sweeps_are_seeded_and_cap_identical_inputs() {
    let m = model(Arch::Dncnn, false, 16);
    let imgs = vec![image(24, 17).reshape(vec![1, 24, 24]).unwrap()];
    let t = eval_sweep(&m, &imgs, &[0.0, 20.0], NoiseDistribution::Gaussian, 3).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.at(0.0, "input_psnr"), Some(PSNR_CAP));
    assert!(t.at(0.0, "output_psnr").unwrap() <= PSNR_CAP);
    let again = eval_sweep(&m, &imgs, &[0.0, 20.0], NoiseDistribution::Gaussian, 3).unwrap();
    assert_eq!(t.rows, again.rows);
    // A row's noise does not depend on the other rows in the sweep.
    let single = eval_sweep(&m, &imgs, &[20.0], NoiseDistribution::Gaussian, 3).unwrap();
    assert_ne!(single.rows[0][1], t.rows[1][1]);

    let b = bias_sweep(&m, &imgs, &[10.0, 50.0], 3).unwrap();
    for (bias, out) in b.column("bias_norm").unwrap().iter().zip(b.column("output_norm").unwrap()) {
        assert!(*bias <= 1e-9 * out);
    }
    let noise = b.column("noise_norm").unwrap();
    assert!((noise[0] / 240.0 - 1.0).abs() < 0.15, "noise norm {} for sigma 10 on 576 px", noise[0]);
}

#[test]
fn train_mode_residual_is_scale_invariant() {
    // Batch statistics make every layer after the first normalization
    // degree-0, so in train mode R(αy) = R(y) for f(y) = y - R(y).
    let cfg = ModelConfig::desk(Arch::Dncnn).with_bias(false);
    let m = Model::build(&cfg, &mut Rng::new(21)).unwrap();
    let y = image(10, 22);
    let r1 = y.sub(&m.forward(&y, Mode::Train).unwrap()).unwrap();
    let y2 = y.scale(2.0);
    let r2 = y2.sub(&m.forward(&y2, Mode::Train).unwrap()).unwrap();
    assert!(rel(r2.data(), r1.data()) <= 1e-9);
    let f = m.forward(&y2, Mode::Infer).unwrap();
    assert!(rel(f.data(), m.forward(&y, Mode::Infer).unwrap().scale(2.0).data()) <= 1e-9);
}
