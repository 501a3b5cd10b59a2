mod common;

use bfdn::io::synth_images;
use bfdn::training::{psnr, ssim, train, Dataset, NoiseSpec, Schedule, TrainConfig};
use bfdn::{Arch, Model, ModelConfig, Rng, Tensor};
use common::{psnr_direct, ssim_direct};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn tiny(seed: u64) -> Model {
    let cfg = ModelConfig {
        depth: 4,
        channels: 8,
        ..ModelConfig::desk(Arch::Dncnn).with_bias(false).with_seed(seed)
    };
    Model::build(&cfg, &mut Rng::new(seed)).unwrap()
}

fn small_run(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        noise: NoiseSpec::gaussian(0.0, 25.0),
        patch_size: 24,
        patch_stride: 12,
        batch_size: 4,
        epochs,
        steps_per_epoch: Some(6),
        schedule: Schedule::Constant,
        validation_patches: 8,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn sigma_draws_are_uniform_over_the_range() {
    let spec = NoiseSpec::gaussian(5.0, 45.0);
    let mut rng = Rng::new(99);
    const BINS: usize = 20;
    const DRAWS: usize = 100_000;
    let mut counts = [0usize; BINS];
    for _ in 0..DRAWS {
        let s = spec.draw_sigma(&mut rng);
        assert!(spec.contains(s));
        counts[(((s - 5.0) / 40.0 * BINS as f64) as usize).min(BINS - 1)] += 1;
    }
    let expected = DRAWS as f64 / BINS as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((BINS - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi-square {chi2:.2} >= {critical:.2}");
}

#[test]
fn constant_images_loss_decreases_every_epoch() {
    let images: Vec<Tensor<f32>> = [60.0, 128.0, 200.0]
        .iter()
        .map(|&v| Tensor::full(vec![1, 48, 48], v))
        .collect();
    let data = Dataset {
        train: images,
        validation: Vec::new(),
    };
    let cfg = TrainConfig {
        noise: NoiseSpec::gaussian(10.0, 10.0),
        steps_per_epoch: Some(15),
        ..small_run(6, 4)
    };
    let out = train(tiny(4), &data, &cfg).unwrap();
    let mse: Vec<f64> = out.log.rows.iter().map(|r| r.mse).collect();
    assert_eq!(mse.len(), 6);
    assert!(mse.windows(2).all(|w| w[1] < w[0]), "epoch losses {mse:?}");
}

#[test]
fn early_stopping_returns_the_best_logged_epoch() {
    let data = Dataset::split(synth_images(6, 48, 8), 0.2, &mut Rng::new(8));
    let cfg = TrainConfig {
        early_stopping: true,
        patience: 2,
        lr_initial: 5e-3,
        ..small_run(8, 9)
    };
    let out = train(tiny(9), &data, &cfg).unwrap();
    let best = out.log.best_epoch().unwrap();
    let top = out.log.rows.iter().map(|r| r.val_psnr).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.log.rows[best - 1].val_psnr, top);

    // Replaying the run up to the best epoch yields the returned parameters.
    let replay = train(
        tiny(9),
        &data,
        &TrainConfig {
            early_stopping: false,
            epochs: best,
            ..cfg.clone()
        },
    )
    .unwrap();
    for (a, b) in out.model.params().iter().zip(replay.model.params()) {
        assert_eq!(a.data, b.data, "{}", a.name);
    }
    let strip = |rows: &[bfdn::training::TrainRow]| -> Vec<(usize, f64, f64, f64)> {
        rows.iter().map(|r| (r.epoch, r.mse, r.val_psnr, r.lr)).collect()
    };
    assert_eq!(strip(&out.log.rows[..best]), strip(&replay.log.rows));
}

#[test]
fn metrics_match_direct_formulas() {
    let mut rng = Rng::new(12);
    let (h, w) = (23, 31);
    let x: Vec<f64> = (0..h * w).map(|_| rng.uniform(0.0, 255.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v + 20.0 * rng.normal()).collect();
    let tx = Tensor::new(vec![1, h, w], x.clone()).unwrap();
    let ty = Tensor::new(vec![1, h, w], y.clone()).unwrap();
    assert!((psnr(&tx, &ty).unwrap() - psnr_direct(&x, &y)).abs() <= 1e-9);
    assert!((ssim(&tx, &ty).unwrap() - ssim_direct(&x, &y, h, w)).abs() <= 1e-6);
}

#[test]
fn inverted_structured_image_has_low_ssim() {
    let x = synth_images(1, 64, 3).remove(0).cast::<f64>();
    let inv = x.map(|v| 255.0 - v);
    let s = ssim(&x, &inv).unwrap();
    assert!(s < 0.5, "ssim {s}");
    assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
}
