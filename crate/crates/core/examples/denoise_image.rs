//! Denoise a synthetic image with a checkpoint (or a briefly trained
//! model) and write clean, noisy and denoised PGMs.
//!
//! `cargo run --example denoise_image -- [model.bfdn]`

use bfdn::io::{save_pgm, synth_images, PgmImage};
use bfdn::model::load;
use bfdn::training::{psnr, sample_noise, ssim, train, Dataset, NoiseDistribution, NoiseSpec, TrainConfig};
use bfdn::{Arch, Mode, Model, ModelConfig, Rng};

fn main() -> bfdn::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => load(path)?.0,
        None => {
            let cfg = ModelConfig {
                depth: 5,
                channels: 16,
                ..ModelConfig::desk(Arch::Dncnn).with_bias(false)
            };
            let data = Dataset::split(synth_images(6, 64, 4), 0.0, &mut Rng::new(0));
            let tc = TrainConfig {
                noise: NoiseSpec::gaussian(0.0, 30.0),
                patch_size: 32,
                epochs: 3,
                steps_per_epoch: Some(30),
                ..TrainConfig::default()
            };
            train(Model::build(&cfg, &mut Rng::new(5))?, &data, &tc)?.model
        }
    };
    let x = synth_images(1, 96, 99).remove(0).cast::<f64>();
    let sigma = 25.0;
    let y = x.add(&sample_noise(x.shape(), sigma, NoiseDistribution::Gaussian, &mut Rng::new(6))?)?;
    let f = model.forward(&y.clone().reshape(vec![1, 1, 96, 96])?, Mode::Infer)?.reshape(vec![1, 96, 96])?;
    println!("sigma {sigma}: input {:.2} dB / ssim {:.3}", psnr(&x, &y)?, ssim(&x, &y)?);
    println!("          output {:.2} dB / ssim {:.3}", psnr(&x, &f)?, ssim(&x, &f)?);
    for (name, t) in [("clean.pgm", &x), ("noisy.pgm", &y), ("denoised.pgm", &f)] {
        save_pgm(&PgmImage::from_tensor(t)?, name)?;
    }
    Ok(())
}
