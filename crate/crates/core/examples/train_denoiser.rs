//! Train a small bias-free DnCNN on synthetic images and save it.
//!
//! `cargo run --example train_denoiser -- [out.bfdn]`

use bfdn::io::synth_images;
use bfdn::model::save;
use bfdn::training::{train, Dataset, NoiseSpec, TrainConfig};
use bfdn::{Arch, Model, ModelConfig, Rng};

fn main() -> bfdn::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "denoiser.bfdn".into());
    let data = Dataset::split(synth_images(8, 64, 1), 0.25, &mut Rng::new(1));
    let model_cfg = ModelConfig {
        depth: 5,
        channels: 16,
        ..ModelConfig::desk(Arch::Dncnn).with_bias(false)
    };
    let model = Model::build(&model_cfg, &mut Rng::new(2))?;
    let cfg = TrainConfig {
        noise: NoiseSpec::gaussian(0.0, 25.0),
        patch_size: 32,
        patch_stride: 16,
        epochs: 4,
        steps_per_epoch: Some(25),
        seed: 3,
        ..TrainConfig::default()
    };
    let outcome = train(model, &data, &cfg)?;
    for r in &outcome.log.rows {
        println!("epoch {:>2}  mse {:>9.3}  val psnr {:>6.2} dB  lr {:.1e}", r.epoch, r.mse, r.val_psnr, r.lr);
    }
    save(&outcome.model, Some(&outcome.optimizer), &out)?;
    println!("{} steps, saved to {out}", outcome.steps);
    Ok(())
}
