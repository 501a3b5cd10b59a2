//! Noise-level sweeps of a briefly trained biased/bias-free pair: PSNR
//! against sigma and net-bias magnitudes.

use bfdn::analysis::{bias_sweep, eval_sweep};
use bfdn::io::synth_images;
use bfdn::training::{train, Dataset, NoiseDistribution, NoiseSpec, TrainConfig};
use bfdn::{Arch, Model, ModelConfig, Rng};

fn main() -> bfdn::Result<()> {
    let data = Dataset::split(synth_images(8, 64, 21), 0.25, &mut Rng::new(21));
    let test: Vec<_> = synth_images(2, 64, 22).iter().map(|t| t.cast::<f64>()).collect();
    let sigmas = [5.0, 10.0, 30.0, 60.0, 90.0];
    for bias in [true, false] {
        let cfg = ModelConfig {
            depth: 5,
            channels: 16,
            ..ModelConfig::desk(Arch::Dncnn).with_bias(bias)
        };
        let tc = TrainConfig {
            noise: NoiseSpec::gaussian(0.0, 10.0),
            patch_size: 32,
            epochs: 3,
            steps_per_epoch: Some(40),
            seed: 23,
            ..TrainConfig::default()
        };
        let model = train(Model::build(&cfg, &mut Rng::new(23))?, &data, &tc)?.model;
        let psnr = eval_sweep(&model, &test, &sigmas, NoiseDistribution::Gaussian, 24)?;
        let bias_t = bias_sweep(&model, &test, &sigmas, 24)?;
        println!("bias={bias}");
        for (p, b) in psnr.rows.iter().zip(&bias_t.rows) {
            println!("  sigma {:>4}: input {:>6.2} dB  output {:>6.2} dB  |b_y| {:>10.3e}", p[0], p[1], p[2], b[2]);
        }
    }
    Ok(())
}
