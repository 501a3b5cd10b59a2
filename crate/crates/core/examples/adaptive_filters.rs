//! Adaptive filters: rows of the Jacobian at a few pixels, and their sums.

use bfdn::analysis::jacobian_row;
use bfdn::io::synth_images;
use bfdn::training::{sample_noise, NoiseDistribution};
use bfdn::{Arch, Model, ModelConfig, Rng};

fn main() -> bfdn::Result<()> {
    let m = Model::build(&ModelConfig::desk(Arch::Unet).with_bias(false), &mut Rng::new(8))?;
    let x = synth_images(1, 40, 9).remove(0).cast::<f64>();
    let y = x
        .add(&sample_noise(x.shape(), 30.0, NoiseDistribution::Gaussian, &mut Rng::new(10))?)?
        .reshape(vec![1, 1, 40, 40])?;
    for pixel in [(5, 5), (20, 20), (33, 12)] {
        let row = jacobian_row(&m, &y, pixel)?;
        let peak = row.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("pixel {pixel:?}: sum {:.4}  peak {peak:.4}  norm {:.4}", row.sum(), row.norm());
    }
    Ok(())
}
