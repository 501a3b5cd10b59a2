//! Jacobian SVD of a denoiser: singular values, effective dimensionality,
//! left/right alignment and clean-image projection energy.

use bfdn::analysis::{jacobian_full, projection_energy, svd_analyze};
use bfdn::io::synth_images;
use bfdn::training::{sample_noise, NoiseDistribution};
use bfdn::{Arch, Model, ModelConfig, Rng};

fn main() -> bfdn::Result<()> {
    let m = Model::build(&ModelConfig::desk(Arch::Dncnn).with_bias(false), &mut Rng::new(11))?;
    let x = synth_images(1, 32, 12).remove(0).cast::<f64>();
    for sigma in [10.0, 50.0] {
        let y = x
            .add(&sample_noise(x.shape(), sigma, NoiseDistribution::Gaussian, &mut Rng::new(13))?)?
            .reshape(vec![1, 1, 32, 32])?;
        let svd = svd_analyze(&jacobian_full(&m, &y)?, sigma)?;
        println!(
            "sigma {sigma:>4}: d {:.1} of {}  s[0..4] {:.3?}  below 0.1 s_max {:.0}%  median alignment {:.3}  clean energy at d {:.3}",
            svd.d,
            svd.n(),
            &svd.s[..4],
            100.0 * svd.fraction_below(0.1),
            svd.median_alignment(),
            projection_energy(&svd, x.data(), svd.d.min(svd.n() as f64))?
        );
    }
    Ok(())
}
