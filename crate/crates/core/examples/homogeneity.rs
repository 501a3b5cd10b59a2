//! Positive homogeneity `f(αy) = αf(y)` of every bias-free architecture,
//! and its failure once additive constants are present.

use bfdn::analysis::homogeneity_deviation;
use bfdn::model::ParamRole;
use bfdn::{Arch, Model, ModelConfig, Rng, Tensor};

fn main() -> bfdn::Result<()> {
    let mut rng = Rng::new(1);
    let y = Tensor::from_fn(vec![1, 1, 32, 32], |_| rng.uniform(0.0, 255.0));
    let alphas = [0.0, 0.25, 1.0, 2.0, 7.5];
    for arch in Arch::ALL {
        for bias in [false, true] {
            let cfg = ModelConfig::desk(arch).with_bias(bias);
            let mut m = Model::build(&cfg, &mut Rng::new(2))?;
            for p in m.params_mut().iter_mut().filter(|p| p.role == ParamRole::Bias) {
                p.data.iter_mut().for_each(|v| *v = 0.05);
            }
            let dev = homogeneity_deviation(&m, &y, &alphas)?;
            println!("{:>8} bias={bias:<5} max deviation {dev:.2e}", arch.name());
        }
    }
    Ok(())
}
