//! First-order decomposition `f(y) = A_y y + b_y` of a biased and a
//! bias-free DnCNN.

use bfdn::analysis::{jacobian_full, net_bias};
use bfdn::model::ParamRole;
use bfdn::{Arch, Model, ModelConfig, Rng, Tensor};

fn main() -> bfdn::Result<()> {
    let mut rng = Rng::new(3);
    let y = Tensor::from_fn(vec![1, 1, 20, 20], |_| 128.0 + 40.0 * rng.normal());
    for bias in [true, false] {
        let mut m = Model::build(&ModelConfig::desk(Arch::Dncnn).with_bias(bias), &mut Rng::new(4))?;
        for p in m.params_mut().iter_mut().filter(|p| matches!(p.role, ParamRole::Bias | ParamRole::Shift)) {
            p.data.iter_mut().for_each(|v| *v = (0.1 * rng.normal()) as f32);
        }
        let lm = jacobian_full(&m, &y)?;
        let b = net_bias(&m, &y)?;
        println!(
            "bias={bias:<5} |f(y)| {:>9.2}  |b_y| {:>9.3e}  |f - A y - b| / |f| {:.1e}",
            lm.f.norm(),
            b.norm(),
            {
                let ay = lm.apply(lm.y.data());
                let r: f64 = ay.iter().zip(b.data()).zip(lm.f.data()).map(|((a, b), f)| (f - a - b).powi(2)).sum();
                r.sqrt() / lm.f.norm()
            }
        );
    }
    Ok(())
}
