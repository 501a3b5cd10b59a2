//! Save and reload a checkpoint of every architecture.

use bfdn::model::{load_from_bytes, save_to_bytes};
use bfdn::{Arch, Model, ModelConfig, Rng};

fn main() -> bfdn::Result<()> {
    for arch in Arch::ALL {
        let m = Model::build(&ModelConfig::desk(arch), &mut Rng::new(31))?;
        let bytes = save_to_bytes(&m, None)?;
        let (back, _) = load_from_bytes(&bytes)?;
        let same = m.params().iter().zip(back.params()).all(|(a, b)| a.data == b.data);
        println!(
            "{:>8}: {} parameters in {} layers, {} bytes, identical after reload: {same}",
            arch.name(),
            m.parameter_count(),
            m.layers().len(),
            bytes.len()
        );
    }
    Ok(())
}
