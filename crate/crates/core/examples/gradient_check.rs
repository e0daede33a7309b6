//! Compare backprop against central differences on random coordinates.

use autohyper::trainer::{gradient_check, synthetic_shapes, MiniConvNet, NetSpec, ParamSubset};

fn main() -> autohyper::Result<()> {
    let data = synthetic_shapes(64, 0, 0.2)?;
    let (x, y) = data.gather::<f64>(&(0..8).collect::<Vec<_>>());
    for seed in 0..5 {
        let net = MiniConvNet::<f64>::new(NetSpec::mini(1, 16, 16, 4), seed)?;
        let r = gradient_check(&net, &x, &y, 300, ParamSubset::All, seed);
        println!(
            "seed {seed}: max relative error {:.2e} over {} coordinates, {} skipped at ReLU or pooling switches",
            r.max_rel_error, r.checked, r.skipped_kinks
        );
    }
    Ok(())
}
