//! Per-layer, per-mode stable rank of an untrained network.

use autohyper::metrics::{global_stable_rank, layer_stable_rank, RankProbe};
use autohyper::tensor::{unfold, Mode};
use autohyper::trainer::{to_tensors, MiniConvNet, NetSpec};

fn main() -> autohyper::Result<()> {
    let net = MiniConvNet::<f32>::new(NetSpec::mini(1, 16, 16, 4), 0)?;
    let weights = to_tensors(&net.conv_snapshot())?;
    for w in &weights {
        println!("{} dims {:?}", w.name(), w.dims());
        for mode in Mode::ALL {
            let u = unfold(w, mode);
            println!(
                "  mode {:?}: unfolded {}x{}, G = {:.4}",
                mode,
                u.rows(),
                u.cols(),
                layer_stable_rank(w, mode)?
            );
        }
    }
    let probe = RankProbe::from_snapshots("init", &[weights])?;
    println!("Z over one snapshot: {:.3}", global_stable_rank(&probe)?);
    Ok(())
}
