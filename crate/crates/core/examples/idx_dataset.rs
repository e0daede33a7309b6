//! Round-trip a tiny dataset through the IDX format and train on it.

use autohyper::trainer::{
    encode_idx_images, encode_idx_labels, load_idx, synthetic_shapes, train_epochs, NetSpec, OptimizerConfig,
    OptimizerKind, TrainConfig,
};

fn main() -> autohyper::Result<()> {
    let shapes = synthetic_shapes(256, 4, 0.1)?;
    let (h, w) = (shapes.height(), shapes.width());
    let pixels: Vec<u8> = (0..shapes.len())
        .flat_map(|i| shapes.image(i).iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    let labels: Vec<u8> = shapes.labels().iter().map(|&l| l as u8).collect();

    let dir = tempfile::tempdir().expect("temp dir");
    let (img_path, lbl_path) = (dir.path().join("images.idx3"), dir.path().join("labels.idx1"));
    std::fs::write(&img_path, encode_idx_images(h, w, &pixels)).expect("write");
    std::fs::write(&lbl_path, encode_idx_labels(&labels)).expect("write");

    let data = load_idx(&img_path, &lbl_path)?;
    println!("{} images of {}x{}, {} classes", data.len(), data.height(), data.width(), data.classes());

    let spec = NetSpec::mini(1, h, w, data.classes());
    let config = TrainConfig::new(OptimizerConfig::new(OptimizerKind::Adam, 3e-3, 0.0)?, 5, 0);
    let run = train_epochs(&spec, &data, &config)?;
    println!("accuracy after 5 epochs: {:.3}", run.final_accuracy().unwrap_or(0.0));
    Ok(())
}
