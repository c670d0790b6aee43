// Train a small classifier on canonically oriented synthetic signals with
// azimuthal augmentation, then test it on arbitrarily rotated ones.

use sphconv::io::{read_checkpoint, write_checkpoint};
use sphconv::network::{accuracy, train, NetworkConfig, ParameterStore, RotationAugment, TrainSchedule};
use sphconv::synth::{toy_dataset, Orientation, ToyConfig, ToyKind};
use sphconv::Bandwidth;

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let b = Bandwidth::new(16)?;
    let train_cfg = ToyConfig {
        kind: ToyKind::Blobs,
        bandwidth: b,
        classes: 3,
        count: 90,
        seed: 1,
        orientation: Orientation::Canonical,
    };
    let test_cfg = ToyConfig {
        seed: 2,
        orientation: Orientation::Arbitrary,
        ..train_cfg.clone()
    };
    let (train_set, test_set) = (toy_dataset(&train_cfg)?, toy_dataset(&test_cfg)?);

    let cfg = NetworkConfig::toy(b, 1, 3);
    // 48 epochs, rate 1e-3 divided by 5 after epochs 32 and 40.
    let mut schedule = TrainSchedule::default();
    schedule.augment.rotate = RotationAugment::Z;
    let init = ParameterStore::init(&cfg, 0)?;
    println!("{} trainable parameters", init.num_parameters());
    let before = accuracy(&cfg, &init, &test_set)?;

    let ckpt = std::env::temp_dir().join(format!("sphconv-toy-{}.ckpt", std::process::id()));
    let outcome = train(&cfg, init, &train_set, &schedule, Some(&ckpt))?;
    for e in outcome.log.iter().filter(|e| e.epoch % 8 == 0) {
        println!("epoch {:>2} lr {:.0e} loss {:.4} train acc {:.2}", e.epoch, e.learning_rate, e.mean_loss, e.train_accuracy);
    }
    write_checkpoint(&ckpt, &outcome.params)?;
    let restored = read_checkpoint(&ckpt)?;
    std::fs::remove_file(&ckpt)?;
    println!(
        "rotated test accuracy: {before:.2} untrained, {:.2} trained (checkpoint reload {:.2})",
        accuracy(&cfg, &outcome.params, &test_set)?,
        accuracy(&cfg, &restored, &test_set)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
