// Per-layer equivariance error of small networks under rotations, in the
// layout of an ablation table.

use sphconv::equivariance::{format_table, measure, MeasureOptions, Stimuli};
use sphconv::network::{FilterMode, LayerConfig, NetworkConfig, ParameterStore, PoolKind};
use sphconv::spectral::Nonlinearity;
use sphconv::synth::random_star_mesh;
use sphconv::Bandwidth;

fn network(b: u32, pool: PoolKind, nonlinearity: Nonlinearity) -> sphconv::Result<NetworkConfig> {
    let mut cfg = NetworkConfig::toy(Bandwidth::new(b)?, 2, 3);
    cfg.layers = vec![
        LayerConfig::new(2, 8, FilterMode::Anchored(4), pool),
        LayerConfig::new(8, 8, FilterMode::Anchored(4), pool),
    ];
    for layer in &mut cfg.layers {
        layer.nonlinearity = nonlinearity;
    }
    Ok(cfg)
}

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let meshes = Stimuli::Meshes((0..4).map(random_star_mesh).collect());
    let rows = [
        (16, PoolKind::Wap, Nonlinearity::Relu, false),
        (16, PoolKind::Max, Nonlinearity::Relu, false),
        (16, PoolKind::Sp, Nonlinearity::Relu, false),
        (8, PoolKind::Wap, Nonlinearity::Relu, false),
        (16, PoolKind::Wap, Nonlinearity::Relu, true),
        (16, PoolKind::Sp, Nonlinearity::None, true),
    ];
    let mut reports = Vec::new();
    for (b, pool, nonlinearity, bandlimit) in rows {
        let cfg = network(b, pool, nonlinearity)?;
        let params = ParameterStore::init(&cfg, 1)?;
        let opts = MeasureOptions {
            bandlimit,
            seed: 2,
            ..Default::default()
        };
        reports.push(measure(&cfg, &params, &meshes, &opts)?);
    }
    print!("{}", format_table(&reports));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
