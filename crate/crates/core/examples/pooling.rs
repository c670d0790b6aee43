// Spectral, weighted-average and max pooling, and how far each is from
// commuting with a rotation.

use sphconv::rotation::rotate_signal;
use sphconv::sft::{forward, inverse};
use sphconv::spectral::{max_pool, spectral_pool, weighted_avg_pool};
use sphconv::synth::random_bandlimited_signal;
use sphconv::{Bandwidth, HarmonicTable, RotationZYZ, SphericalSignal};

fn relative(a: &SphericalSignal, b: &SphericalSignal) -> f64 {
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    SphericalSignal::from_values(a.bandwidth(), a.channels(), diff).unwrap().weighted_norm() / a.weighted_norm()
}

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let b = Bandwidth::new(16)?;
    let half = b.halved()?;
    let (table, half_table) = (HarmonicTable::shared(b), HarmonicTable::shared(half));
    // Low-degree content. Spatial pooling still fails to commute: a 2x2 block
    // is centred half a fine cell away from the coarse grid node it feeds.
    let f = inverse(&forward(&random_bandlimited_signal(Bandwidth::new(6)?, 1, 2)).zero_pad(b)?)?;
    let r = RotationZYZ::new(1.0, 0.7, 0.2);
    let rf = rotate_signal(&f, &r, &table)?;

    let sp = |s: &SphericalSignal| inverse(&spectral_pool(&forward(s)).unwrap()).unwrap();
    let wap = |s: &SphericalSignal| weighted_avg_pool(s).unwrap();
    let max = |s: &SphericalSignal| max_pool(s).unwrap();
    let pools: [(&str, &dyn Fn(&SphericalSignal) -> SphericalSignal); 3] = [("spectral", &sp), ("WAP", &wap), ("max", &max)];
    println!("{}x{} -> {}x{}", b.grid_size(), b.grid_size(), half.grid_size(), half.grid_size());
    for (name, pool) in pools {
        let err = relative(&pool(&rf), &rotate_signal(&pool(&f), &r, &half_table)?);
        println!("  {name:<8} |pool(R f) - R pool(f)| / |R pool(f)| = {err:.2e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
