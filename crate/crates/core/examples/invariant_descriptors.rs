// Rotation-invariant descriptors: WGAP of a feature map and the per-degree
// magnitudes of its spectrum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sphconv::rotation::{rotate_signal, rotate_spectrum};
use sphconv::sft::forward;
use sphconv::spectral::{magl, wgap};
use sphconv::synth::random_bandlimited_signal;
use sphconv::{Bandwidth, HarmonicTable, RotationZYZ};

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let b = Bandwidth::new(16)?;
    let table = HarmonicTable::shared(b);
    // Positive, feature-map-like signal.
    let mut f = random_bandlimited_signal(b, 2, 5);
    f.values_mut().iter_mut().for_each(|v| *v += 3.0);
    let f = sphconv::sft::inverse(&forward(&f))?;
    let c = forward(&f);
    let (w0, m0) = (wgap(&f), magl(&c));
    println!("WGAP {:?}", w0.values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("MAG-L (channel 0, l < 6) {:?}", m0.values[..6].iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut w_worst, mut m_worst) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let r = RotationZYZ::random(&mut rng);
        w_worst = w_worst.max(w0.relative_distance(&wgap(&rotate_signal(&f, &r, &table)?)));
        m_worst = m_worst.max(m0.relative_distance(&magl(&rotate_spectrum(&c, &r))));
    }
    println!("over 20 random rotations: WGAP deviates up to {w_worst:.1e}, MAG-L up to {m_worst:.1e}");

    let step = RotationZYZ::about_z(std::f64::consts::TAU / b.grid_size() as f64);
    let rolled = wgap(&rotate_signal(&f, &step, &table)?);
    println!("one-column azimuthal roll: WGAP deviates {:.1e}", w0.relative_distance(&rolled));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
