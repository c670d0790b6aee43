// Convolution with zonal filters in the harmonic domain. Anchored filters
// interpolate a few spectral values; convolution commutes with rotations.

use sphconv::rotation::rotate_spectrum;
use sphconv::sft::forward;
use sphconv::spectral::{conv_spectral, ZonalFilterSpec};
use sphconv::synth::random_smooth_signal;
use sphconv::{Bandwidth, RotationZYZ};

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let b = Bandwidth::new(16)?;
    // Four anchors decaying with degree: a smooth, localized low-pass filter.
    let filter = ZonalFilterSpec::anchored_uniform(b, vec![1.0, 0.6, 0.2, 0.0])?;
    let spectrum = filter.realize()?;
    println!("anchored spectrum by degree:");
    for (l, h) in spectrum.iter().enumerate() {
        println!("  l={l:>2} {h:+.3} {}", "#".repeat((h.abs() * 40.0).round() as usize));
    }

    let spatial = filter.to_signal()?;
    let side = b.grid_size();
    let profile: Vec<String> = (0..side).step_by(4).map(|j| format!("{:+.2}", spatial.get(0, j, 0))).collect();
    println!("filter along a meridian (every 4th row): {}", profile.join(" "));

    let f = forward(&random_smooth_signal(b, 1, 3));
    let r = RotationZYZ::new(0.4, 1.1, -0.7);
    let lhs = conv_spectral(&rotate_spectrum(&f, &r), &filter)?;
    let rhs = rotate_spectrum(&conv_spectral(&f, &filter)?, &r);
    println!("|conv(R f) - R conv(f)| = {:.1e}", lhs.max_abs_diff(&rhs));

    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
