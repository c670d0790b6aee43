// Forward and inverse spherical harmonic transforms, both analysis routes,
// and the SPH1/SPEC file formats.

use sphconv::io::{load_sph, load_spec, save_sph, save_spec, Dtype};
use sphconv::sft::{isft, sft};
use sphconv::synth::random_bandlimited_signal;
use sphconv::{Bandwidth, HarmonicTable, SftMethod};

fn run() -> Result<(), Box<dyn std::error::Error>> {
    for b in [4, 8, 16, 32] {
        let bw = Bandwidth::new(b)?;
        let table = HarmonicTable::shared(bw);
        let f = random_bandlimited_signal(bw, 1, b as u64);
        let direct = sft(&f, &table, SftMethod::Direct)?;
        let sepvar = sft(&f, &table, SftMethod::Sepvar)?;
        let back = isft(&sepvar, &table)?;
        println!(
            "b={b:>2} grid {0}x{0}: |direct - sepvar| = {1:.1e}, |ISFT(SFT f) - f| = {2:.1e}",
            bw.grid_size(),
            direct.max_abs_diff(&sepvar),
            back.max_abs_diff(&f)
        );
    }

    let dir = std::env::temp_dir().join(format!("sphconv-roundtrip-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let bw = Bandwidth::new(8)?;
    let f = random_bandlimited_signal(bw, 2, 1);
    save_sph(dir.join("f.sph"), &f, Dtype::F32)?;
    let coeffs = sft(&f, &HarmonicTable::shared(bw), SftMethod::Sepvar)?;
    save_spec(dir.join("f.spec"), &coeffs)?;
    let f32_copy = load_sph(dir.join("f.sph"))?;
    let spec_copy = load_spec(dir.join("f.spec"))?;
    println!(
        "files: SPH1 (f32) max error {:.1e}, SPEC (real layout) max error {:.1e}",
        f32_copy.max_abs_diff(&f),
        spec_copy.max_abs_diff(&coeffs)
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
