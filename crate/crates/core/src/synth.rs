//! Seeded synthetic data: random spectra, toy classification sets and
//! star-shaped meshes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{spherical_to_cartesian, Bandwidth};
use crate::harmonics::HarmonicTable;
use crate::mesh::TriangleMesh;
use crate::rotation::{rotate_signal, RotationZYZ};
use crate::sft::{bandlimit, inverse, SpectralCoeffs, SphericalSignal};

/// Random spectrum of a real signal, entries uniform in `[−1, 1]`.
pub fn random_real_coeffs(bandwidth: Bandwidth, channels: usize, seed: u64) -> SpectralCoeffs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = SpectralCoeffs::zeros(bandwidth, channels);
    for ch in 0..channels {
        for l in 0..bandwidth.degrees() {
            c.set(ch, l, 0, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
            for m in 1..=l as i64 {
                let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                c.set(ch, l, m, v);
            }
        }
    }
    c.enforce_real_symmetry();
    c
}

/// A real signal with a random spectrum filling every degree below `b`.
pub fn random_bandlimited_signal(bandwidth: Bandwidth, channels: usize, seed: u64) -> SphericalSignal {
    inverse(&random_real_coeffs(bandwidth, channels, seed)).expect("real spectrum synthesizes")
}

/// Smooth random signal that is not bandlimited at `b`: a sum of a few
/// sharp bumps plus a low-degree background.
pub fn random_smooth_signal(bandwidth: Bandwidth, channels: usize, seed: u64) -> SphericalSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<Vec<([f64; 3], f64, f64)>> = (0..channels)
        .map(|_| {
            (0..6)
                .map(|_| {
                    let dir = RotationZYZ::random(&mut rng).apply([0.0, 0.0, 1.0]);
                    (dir, rng.gen_range(-1.0..1.0), rng.gen_range(10.0..40.0))
                })
                .collect()
        })
        .collect();
    SphericalSignal::from_fn(bandwidth, channels, |c, t, p| {
        let x = spherical_to_cartesian(t, p);
        0.3 * x[2]
            + bumps[c]
                .iter()
                .map(|(mu, a, k)| a * (k * (mu[0] * x[0] + mu[1] * x[1] + mu[2] * x[2] - 1.0)).exp())
                .sum::<f64>()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyKind {
    /// Class `c` carries `c + 1` smooth blobs of equal total mass.
    Blobs,
    /// Class `c` concentrates its energy in degree `c + 1`.
    Harmonics,
}

impl std::str::FromStr for ToyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(ToyKind::Blobs),
            "harmonics" => Ok(ToyKind::Harmonics),
            _ => Err(Error::Config(format!("unknown dataset kind {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Class templates in a fixed pose (only small per-sample jitter).
    Canonical,
    /// Each sample additionally gets a uniformly random rotation.
    Arbitrary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub kind: ToyKind,
    pub bandwidth: Bandwidth,
    pub classes: usize,
    pub count: usize,
    pub seed: u64,
    pub orientation: Orientation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSignal {
    pub signal: SphericalSignal,
    pub label: usize,
}

/// Generates `count` samples, labels cycling through the classes.
pub fn toy_dataset(cfg: &ToyConfig) -> Result<Vec<LabeledSignal>> {
    if cfg.classes == 0 {
        return Err(Error::Config("need at least one class".into()));
    }
    if cfg.kind == ToyKind::Harmonics && cfg.classes + 1 >= cfg.bandwidth.degrees() {
        return Err(Error::Config(format!(
            "bandwidth {} too small for {} harmonic classes",
            cfg.bandwidth, cfg.classes
        )));
    }
    let table = HarmonicTable::shared(cfg.bandwidth);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.count)
        .map(|i| {
            let label = i % cfg.classes;
            let signal = match cfg.kind {
                ToyKind::Blobs => blob_sample(cfg.bandwidth, label, &mut rng),
                ToyKind::Harmonics => harmonic_sample(cfg.bandwidth, label, &mut rng),
            };
            let signal = bandlimit(&signal, &table)?;
            let signal = match cfg.orientation {
                Orientation::Canonical => signal,
                Orientation::Arbitrary => rotate_signal(&signal, &RotationZYZ::random(&mut rng), &table)?,
            };
            Ok(LabeledSignal { signal, label })
        })
        .collect()
}

fn blob_sample(b: Bandwidth, label: usize, rng: &mut ChaCha8Rng) -> SphericalSignal {
    let n = label + 1;
    let blobs: Vec<([f64; 3], f64, f64)> = (0..n)
        .map(|i| {
            let theta = PI / 2.0 + rng.gen_range(-0.1..0.1);
            let phi = 2.0 * PI * i as f64 / n as f64 + rng.gen_range(-0.1..0.1);
            let kappa: f64 = 8.0 * rng.gen_range(0.9..1.1);
            // unit mass: ∫ exp(κ(μ·x − 1)) dΩ = 2π(1 − e^{−2κ})/κ
            let amp = kappa / (2.0 * PI * (1.0 - (-2.0 * kappa).exp())) / n as f64 * rng.gen_range(0.9..1.1);
            (spherical_to_cartesian(theta, phi), kappa, amp)
        })
        .collect();
    SphericalSignal::from_fn(b, 1, |_, t, p| {
        let x = spherical_to_cartesian(t, p);
        blobs
            .iter()
            .map(|(mu, k, a)| a * (k * (mu[0] * x[0] + mu[1] * x[1] + mu[2] * x[2] - 1.0)).exp())
            .sum()
    })
}

fn harmonic_sample(b: Bandwidth, label: usize, rng: &mut ChaCha8Rng) -> SphericalSignal {
    let dominant = label + 1;
    let mut c = random_real_coeffs(b, 1, rng.gen());
    for l in 0..b.degrees() {
        let scale = if l == dominant { 1.0 } else { 0.1 / (1 + l) as f64 };
        c.degree_block_mut(0, l).iter_mut().for_each(|v| *v *= scale);
    }
    inverse(&c).expect("real spectrum synthesizes")
}

/// Random star-shaped mesh: a level-3 icosphere whose radius is modulated
/// by five random smooth lobes; radii stay within `[0.55, 1.45]`.
pub fn random_star_mesh(seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lobes: Vec<([f64; 3], f64)> = (0..5)
        .map(|_| (RotationZYZ::random(&mut rng).apply([0.0, 0.0, 1.0]), rng.gen_range(-1.0..1.0)))
        .collect();
    let total: f64 = lobes.iter().map(|(_, a)| a.abs()).sum();
    TriangleMesh::icosphere(3).displaced_radially(|x| {
        let s: f64 = lobes
            .iter()
            .map(|(mu, a)| a * (3.0 * (mu[0] * x[0] + mu[1] * x[1] + mu[2] * x[2] - 1.0)).exp())
            .sum();
        1.0 + 0.45 * s / total
    })
}
