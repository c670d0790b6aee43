//! Timing harness comparing the two forward transform routes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::Bandwidth;
use crate::harmonics::HarmonicTable;
use crate::sft::{sft_direct, sft_sepvar};
use crate::synth::random_bandlimited_signal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub bandwidth: u32,
    pub reps: usize,
    pub direct_median_s: f64,
    pub sepvar_median_s: f64,
    /// `direct / sepvar`.
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub entries: Vec<BenchEntry>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time of each route on one single-channel signal per bandwidth.
/// Tables are built before timing; repetitions alternate between routes.
pub fn bench_sft(bandwidths: &[Bandwidth], reps: usize, seed: u64) -> Result<BenchReport> {
    let reps = reps.max(1);
    let mut entries = Vec::with_capacity(bandwidths.len());
    for &b in bandwidths {
        let table = HarmonicTable::shared(b);
        let signal = random_bandlimited_signal(b, 1, seed);
        sft_sepvar(&signal, &table)?;
        let mut direct = Vec::with_capacity(reps);
        let mut sepvar = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t = Instant::now();
            std::hint::black_box(sft_direct(&signal, &table)?);
            direct.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            std::hint::black_box(sft_sepvar(&signal, &table)?);
            sepvar.push(t.elapsed().as_secs_f64());
        }
        let (d, s) = (median(direct), median(sepvar));
        entries.push(BenchEntry {
            bandwidth: b.get(),
            reps,
            direct_median_s: d,
            sepvar_median_s: s,
            speedup: d / s,
        });
    }
    Ok(BenchReport { entries })
}
