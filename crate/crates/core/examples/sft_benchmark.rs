// Median timings of the direct and separation-of-variables transforms.

use sphconv::bench::bench_sft;
use sphconv::Bandwidth;

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let bandwidths = [8, 16, 32].map(|b| Bandwidth::new(b).unwrap());
    let report = bench_sft(&bandwidths, reps, 0)?;
    println!("{:>4} {:>12} {:>12} {:>8}", "b", "direct (s)", "sepvar (s)", "speedup");
    for e in &report.entries {
        println!("{:>4} {:>12.3e} {:>12.3e} {:>7.1}x", e.bandwidth, e.direct_median_s, e.sepvar_median_s, e.speedup);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
