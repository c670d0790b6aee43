//! Spherical Fourier transforms between sampled signals and harmonic spectra.
//!
//! Two forward routes are provided. [`sft_direct`] evaluates the quadrature
//! sum over every sample for every coefficient. [`sft_sepvar`] separates the
//! sum: one FFT per colatitude row, then a dense associated Legendre
//! transform per order. Both compute only orders `m ≥ 0` and fill `m < 0`
//! through the real-input symmetry `f̂_ℓ^{−m} = (−1)^m conj(f̂_ℓ^m)`.
//!
//! The inverse ([`isft`]) is always separated and, for spectra of real
//! signals, uses the real expansion
//! `f = Σ_ℓ f̂_ℓ^0 Y_ℓ^0 + 2 Re Σ_{m>0} f̂_ℓ^m Y_ℓ^m`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Bandwidth, SphericalGrid};
use crate::harmonics::HarmonicTable;

/// Multi-channel real function sampled on an equiangular grid.
///
/// Values are channel-major, then θ rows, then φ columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalSignal {
    bandwidth: Bandwidth,
    channels: usize,
    values: Vec<f64>,
}

impl SphericalSignal {
    pub fn zeros(bandwidth: Bandwidth, channels: usize) -> Self {
        SphericalSignal {
            bandwidth,
            channels,
            values: vec![0.0; channels * bandwidth.samples()],
        }
    }

    pub fn from_values(bandwidth: Bandwidth, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Shape("signal needs at least one channel".into()));
        }
        let expected = channels * bandwidth.samples();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} samples for {channels} channel(s) at bandwidth {bandwidth}, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {i}")));
        }
        Ok(SphericalSignal {
            bandwidth,
            channels,
            values,
        })
    }

    /// Samples `f(channel, θ, φ)` on the grid.
    pub fn from_fn(bandwidth: Bandwidth, channels: usize, mut f: impl FnMut(usize, f64, f64) -> f64) -> Self {
        let grid = SphericalGrid::new(bandwidth);
        let mut values = Vec::with_capacity(channels * bandwidth.samples());
        for c in 0..channels {
            for &t in grid.thetas() {
                for &p in grid.phis() {
                    values.push(f(c, t, p));
                }
            }
        }
        SphericalSignal {
            bandwidth,
            channels,
            values,
        }
    }

    #[inline]
    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.bandwidth.grid_size()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let s = self.bandwidth.samples();
        &self.values[c * s..(c + 1) * s]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let s = self.bandwidth.samples();
        &mut self.values[c * s..(c + 1) * s]
    }

    #[inline]
    pub fn get(&self, c: usize, j: usize, k: usize) -> f64 {
        let n = self.size();
        self.values[(c * n + j) * n + k]
    }

    /// Stacks the channels of `parts` in order. All parts share one bandwidth.
    pub fn concat(parts: &[&SphericalSignal]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        let mut values = Vec::new();
        let mut channels = 0;
        for p in parts {
            check_bandwidth(first.bandwidth, p.bandwidth)?;
            values.extend_from_slice(&p.values);
            channels += p.channels;
        }
        Ok(SphericalSignal {
            bandwidth: first.bandwidth,
            channels,
            values,
        })
    }

    /// Copies channels `range` into a new signal.
    pub fn select_channels(&self, range: std::ops::Range<usize>) -> Self {
        let s = self.bandwidth.samples();
        SphericalSignal {
            bandwidth: self.bandwidth,
            channels: range.len(),
            values: self.values[range.start * s..range.end * s].to_vec(),
        }
    }

    /// L² norm over the sphere, using the grid quadrature weights.
    pub fn weighted_norm(&self) -> f64 {
        let grid = SphericalGrid::new(self.bandwidth);
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        sq.chunks_exact(self.bandwidth.samples())
            .map(|ch| grid.integrate(ch))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &SphericalSignal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Harmonic coefficients `f̂_ℓ^m`, `0 ≤ ℓ < b`, `|m| ≤ ℓ`, for each channel.
///
/// Each channel stores `b²` coefficients at offset `ℓ² + ℓ + m`, so the
/// degree-`ℓ` block is contiguous and ordered `m = −ℓ..=ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    bandwidth: Bandwidth,
    channels: usize,
    coeffs: Vec<Complex64>,
    real_origin: bool,
}

#[inline]
pub fn coeff_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

impl SpectralCoeffs {
    pub fn zeros(bandwidth: Bandwidth, channels: usize) -> Self {
        SpectralCoeffs {
            bandwidth,
            channels,
            coeffs: vec![Complex64::new(0.0, 0.0); channels * bandwidth.coeff_count()],
            real_origin: true,
        }
    }

    pub fn from_coeffs(
        bandwidth: Bandwidth,
        channels: usize,
        coeffs: Vec<Complex64>,
        real_origin: bool,
    ) -> Result<Self> {
        let expected = channels * bandwidth.coeff_count();
        if channels == 0 || coeffs.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} coefficients for {channels} channel(s) at bandwidth {bandwidth}, got {}",
                coeffs.len()
            )));
        }
        Ok(SpectralCoeffs {
            bandwidth,
            channels,
            coeffs,
            real_origin,
        })
    }

    #[inline]
    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn real_origin(&self) -> bool {
        self.real_origin
    }

    pub fn set_real_origin(&mut self, real_origin: bool) {
        self.real_origin = real_origin;
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let s = self.bandwidth.coeff_count();
        &self.coeffs[c * s..(c + 1) * s]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let s = self.bandwidth.coeff_count();
        &mut self.coeffs[c * s..(c + 1) * s]
    }

    /// The `2ℓ+1` coefficients of degree `ℓ`, ordered `m = −ℓ..=ℓ`.
    pub fn degree_block(&self, c: usize, l: usize) -> &[Complex64] {
        let at = c * self.bandwidth.coeff_count() + l * l;
        &self.coeffs[at..at + 2 * l + 1]
    }

    pub fn degree_block_mut(&mut self, c: usize, l: usize) -> &mut [Complex64] {
        let at = c * self.bandwidth.coeff_count() + l * l;
        &mut self.coeffs[at..at + 2 * l + 1]
    }

    #[inline]
    pub fn get(&self, c: usize, l: usize, m: i64) -> Complex64 {
        self.coeffs[c * self.bandwidth.coeff_count() + coeff_index(l, m)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, l: usize, m: i64, v: Complex64) {
        let s = self.bandwidth.coeff_count();
        self.coeffs[c * s + coeff_index(l, m)] = v;
    }

    /// Overwrites every `m < 0` entry from its `m > 0` partner and makes the
    /// `m = 0` entries real.
    pub fn enforce_real_symmetry(&mut self) {
        let b = self.bandwidth.degrees();
        for c in 0..self.channels {
            let ch = self.channel_mut(c);
            fill_negative_orders(ch, b);
        }
        self.real_origin = true;
    }

    /// Largest violation of `f̂_ℓ^{−m} = (−1)^m conj(f̂_ℓ^m)`.
    pub fn real_symmetry_defect(&self) -> f64 {
        let b = self.bandwidth.degrees();
        let mut worst: f64 = 0.0;
        for c in 0..self.channels {
            for l in 0..b {
                for m in 0..=l as i64 {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    let d = self.get(c, l, -m) - self.get(c, l, m).conj() * sign;
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }

    /// Keeps degrees below `bandwidth`.
    pub fn truncate(&self, bandwidth: Bandwidth) -> Result<Self> {
        if bandwidth > self.bandwidth {
            return Err(Error::BandwidthMismatch {
                expected: self.bandwidth.get(),
                got: bandwidth.get(),
            });
        }
        let keep = bandwidth.coeff_count();
        let mut coeffs = Vec::with_capacity(self.channels * keep);
        for c in 0..self.channels {
            coeffs.extend_from_slice(&self.channel(c)[..keep]);
        }
        Ok(SpectralCoeffs {
            bandwidth,
            channels: self.channels,
            coeffs,
            real_origin: self.real_origin,
        })
    }

    /// Embeds the spectrum at a larger bandwidth with zero high degrees.
    pub fn zero_pad(&self, bandwidth: Bandwidth) -> Result<Self> {
        if bandwidth < self.bandwidth {
            return Err(Error::BandwidthMismatch {
                expected: self.bandwidth.get(),
                got: bandwidth.get(),
            });
        }
        let mut out = SpectralCoeffs::zeros(bandwidth, self.channels);
        out.real_origin = self.real_origin;
        let keep = self.bandwidth.coeff_count();
        for c in 0..self.channels {
            out.channel_mut(c)[..keep].copy_from_slice(self.channel(c));
        }
        Ok(out)
    }

    /// Hermitian inner product summed over channels, `Σ conj(self) · other`.
    pub fn inner(&self, other: &SpectralCoeffs) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &SpectralCoeffs) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn fill_negative_orders(ch: &mut [Complex64], b: usize) {
    for l in 0..b {
        let base = l * l + l;
        ch[base].im = 0.0;
        for m in 1..=l {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            ch[base - m] = ch[base + m].conj() * sign;
        }
    }
}

fn check_bandwidth(expected: Bandwidth, got: Bandwidth) -> Result<()> {
    if expected != got {
        return Err(Error::BandwidthMismatch {
            expected: expected.get(),
            got: got.get(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SftMethod {
    Direct,
    Sepvar,
}

/// Forward transform by the chosen route.
pub fn sft(signal: &SphericalSignal, table: &HarmonicTable, method: SftMethod) -> Result<SpectralCoeffs> {
    match method {
        SftMethod::Direct => sft_direct(signal, table),
        SftMethod::Sepvar => sft_sepvar(signal, table),
    }
}

/// Forward transform as a literal double sum over the grid.
pub fn sft_direct(signal: &SphericalSignal, table: &HarmonicTable) -> Result<SpectralCoeffs> {
    check_bandwidth(table.bandwidth(), signal.bandwidth)?;
    let b = table.bandwidth().degrees();
    let n = table.grid().size();
    let w = table.grid().quad_weights();
    let per_channel: Vec<Vec<Complex64>> = (0..signal.channels)
        .into_par_iter()
        .map(|c| {
            let values = signal.channel(c);
            let mut out = vec![Complex64::new(0.0, 0.0); b * b];
            for l in 0..b {
                for m in 0..=l {
                    let leg = table.legendre_column(l, m);
                    let ph = table.phases(m);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        let row = &values[j * n..(j + 1) * n];
                        for k in 0..n {
                            acc += ph[k] * (w[j] * row[k] * leg[j]);
                        }
                    }
                    out[coeff_index(l, m as i64)] = acc;
                }
            }
            fill_negative_orders(&mut out, b);
            out
        })
        .collect();
    SpectralCoeffs::from_coeffs(signal.bandwidth, signal.channels, per_channel.concat(), true)
}

/// Forward transform by separation of variables: row FFTs, then a dense
/// associated Legendre transform for each order.
pub fn sft_sepvar(signal: &SphericalSignal, table: &HarmonicTable) -> Result<SpectralCoeffs> {
    check_bandwidth(table.bandwidth(), signal.bandwidth)?;
    let coeffs = analyze(signal.values(), signal.channels, table, table.grid().quad_weights());
    SpectralCoeffs::from_coeffs(signal.bandwidth, signal.channels, coeffs, true)
}

fn fft_plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// `Σ_jk row_weights[j] x_jk conj(Y_ℓ^m(θ_j, φ_k))` for every channel.
///
/// With the quadrature weights this is the forward transform; with unit
/// weights it is the adjoint of the inverse transform.
pub(crate) fn analyze(
    values: &[f64],
    channels: usize,
    table: &HarmonicTable,
    row_weights: &[f64],
) -> Vec<Complex64> {
    let b = table.bandwidth().degrees();
    let n = table.grid().size();
    let fft = fft_plan(n, false);
    let per_channel: Vec<Vec<Complex64>> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let ch = &values[c * n * n..(c + 1) * n * n];
            // rows[j * b + m] = w_j Σ_k x_jk e^{−imφ_k}
            let mut rows = vec![Complex64::new(0.0, 0.0); n * b];
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for j in 0..n {
                if row_weights[j] == 0.0 {
                    continue;
                }
                for (dst, &v) in buf.iter_mut().zip(&ch[j * n..(j + 1) * n]) {
                    *dst = Complex64::new(v, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for m in 0..b {
                    rows[j * b + m] = buf[m] * row_weights[j];
                }
            }
            let mut out = vec![Complex64::new(0.0, 0.0); b * b];
            for m in 0..b {
                for l in m..b {
                    let leg = table.legendre_column(l, m);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        acc += rows[j * b + m] * leg[j];
                    }
                    out[coeff_index(l, m as i64)] = acc;
                }
            }
            fill_negative_orders(&mut out, b);
            out
        })
        .collect();
    per_channel.concat()
}

/// Inverse transform. Spectra of real signals use the real expansion; other
/// spectra go through the complex synthesis and must come out real.
pub fn isft(coeffs: &SpectralCoeffs, table: &HarmonicTable) -> Result<SphericalSignal> {
    check_bandwidth(table.bandwidth(), coeffs.bandwidth)?;
    if coeffs.real_origin {
        let values = synthesize_real(coeffs.coeffs(), coeffs.channels, table);
        return SphericalSignal::from_values(coeffs.bandwidth, coeffs.channels, values);
    }
    let (re, im) = synthesize_complex(coeffs.coeffs(), coeffs.channels, table);
    let scale = re.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let residue = im.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if residue > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "spectrum synthesizes a complex signal (imaginary residue {residue:.3e})"
        )));
    }
    SphericalSignal::from_values(coeffs.bandwidth, coeffs.channels, re)
}

/// Real expansion using only `m ≥ 0` coefficients.
pub(crate) fn synthesize_real(coeffs: &[Complex64], channels: usize, table: &HarmonicTable) -> Vec<f64> {
    let b = table.bandwidth().degrees();
    let n = table.grid().size();
    let ifft = fft_plan(n, true);
    let per_channel: Vec<Vec<f64>> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let ch = &coeffs[c * b * b..(c + 1) * b * b];
            let mut out = vec![0.0; n * n];
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
            for j in 0..n {
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for m in 0..b {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for l in m..b {
                        acc += ch[coeff_index(l, m as i64)] * table.legendre(l, m, j);
                    }
                    buf[m] = if m == 0 { Complex64::new(acc.re, 0.0) } else { acc * 2.0 };
                }
                ifft.process_with_scratch(&mut buf, &mut scratch);
                for (dst, v) in out[j * n..(j + 1) * n].iter_mut().zip(&buf) {
                    *dst = v.re;
                }
            }
            out
        })
        .collect();
    per_channel.concat()
}

/// `Σ_ℓm c_ℓ^m Y_ℓ^m` with no symmetry assumed; returns (real, imaginary) parts.
pub(crate) fn synthesize_complex(
    coeffs: &[Complex64],
    channels: usize,
    table: &HarmonicTable,
) -> (Vec<f64>, Vec<f64>) {
    let b = table.bandwidth().degrees();
    let n = table.grid().size();
    let ifft = fft_plan(n, true);
    let per_channel: Vec<(Vec<f64>, Vec<f64>)> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let ch = &coeffs[c * b * b..(c + 1) * b * b];
            let mut re = vec![0.0; n * n];
            let mut im = vec![0.0; n * n];
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
            for j in 0..n {
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for m in -(b as i64 - 1)..(b as i64) {
                    let am = m.unsigned_abs() as usize;
                    let sign = if m < 0 && am % 2 == 1 { -1.0 } else { 1.0 };
                    let mut acc = Complex64::new(0.0, 0.0);
                    for l in am..b {
                        acc += ch[coeff_index(l, m)] * table.legendre(l, am, j);
                    }
                    buf[m.rem_euclid(n as i64) as usize] += acc * sign;
                }
                ifft.process_with_scratch(&mut buf, &mut scratch);
                for k in 0..n {
                    re[j * n + k] = buf[k].re;
                    im[j * n + k] = buf[k].im;
                }
            }
            (re, im)
        })
        .collect();
    let mut re = Vec::with_capacity(channels * n * n);
    let mut im = Vec::with_capacity(channels * n * n);
    for (r, i) in per_channel {
        re.extend(r);
        im.extend(i);
    }
    (re, im)
}

/// Projects a signal onto harmonics of degree below its bandwidth.
pub fn bandlimit(signal: &SphericalSignal, table: &HarmonicTable) -> Result<SphericalSignal> {
    isft(&sft_sepvar(signal, table)?, table)
}

/// Forward transform at the signal's own bandwidth using the shared table.
pub fn forward(signal: &SphericalSignal) -> SpectralCoeffs {
    let table = HarmonicTable::shared(signal.bandwidth);
    sft_sepvar(signal, &table).expect("table bandwidth matches signal")
}

/// Inverse transform at the spectrum's own bandwidth using the shared table.
pub fn inverse(coeffs: &SpectralCoeffs) -> Result<SphericalSignal> {
    let table = HarmonicTable::shared(coeffs.bandwidth);
    isft(coeffs, &table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::sph_harmonic;
    use crate::synth::random_real_coeffs;
    use std::f64::consts::PI;

    fn table(b: u32) -> Arc<HarmonicTable> {
        HarmonicTable::shared(Bandwidth::new(b).unwrap())
    }

    #[test]
    fn constant_signal() {
        let t = table(8);
        let s = SphericalSignal::from_fn(t.bandwidth(), 1, |_, _, _| 2.5);
        for f in [sft_direct(&s, &t).unwrap(), sft_sepvar(&s, &t).unwrap()] {
            assert!((f.get(0, 0, 0) - Complex64::new(2.5 * (4.0 * PI).sqrt(), 0.0)).norm() < 1e-12);
            let others = f.coeffs()[1..].iter().fold(0.0f64, |a, c| a.max(c.norm()));
            assert!(others < 1e-9);
        }
    }

    #[test]
    fn zero_signal_and_zero_spectrum() {
        let t = table(4);
        let z = SphericalSignal::zeros(t.bandwidth(), 2);
        assert!(sft_direct(&z, &t).unwrap().coeffs().iter().all(|c| c.norm() == 0.0));
        let zc = SpectralCoeffs::zeros(t.bandwidth(), 2);
        assert!(isft(&zc, &t).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverse_of_constant_coefficient() {
        let t = table(8);
        let mut c = SpectralCoeffs::zeros(t.bandwidth(), 1);
        c.set(0, 0, 0, Complex64::new((4.0 * PI).sqrt(), 0.0));
        let s = isft(&c, &t).unwrap();
        assert!(s.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn real_part_of_y11_recovered() {
        let t = table(8);
        let s = SphericalSignal::from_fn(t.bandwidth(), 1, |_, th, ph| sph_harmonic(1, 1, th, ph).unwrap().re);
        let f = sft_direct(&s, &t).unwrap();
        // Re Y_1^1 = (Y_1^1 − Y_1^{−1}) / 2
        assert!((f.get(0, 1, 1) - Complex64::new(0.5, 0.0)).norm() < 1e-9);
        assert!((f.get(0, 1, -1) - Complex64::new(-0.5, 0.0)).norm() < 1e-9);
        assert!(f.real_symmetry_defect() == 0.0);
        for l in 0..8 {
            for m in -(l as i64)..=(l as i64) {
                if l != 1 || m == 0 {
                    assert!(f.get(0, l, m).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn sepvar_matches_direct() {
        let t = table(8);
        let c = random_real_coeffs(t.bandwidth(), 2, 3);
        let mut s = isft(&c, &t).unwrap();
        // add off-band content so the comparison is not only on bandlimited input
        s.values_mut().iter_mut().enumerate().for_each(|(i, v)| *v += ((i * 7919) % 13) as f64 * 0.01);
        let d = sft_direct(&s, &t).unwrap();
        let sv = sft_sepvar(&s, &t).unwrap();
        assert!(d.max_abs_diff(&sv) < 1e-9);
    }

    #[test]
    fn round_trip_small_bandwidths() {
        for b in [2u32, 4, 8, 16, 32] {
            let t = table(b);
            let c = random_real_coeffs(t.bandwidth(), 1, b as u64);
            let back = sft_sepvar(&isft(&c, &t).unwrap(), &t).unwrap();
            assert!(back.max_abs_diff(&c) < 1e-9, "b={b}");
        }
    }

    #[test]
    fn complex_path_agrees_with_real_path() {
        let t = table(8);
        let mut c = random_real_coeffs(t.bandwidth(), 1, 11);
        let a = isft(&c, &t).unwrap();
        c.set_real_origin(false);
        let b = isft(&c, &t).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
        // a lone m = 1 coefficient synthesizes a complex function
        let mut lone = SpectralCoeffs::zeros(t.bandwidth(), 1);
        lone.set_real_origin(false);
        lone.set(0, 2, 1, Complex64::new(1.0, 0.0));
        assert!(matches!(isft(&lone, &t), Err(Error::Numerical(_))));
    }

    #[test]
    fn bandwidth_mismatch_is_rejected() {
        let s = SphericalSignal::zeros(Bandwidth::new(4).unwrap(), 1);
        assert!(matches!(
            sft_sepvar(&s, &table(8)),
            Err(Error::BandwidthMismatch { expected: 8, got: 4 })
        ));
        assert!(sft_direct(&s, &table(8)).is_err());
        assert!(isft(&SpectralCoeffs::zeros(Bandwidth::new(4).unwrap(), 1), &table(8)).is_err());
    }

    #[test]
    fn bandlimit_is_a_projection() {
        let t = table(8);
        let step = SphericalSignal::from_fn(t.bandwidth(), 1, |_, th, _| if th < 1.0 { 1.0 } else { 0.0 });
        let once = bandlimit(&step, &t).unwrap();
        let twice = bandlimit(&once, &t).unwrap();
        assert!(once.max_abs_diff(&twice) < 1e-9);
        // Parseval: removed energy shows up as a norm drop
        let e_in = step.weighted_norm().powi(2);
        let e_out = sft_sepvar(&step, &t).unwrap().norm_sqr();
        assert!(e_in - e_out > 1e-3);
        assert!(once.max_abs_diff(&step) > 1e-2);
        let smooth = isft(&random_real_coeffs(t.bandwidth(), 1, 2), &t).unwrap();
        assert!(bandlimit(&smooth, &t).unwrap().max_abs_diff(&smooth) < 1e-9);
    }

    #[test]
    fn rejects_non_finite_values() {
        let b = Bandwidth::new(2).unwrap();
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(SphericalSignal::from_values(b, 1, v).is_err());
        assert!(SphericalSignal::from_values(b, 1, vec![0.0; 15]).is_err());
    }
}
