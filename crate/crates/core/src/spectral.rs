//! Layer vocabulary of a spherical CNN: zonal filters, convolution in the
//! harmonic domain, pooling and rotation-invariant descriptors.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Bandwidth, SphericalGrid};
use crate::sft::{inverse, SpectralCoeffs, SphericalSignal};

/// Factor relating the order-0 filter spectrum to the convolution output:
/// `ŷ_ℓ^m = 2π sqrt(4π / (2ℓ+1)) f̂_ℓ^m ĥ_ℓ^0`.
#[inline]
pub fn conv_scale(l: usize) -> f64 {
    2.0 * PI * (4.0 * PI / (2 * l + 1) as f64).sqrt()
}

/// A zonal filter described by its order-0 spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ZonalFilterSpec {
    /// Every coefficient `ĥ_ℓ^0`, `ℓ = 0..b`, given explicitly.
    Full { coeffs: Vec<f64> },
    /// Values at a few degrees, linearly interpolated in between.
    Anchored {
        bandwidth: u32,
        degrees: Vec<usize>,
        values: Vec<f64>,
    },
}

impl ZonalFilterSpec {
    /// Anchored filter with `values.len()` uniformly spaced anchors.
    pub fn anchored_uniform(bandwidth: Bandwidth, values: Vec<f64>) -> Result<Self> {
        let degrees = uniform_anchor_degrees(bandwidth, values.len());
        if degrees.len() != values.len() {
            return Err(Error::InvalidFilter(format!(
                "{} anchors do not fit in bandwidth {bandwidth}",
                values.len()
            )));
        }
        let spec = ZonalFilterSpec::Anchored {
            bandwidth: bandwidth.get(),
            degrees,
            values,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn bandwidth(&self) -> Result<Bandwidth> {
        match self {
            ZonalFilterSpec::Full { coeffs } => Bandwidth::new(coeffs.len() as u32),
            ZonalFilterSpec::Anchored { bandwidth, .. } => Bandwidth::new(*bandwidth),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.bandwidth()?.degrees();
        match self {
            ZonalFilterSpec::Full { coeffs } => {
                if coeffs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidFilter("non-finite coefficient".into()));
                }
            }
            ZonalFilterSpec::Anchored { degrees, values, .. } => {
                if degrees.len() != values.len() {
                    return Err(Error::InvalidFilter(format!(
                        "{} anchor degrees but {} values",
                        degrees.len(),
                        values.len()
                    )));
                }
                if degrees.len() < 2 {
                    return Err(Error::InvalidFilter("need at least two anchors".into()));
                }
                if degrees.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidFilter("anchor degrees must strictly increase".into()));
                }
                if degrees[0] != 0 || *degrees.last().unwrap() != b - 1 {
                    return Err(Error::InvalidFilter(format!(
                        "anchors must span degrees 0..={}, got {:?}",
                        b - 1,
                        degrees
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidFilter("non-finite anchor value".into()));
                }
            }
        }
        Ok(())
    }

    /// Spectrum `ĥ_ℓ^0` for `ℓ = 0..b`.
    pub fn realize(&self) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            ZonalFilterSpec::Full { coeffs } => Ok(coeffs.clone()),
            ZonalFilterSpec::Anchored {
                bandwidth,
                degrees,
                values,
            } => {
                let b = *bandwidth as usize;
                let interp = anchor_interpolation(b, degrees);
                Ok((0..b)
                    .map(|l| {
                        interp[l * degrees.len()..(l + 1) * degrees.len()]
                            .iter()
                            .zip(values)
                            .map(|(w, v)| w * v)
                            .sum()
                    })
                    .collect())
            }
        }
    }

    /// The filter as a spatial function (its spectrum placed at `m = 0`).
    pub fn to_signal(&self) -> Result<SphericalSignal> {
        let b = self.bandwidth()?;
        let mut coeffs = SpectralCoeffs::zeros(b, 1);
        for (l, v) in self.realize()?.into_iter().enumerate() {
            coeffs.set(0, l, 0, Complex64::new(v, 0.0));
        }
        inverse(&coeffs)
    }
}

/// `n` uniformly spaced integer degrees covering `0..=b−1`; `n` is clamped to `[2, b]`.
pub fn uniform_anchor_degrees(bandwidth: Bandwidth, n: usize) -> Vec<usize> {
    let b = bandwidth.degrees();
    let n = n.clamp(2, b);
    (0..n)
        .map(|i| ((i * (b - 1)) as f64 / (n - 1) as f64).round() as usize)
        .collect()
}

/// Row-major `b × n` matrix mapping anchor values to the realized spectrum.
pub fn anchor_interpolation(b: usize, degrees: &[usize]) -> Vec<f64> {
    let n = degrees.len();
    let mut out = vec![0.0; b * n];
    let mut seg = 0;
    for l in 0..b {
        while seg + 2 < n && l > degrees[seg + 1] {
            seg += 1;
        }
        let (d0, d1) = (degrees[seg], degrees[seg + 1]);
        let t = (l as f64 - d0 as f64) / (d1 - d0) as f64;
        out[l * n + seg] += 1.0 - t;
        out[l * n + seg + 1] += t;
    }
    out
}

fn filter_for(spec: &ZonalFilterSpec, b: Bandwidth) -> Result<Vec<f64>> {
    let fb = spec.bandwidth()?;
    if fb != b {
        return Err(Error::BandwidthMismatch {
            expected: b.get(),
            got: fb.get(),
        });
    }
    spec.realize()
}

/// Convolves every channel of `f` with one zonal filter.
pub fn conv_spectral(f: &SpectralCoeffs, h: &ZonalFilterSpec) -> Result<SpectralCoeffs> {
    let spectrum = filter_for(h, f.bandwidth())?;
    let mut out = f.clone();
    for c in 0..f.channels() {
        for (l, hv) in spectrum.iter().enumerate() {
            let k = conv_scale(l) * hv;
            out.degree_block_mut(c, l).iter_mut().for_each(|v| *v *= k);
        }
    }
    Ok(out)
}

/// Multi-channel convolution: output channel `o` sums the convolutions of
/// every input channel `i` with filter `(o, i)`.
///
/// `filters` holds realized spectra, laid out `[o][i][ℓ]`.
pub fn conv_mixed(f: &SpectralCoeffs, filters: &[f64], out_channels: usize) -> Result<SpectralCoeffs> {
    let b = f.bandwidth().degrees();
    let cin = f.channels();
    if filters.len() != out_channels * cin * b {
        return Err(Error::Shape(format!(
            "expected {} filter coefficients for {out_channels}x{cin} filters at bandwidth {b}, got {}",
            out_channels * cin * b,
            filters.len()
        )));
    }
    let scales: Vec<f64> = (0..b).map(conv_scale).collect();
    let mut out = SpectralCoeffs::zeros(f.bandwidth(), out_channels);
    out.set_real_origin(f.real_origin());
    for o in 0..out_channels {
        for i in 0..cin {
            let h = &filters[(o * cin + i) * b..(o * cin + i + 1) * b];
            for l in 0..b {
                let k = scales[l] * h[l];
                if k == 0.0 {
                    continue;
                }
                let src = f.degree_block(i, l);
                let dst = out.degree_block_mut(o, l);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * k;
                }
            }
        }
    }
    Ok(out)
}

/// Per-degree taper applied before truncation when pre-smoothing is on.
pub(crate) fn pool_taper(out_b: usize) -> Vec<f64> {
    (0..out_b)
        .map(|l| 0.5 * (1.0 + (PI * l as f64 / out_b as f64).cos()))
        .collect()
}

/// Spectral pooling: drops every degree `≥ b/2`.
pub fn spectral_pool(f: &SpectralCoeffs) -> Result<SpectralCoeffs> {
    spectral_pool_with(f, false)
}

/// Spectral pooling with optional Hann pre-smoothing of the kept degrees.
pub fn spectral_pool_with(f: &SpectralCoeffs, smooth: bool) -> Result<SpectralCoeffs> {
    let half = f.bandwidth().halved()?;
    let mut out = f.truncate(half)?;
    if smooth {
        let taper = pool_taper(half.degrees());
        for c in 0..out.channels() {
            for (l, w) in taper.iter().enumerate() {
                out.degree_block_mut(c, l).iter_mut().for_each(|v| *v *= w);
            }
        }
    }
    Ok(out)
}

/// Area-weighted 2×2 average pooling.
pub fn weighted_avg_pool(signal: &SphericalSignal) -> Result<SphericalSignal> {
    let half = signal.bandwidth().halved()?;
    let grid = SphericalGrid::new(signal.bandwidth());
    let w = grid.area_weights();
    let n = signal.size();
    let h = n / 2;
    let mut out = SphericalSignal::zeros(half, signal.channels());
    for c in 0..signal.channels() {
        let src = signal.channel(c);
        let dst = out.channel_mut(c);
        for i in 0..h {
            let (w0, w1) = (w[2 * i], w[2 * i + 1]);
            let total = 2.0 * (w0 + w1);
            for k in 0..h {
                let a = src[2 * i * n + 2 * k] + src[2 * i * n + 2 * k + 1];
                let b = src[(2 * i + 1) * n + 2 * k] + src[(2 * i + 1) * n + 2 * k + 1];
                dst[i * h + k] = if total > 0.0 {
                    (w0 * a + w1 * b) / total
                } else {
                    (a + b) / 4.0
                };
            }
        }
    }
    Ok(out)
}

/// 2×2 max pooling. Also returns the flat source index of each maximum
/// (first in row-major block order on ties).
pub fn max_pool_with_argmax(signal: &SphericalSignal) -> Result<(SphericalSignal, Vec<usize>)> {
    let half = signal.bandwidth().halved()?;
    let n = signal.size();
    let h = n / 2;
    let mut out = SphericalSignal::zeros(half, signal.channels());
    let mut argmax = Vec::with_capacity(signal.channels() * h * h);
    let per = signal.bandwidth().samples();
    for c in 0..signal.channels() {
        let src = signal.channel(c);
        let dst = out.channel_mut(c);
        for i in 0..h {
            for k in 0..h {
                let cands = [
                    2 * i * n + 2 * k,
                    2 * i * n + 2 * k + 1,
                    (2 * i + 1) * n + 2 * k,
                    (2 * i + 1) * n + 2 * k + 1,
                ];
                let mut best = cands[0];
                for &idx in &cands[1..] {
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                dst[i * h + k] = src[best];
                argmax.push(c * per + best);
            }
        }
    }
    Ok((out, argmax))
}

pub fn max_pool(signal: &SphericalSignal) -> Result<SphericalSignal> {
    Ok(max_pool_with_argmax(signal)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Wgap,
    Magl,
}

/// Rotation-invariant summary of a feature map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantDescriptor {
    pub kind: DescriptorKind,
    pub channels: usize,
    /// `[channels]` for WGAP, `[channels × b]` for MAG-L.
    pub values: Vec<f64>,
}

impl InvariantDescriptor {
    /// Relative L2 distance `‖self − other‖ / ‖self‖`.
    pub fn relative_distance(&self, other: &InvariantDescriptor) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let den: f64 = self.values.iter().map(|a| a * a).sum();
        (num / den).sqrt()
    }
}

/// `sin θ_j / Σ_{j,k} sin θ_j` for each row, the WGAP weight of one sample.
pub(crate) fn wgap_row_weights(bandwidth: Bandwidth) -> Vec<f64> {
    let grid = SphericalGrid::new(bandwidth);
    let n = grid.size() as f64;
    let total: f64 = grid.area_weights().iter().sum::<f64>() * n;
    grid.area_weights().iter().map(|w| w / total).collect()
}

/// Weighted global average pooling, a cell's weight being `sin θ`.
pub fn wgap(signal: &SphericalSignal) -> InvariantDescriptor {
    let rw = wgap_row_weights(signal.bandwidth());
    let n = signal.size();
    let values = (0..signal.channels())
        .map(|c| {
            signal
                .channel(c)
                .chunks_exact(n)
                .zip(&rw)
                .map(|(row, w)| w * row.iter().sum::<f64>())
                .sum()
        })
        .collect();
    InvariantDescriptor {
        kind: DescriptorKind::Wgap,
        channels: signal.channels(),
        values,
    }
}

/// Norm of each degree block, per channel.
pub fn magl(coeffs: &SpectralCoeffs) -> InvariantDescriptor {
    let b = coeffs.bandwidth().degrees();
    let mut values = Vec::with_capacity(coeffs.channels() * b);
    for c in 0..coeffs.channels() {
        for l in 0..b {
            values.push(coeffs.degree_block(c, l).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt());
        }
    }
    InvariantDescriptor {
        kind: DescriptorKind::Magl,
        channels: coeffs.channels(),
        values,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Relu,
    /// No nonlinearity; the block stays linear.
    None,
}

pub fn pointwise_nonlinearity(signal: &SphericalSignal, kind: Nonlinearity) -> SphericalSignal {
    let mut out = signal.clone();
    if kind == Nonlinearity::Relu {
        out.values_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    }
    out
}
