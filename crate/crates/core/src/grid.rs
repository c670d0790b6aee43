//! Equiangular sampling of the sphere.
//!
//! A grid of bandwidth `b` has `2b` colatitude rows `θ_j = πj/2b` and `2b`
//! longitude columns `φ_k = πk/b`. The quadrature weights integrate any
//! function whose harmonic content stays below degree `2b` exactly, so
//! products of two bandwidth-`b` functions are integrated without error.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest bandwidth accepted by [`Bandwidth::new`].
pub const DEFAULT_MAX_BANDWIDTH: u32 = 512;

/// Number of resolved harmonic degrees. Degrees run over `0..b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Bandwidth(u32);

impl Bandwidth {
    pub fn new(b: u32) -> Result<Self> {
        Self::with_max(b, DEFAULT_MAX_BANDWIDTH)
    }

    pub fn with_max(b: u32, max: u32) -> Result<Self> {
        if b < 2 || b > max {
            return Err(Error::InvalidBandwidth { value: b, max });
        }
        Ok(Bandwidth(b))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// Samples per grid axis (`2b`).
    #[inline]
    pub fn grid_size(self) -> usize {
        2 * self.0 as usize
    }

    /// Number of samples in one channel (`4b²`).
    #[inline]
    pub fn samples(self) -> usize {
        self.grid_size() * self.grid_size()
    }

    /// Number of coefficients in one channel of a full triangular spectrum (`b²`).
    #[inline]
    pub fn coeff_count(self) -> usize {
        (self.0 as usize) * (self.0 as usize)
    }

    #[inline]
    pub fn degrees(self) -> usize {
        self.0 as usize
    }

    /// Bandwidth after halving, as done by every pooling operator.
    pub fn halved(self) -> Result<Self> {
        if self.0 % 2 != 0 {
            return Err(Error::Domain(format!("cannot halve odd bandwidth {}", self.0)));
        }
        Bandwidth::new(self.0 / 2)
    }
}

impl TryFrom<u32> for Bandwidth {
    type Error = Error;

    fn try_from(b: u32) -> Result<Self> {
        Bandwidth::new(b)
    }
}

impl From<Bandwidth> for u32 {
    fn from(b: Bandwidth) -> u32 {
        b.0
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sampling positions and weights of a `2b × 2b` equiangular grid.
#[derive(Clone, Debug)]
pub struct SphericalGrid {
    bandwidth: Bandwidth,
    thetas: Vec<f64>,
    phis: Vec<f64>,
    quad_weights: Vec<f64>,
    area_weights: Vec<f64>,
}

impl SphericalGrid {
    pub fn new(bandwidth: Bandwidth) -> Self {
        let b = bandwidth.get() as usize;
        let n = 2 * b;
        let thetas: Vec<f64> = (0..n).map(|j| PI * j as f64 / n as f64).collect();
        let phis: Vec<f64> = (0..n).map(|k| PI * k as f64 / b as f64).collect();
        let area_weights: Vec<f64> = thetas.iter().map(|t| t.sin()).collect();
        // a_j integrates ∫ g(θ) sin θ dθ; the longitude step π/b is folded in so
        // that Σ_jk w_j g(θ_j, φ_k) is the surface integral over S².
        let phi_step = PI / b as f64;
        let quad_weights = thetas
            .iter()
            .map(|&t| {
                let series: f64 = (0..b)
                    .map(|k| {
                        let odd = (2 * k + 1) as f64;
                        (odd * t).sin() / odd
                    })
                    .sum();
                phi_step * (2.0 / b as f64) * t.sin() * series
            })
            .collect();
        SphericalGrid {
            bandwidth,
            thetas,
            phis,
            quad_weights,
            area_weights,
        }
    }

    #[inline]
    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.bandwidth.grid_size()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    /// Per-row surface quadrature weights; every sample in row `j` carries `quad_weights[j]`.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// `sin θ_j`, proportional to the area of a cell in row `j`.
    pub fn area_weights(&self) -> &[f64] {
        &self.area_weights
    }

    /// Unit vector of the sample at row `j`, column `k`.
    pub fn direction(&self, j: usize, k: usize) -> [f64; 3] {
        spherical_to_cartesian(self.thetas[j], self.phis[k])
    }

    /// Integral over S² of a sampled function, `values` laid out θ-major.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let n = self.size();
        values
            .chunks_exact(n)
            .zip(&self.quad_weights)
            .map(|(row, w)| w * row.iter().sum::<f64>())
            .sum()
    }
}

/// Builds the grid for bandwidth `b`, rejecting `b < 2` and `b > 512`.
pub fn make_grid(b: u32) -> Result<SphericalGrid> {
    Ok(SphericalGrid::new(Bandwidth::new(b)?))
}

pub fn spherical_to_cartesian(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

/// Colatitude in `[0, π]` and longitude in `[0, 2π)` of a (not necessarily unit) vector.
pub fn cartesian_to_spherical(v: [f64; 3]) -> (f64, f64) {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let theta = (v[2] / r).clamp(-1.0, 1.0).acos();
    let mut phi = v[1].atan2(v[0]);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    (theta, phi)
}
