//! Associated Legendre functions, spherical harmonics and per-grid tables.
//!
//! Harmonics are orthonormal over S² and carry the Condon–Shortley phase:
//! `Y_ℓ^m(θ, φ) = q_ℓ^m P_ℓ^m(cos θ) e^{imφ}` with
//! `q_ℓ^m = sqrt((2ℓ+1)/4π · (ℓ−m)!/(ℓ+m)!)`, so that
//! `Y_ℓ^{−m} = (−1)^m conj(Y_ℓ^m)`.
//!
//! Tables store the product `q_ℓ^m P_ℓ^m` directly. It is produced by a
//! recurrence on the normalized functions, which stays finite for degrees in
//! the hundreds where the raw `P_ℓ^m` would overflow.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Bandwidth, SphericalGrid};

/// Raw associated Legendre function `P_ℓ^m(x)` with the Condon–Shortley phase.
///
/// Uses the unnormalized three-term recurrence, so values overflow for large
/// `ℓ`; prefer [`normalized_legendre`] beyond `ℓ ≈ 150`.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Domain(format!("order {m} exceeds degree {l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("argument {x} outside [-1, 1]")));
    }
    let s = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= -((2 * i - 1) as f64) * s;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for ll in (m + 2)..=l {
        let next = ((2 * ll - 1) as f64 * x * cur - (ll + m - 1) as f64 * prev) / (ll - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `q_ℓ^m P_ℓ^m(cos θ)` for `ℓ = m..=lmax`, written into `out[ℓ - m]`.
///
/// `sin_theta` is passed separately so the pole rows get an exact zero.
pub fn normalized_legendre(m: usize, lmax: usize, cos_theta: f64, sin_theta: f64, out: &mut [f64]) {
    debug_assert!(out.len() > lmax - m);
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for i in 1..=m {
        pmm *= -((2 * i + 1) as f64 / (2 * i) as f64).sqrt() * sin_theta;
    }
    out[0] = pmm;
    if lmax == m {
        return;
    }
    let mut prev = pmm;
    let mut cur = ((2 * m + 3) as f64).sqrt() * cos_theta * pmm;
    out[1] = cur;
    let mf = m as f64;
    for l in (m + 2)..=lmax {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lp = lf - 1.0;
        let a_prev = ((4.0 * lp * lp - 1.0) / (lp * lp - mf * mf)).sqrt();
        let next = a * (cos_theta * cur - prev / a_prev);
        prev = cur;
        cur = next;
        out[l - m] = cur;
    }
}

/// Orthonormal complex spherical harmonic `Y_ℓ^m(θ, φ)`.
pub fn sph_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    let am = m.unsigned_abs() as usize;
    if am > l {
        return Err(Error::Domain(format!("|order| {am} exceeds degree {l}")));
    }
    let mut col = vec![0.0; l - am + 1];
    let (s, c) = theta.sin_cos();
    normalized_legendre(am, l, c, s, &mut col);
    let value = col[l - am];
    let y = Complex64::from_polar(value, am as f64 * phi);
    if m < 0 {
        let sign = if am % 2 == 0 { 1.0 } else { -1.0 };
        Ok(y.conj() * sign)
    } else {
        Ok(y)
    }
}

/// Offset of `(ℓ, m)`, `0 ≤ m ≤ ℓ`, in a lower-triangular packing.
#[inline]
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Precomputed Legendre values and Fourier phases on one grid.
#[derive(Debug)]
pub struct HarmonicTable {
    grid: SphericalGrid,
    legendre: Vec<f64>,
    fourier_phases: Vec<Complex64>,
}

impl HarmonicTable {
    pub fn new(grid: SphericalGrid) -> Self {
        let b = grid.bandwidth().degrees();
        let n = grid.size();
        let mut legendre = vec![0.0; b * (b + 1) / 2 * n];
        let mut col = vec![0.0; b];
        for (j, &theta) in grid.thetas().iter().enumerate() {
            let (s, c) = theta.sin_cos();
            for m in 0..b {
                normalized_legendre(m, b - 1, c, s, &mut col);
                for l in m..b {
                    legendre[tri_index(l, m) * n + j] = col[l - m];
                }
            }
        }
        let mut fourier_phases = Vec::with_capacity(b * n);
        for m in 0..b {
            for &phi in grid.phis() {
                fourier_phases.push(Complex64::from_polar(1.0, -(m as f64) * phi));
            }
        }
        HarmonicTable {
            grid,
            legendre,
            fourier_phases,
        }
    }

    /// Shared table for bandwidth `b`, built once per process.
    pub fn shared(b: Bandwidth) -> Arc<HarmonicTable> {
        static CACHE: OnceLock<RwLock<HashMap<u32, Arc<HarmonicTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
        if let Some(t) = cache.read().unwrap().get(&b.get()) {
            return t.clone();
        }
        let table = Arc::new(HarmonicTable::new(SphericalGrid::new(b)));
        cache
            .write()
            .unwrap()
            .entry(b.get())
            .or_insert(table)
            .clone()
    }

    #[inline]
    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    #[inline]
    pub fn bandwidth(&self) -> Bandwidth {
        self.grid.bandwidth()
    }

    /// `q_ℓ^m P_ℓ^m(cos θ_j)` for all rows `j`.
    #[inline]
    pub fn legendre_column(&self, l: usize, m: usize) -> &[f64] {
        let n = self.grid.size();
        let at = tri_index(l, m) * n;
        &self.legendre[at..at + n]
    }

    #[inline]
    pub fn legendre(&self, l: usize, m: usize, j: usize) -> f64 {
        self.legendre[tri_index(l, m) * self.grid.size() + j]
    }

    /// `e^{−imφ_k}` for all columns `k`.
    #[inline]
    pub fn phases(&self, m: usize) -> &[Complex64] {
        let n = self.grid.size();
        &self.fourier_phases[m * n..(m + 1) * n]
    }
}

/// Builds the harmonic table for `grid`.
pub fn build_table(grid: &SphericalGrid) -> Result<HarmonicTable> {
    Ok(HarmonicTable::new(grid.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// P_ℓ^m through Rodrigues: (−1)^m (1−x²)^{m/2} d^{ℓ+m}/dx^{ℓ+m} (x²−1)^ℓ / (2^ℓ ℓ!).
    fn rodrigues(l: usize, m: usize, x: f64) -> f64 {
        // coefficients of (x²−1)^ℓ, index = power
        let mut poly = vec![0.0; 2 * l + 1];
        let mut binom = 1.0;
        for k in 0..=l {
            let sign = if (l - k) % 2 == 0 { 1.0 } else { -1.0 };
            poly[2 * k] = sign * binom;
            binom = binom * (l - k) as f64 / (k + 1) as f64;
        }
        for _ in 0..(l + m) {
            poly = (1..poly.len()).map(|p| poly[p] * p as f64).collect();
            if poly.is_empty() {
                return 0.0;
            }
        }
        let val: f64 = poly.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let fact: f64 = (1..=l).map(|i| i as f64).product();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sign * (1.0 - x * x).powf(m as f64 / 2.0) * val / (2f64.powi(l as i32) * fact)
    }

    #[test]
    fn low_order_values() {
        assert_eq!(assoc_legendre(0, 0, 0.3).unwrap(), 1.0);
        assert!((assoc_legendre(1, 0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let r = rodrigues(4, 2, 0.7);
        assert!((assoc_legendre(4, 2, 0.7).unwrap() - r).abs() < 1e-12 * r.abs());
    }

    #[test]
    fn domain_errors() {
        assert!(assoc_legendre(2, 3, 0.1).is_err());
        assert!(assoc_legendre(2, 1, 1.5).is_err());
        assert!(sph_harmonic(2, -3, 0.1, 0.2).is_err());
    }

    #[test]
    fn recurrence_matches_rodrigues() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            for l in 0..=10 {
                for m in 0..=l {
                    let a = assoc_legendre(l, m, x).unwrap();
                    let r = rodrigues(l, m, x);
                    let scale = r.abs().max(1e-300);
                    // absolute floor covers values that vanish at roots
                    assert!(
                        (a - r).abs() <= 1e-10 * scale + 1e-11,
                        "l={l} m={m} x={x}: {a} vs {r}"
                    );
                }
            }
        }
    }

    #[test]
    fn normalized_matches_raw_times_factor() {
        let x: f64 = 0.37;
        let s = (1.0 - x * x).sqrt();
        for m in 0..8 {
            let mut col = vec![0.0; 12];
            normalized_legendre(m, 11, x, s, &mut col);
            for l in m..12 {
                let ratio: f64 = ((l - m + 1)..=(l + m)).map(|i| i as f64).product();
                let q = ((2 * l + 1) as f64 / (4.0 * PI) / ratio).sqrt();
                let raw = assoc_legendre(l, m, x).unwrap();
                assert!((col[l - m] - q * raw).abs() < 1e-12, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn harmonic_values_and_symmetry() {
        let y00 = sph_harmonic(0, 0, 0.4, 1.3).unwrap();
        assert!((y00.re - 0.282_094_791_773_878_1).abs() < 1e-15 && y00.im == 0.0);
        let y10 = sph_harmonic(1, 0, 0.0, 0.0).unwrap();
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        let a = sph_harmonic(2, -1, 1.0, 2.0).unwrap();
        let b = sph_harmonic(2, 1, 1.0, 2.0).unwrap();
        assert!((a + b.conj()).norm() < 1e-15);
    }

    #[test]
    fn no_overflow_at_high_degree() {
        let g = make_grid(256).unwrap();
        let mut col = vec![0.0; 512];
        for &t in g.thetas() {
            let (s, c) = t.sin_cos();
            for m in [0usize, 1, 100, 255, 511] {
                normalized_legendre(m, 511, c, s, &mut col);
                assert!(col[..512 - m].iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn table_layout() {
        let t = build_table(&make_grid(2).unwrap()).unwrap();
        assert_eq!(t.legendre.len(), 3 * 4);
        let t16 = HarmonicTable::shared(Bandwidth::new(16).unwrap());
        assert!(t16.phases(0).iter().all(|p| *p == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn table_columns_orthonormal() {
        let t = build_table(&make_grid(8).unwrap()).unwrap();
        let w = t.grid().quad_weights();
        let n = t.grid().size() as f64;
        for m in 0..8 {
            for l1 in m..8 {
                for l2 in m..8 {
                    let dot: f64 = (0..16)
                        .map(|j| w[j] * t.legendre(l1, m, j) * t.legendre(l2, m, j))
                        .sum::<f64>()
                        * n;
                    let expected = if l1 == l2 { 1.0 } else { 0.0 };
                    assert!((dot - expected).abs() < 1e-9, "m={m} {l1} {l2}: {dot}");
                }
            }
        }
    }
}
