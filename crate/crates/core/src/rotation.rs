//! Rotations of spherical signals and spectra.
//!
//! A rotation `R` acts on a function by `(R f)(x) = f(R⁻¹ x)`. On harmonic
//! coefficients it acts block-diagonally by degree:
//!
//! ```text
//! (R f)^ℓ_{m'} = Σ_m D^ℓ_{m'm}(R) f̂^ℓ_m,   D^ℓ_{m'm}(α, β, γ) = e^{−im'α} d^ℓ_{m'm}(β) e^{−imγ}
//! ```
//!
//! for `R = Rz(α) Ry(β) Rz(γ)`. The small-d matrices come from the
//! three-term recurrence in degree, seeded at `ℓ = max(|m|, |m'|)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{cartesian_to_spherical, SphericalGrid};
use crate::harmonics::HarmonicTable;
use crate::sft::{isft, sft_sepvar, SpectralCoeffs, SphericalSignal};

pub type Mat3 = [[f64; 3]; 3];

const TWO_PI: f64 = 2.0 * PI;

/// Rotation `Rz(alpha) · Ry(beta) · Rz(gamma)`.
///
/// Angles are kept canonical: `alpha, gamma ∈ [0, 2π)`, `beta ∈ [0, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationZYZ {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl RotationZYZ {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        let mut beta = beta.rem_euclid(TWO_PI);
        let (mut alpha, mut gamma) = (alpha, gamma);
        if beta > PI {
            beta = TWO_PI - beta;
            alpha += PI;
            gamma += PI;
        }
        RotationZYZ {
            alpha: canonical_angle(alpha),
            beta,
            gamma: canonical_angle(gamma),
        }
    }

    pub fn identity() -> Self {
        RotationZYZ {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        }
    }

    /// Rotation about the z axis.
    pub fn about_z(angle: f64) -> Self {
        RotationZYZ::new(angle, 0.0, 0.0)
    }

    pub fn matrix(&self) -> Mat3 {
        matmul(&matmul(&rot_z(self.alpha), &rot_y(self.beta)), &rot_z(self.gamma))
    }

    pub fn from_matrix(r: &Mat3) -> Self {
        let cb = r[2][2].clamp(-1.0, 1.0);
        let sb = (r[0][2] * r[0][2] + r[1][2] * r[1][2]).sqrt();
        if sb > 1e-12 {
            RotationZYZ::new(r[1][2].atan2(r[0][2]), sb.atan2(cb), r[2][1].atan2(-r[2][0]))
        } else if cb > 0.0 {
            RotationZYZ::new(r[1][0].atan2(r[0][0]), 0.0, 0.0)
        } else {
            RotationZYZ::new((-r[1][0]).atan2(r[1][1]), PI, 0.0)
        }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &RotationZYZ) -> RotationZYZ {
        RotationZYZ::from_matrix(&matmul(&self.matrix(), &first.matrix()))
    }

    pub fn inverse(&self) -> RotationZYZ {
        // Ry(−β) = Rz(π) Ry(β) Rz(π), which the canonical form absorbs
        RotationZYZ::new(-self.gamma, -self.beta, -self.alpha)
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        matvec(&self.matrix(), v)
    }

    /// Angle of the relative rotation between `self` and `other`, in radians.
    pub fn geodesic_distance(&self, other: &RotationZYZ) -> f64 {
        let rel = matmul(&transpose(&self.matrix()), &other.matrix());
        let trace = rel[0][0] + rel[1][1] + rel[2][2];
        ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        let m = [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ];
        RotationZYZ::from_matrix(&m)
    }

    /// Haar-uniform random rotation (uniform unit quaternion).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        RotationZYZ::from_quaternion([
            b * (TWO_PI * u3).cos(),
            a * (TWO_PI * u2).sin(),
            a * (TWO_PI * u2).cos(),
            b * (TWO_PI * u3).sin(),
        ])
    }
}

fn canonical_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn matvec(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

/// Small-d matrices `d^ℓ(β)` for `ℓ = 0..=lmax`.
///
/// Entry `[ℓ][(m' + ℓ) * (2ℓ + 1) + (m + ℓ)]` holds `d^ℓ_{m'm}(β)`.
pub fn small_d_matrices(lmax: usize, beta: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..=lmax).map(|l| vec![0.0; (2 * l + 1) * (2 * l + 1)]).collect();
    if beta == 0.0 {
        for (l, d) in out.iter_mut().enumerate() {
            for i in 0..=2 * l {
                d[i * (2 * l + 1) + i] = 1.0;
            }
        }
        return out;
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=2 * lmax + 1).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let c = (beta / 2.0).cos();
    let s = (beta / 2.0).sin();
    let cb = beta.cos();

    // d^ℓ_{ℓ,k}(β) = sqrt(C(2ℓ, ℓ+k)) c^{ℓ+k} (−s)^{ℓ−k}
    let top = |l: i64, k: i64| -> f64 {
        let (p, q) = ((l + k) as i32, (l - k) as i32);
        let ln_binom = ln_fact[(2 * l) as usize] - ln_fact[(l + k) as usize] - ln_fact[(l - k) as usize];
        let mut mag = 0.5 * ln_binom;
        let mut sign = 1.0;
        for (base, e) in [(c, p), (-s, q)] {
            if e == 0 {
                continue;
            }
            if base == 0.0 {
                return 0.0;
            }
            mag += e as f64 * base.abs().ln();
            if base < 0.0 && e % 2 == 1 {
                sign = -sign;
            }
        }
        sign * mag.exp()
    };
    let parity = |e: i64| if e.rem_euclid(2) == 0 { 1.0 } else { -1.0 };

    let lm = lmax as i64;
    for mp in -lm..=lm {
        for m in -lm..=lm {
            let l0 = mp.abs().max(m.abs());
            let seed = if mp == l0 {
                top(l0, m)
            } else if mp == -l0 {
                parity(l0 + m) * top(l0, -m)
            } else if m == l0 {
                parity(l0 - mp) * top(l0, mp)
            } else {
                top(l0, -mp)
            };
            let (mpf, mf) = (mp as f64, m as f64);
            let mut prev = 0.0;
            let mut cur = seed;
            let mut l = l0;
            loop {
                let lu = l as usize;
                out[lu][(mp + l) as usize * (2 * lu + 1) + (m + l) as usize] = cur;
                if l == lm {
                    break;
                }
                let lf = l as f64;
                let l1 = lf + 1.0;
                let a = ((l1 * l1 - mf * mf) * (l1 * l1 - mpf * mpf)).sqrt();
                let cross = if l == 0 { 0.0 } else { mf * mpf / (lf * l1) };
                let back = if l == 0 {
                    0.0
                } else {
                    l1 * ((lf * lf - mf * mf) * (lf * lf - mpf * mpf)).sqrt() / (lf * a)
                };
                let next = l1 * (2.0 * lf + 1.0) / a * (cb - cross) * cur - back * prev;
                prev = cur;
                cur = next;
                l += 1;
            }
        }
    }
    out
}

/// Matrix of the rotation acting on degree-`ℓ` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerBlock {
    pub degree: usize,
    /// Row-major `(2ℓ+1)²`; row `m' + ℓ`, column `m + ℓ`.
    pub matrix: Vec<Complex64>,
}

impl WignerBlock {
    pub fn dim(&self) -> usize {
        2 * self.degree + 1
    }

    pub fn get(&self, mp: i64, m: i64) -> Complex64 {
        let l = self.degree as i64;
        self.matrix[((mp + l) * (2 * l + 1) + m + l) as usize]
    }

    /// Largest entry of `D D† − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let dot: Complex64 = (0..n)
                    .map(|k| self.matrix[i * n + k] * self.matrix[j * n + k].conj())
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - expect).norm());
            }
        }
        worst
    }
}

pub fn wigner_d(l: usize, r: &RotationZYZ) -> WignerBlock {
    let d = small_d_matrices(l, r.beta);
    wigner_from_small_d(l, &d[l], r.alpha, r.gamma)
}

fn wigner_from_small_d(l: usize, d: &[f64], alpha: f64, gamma: f64) -> WignerBlock {
    let n = 2 * l + 1;
    let li = l as i64;
    let mut matrix = Vec::with_capacity(n * n);
    for mp in -li..=li {
        let ea = Complex64::from_polar(1.0, -(mp as f64) * alpha);
        for m in -li..=li {
            let eg = Complex64::from_polar(1.0, -(m as f64) * gamma);
            let dv = d[(mp + li) as usize * n + (m + li) as usize];
            matrix.push(ea * eg * dv);
        }
    }
    WignerBlock { degree: l, matrix }
}

/// Applies `r` to every degree block; exact for any spectrum.
pub fn rotate_spectrum(coeffs: &SpectralCoeffs, r: &RotationZYZ) -> SpectralCoeffs {
    let b = coeffs.bandwidth().degrees();
    let d = small_d_matrices(b - 1, r.beta);
    let blocks: Vec<WignerBlock> = (0..b)
        .map(|l| wigner_from_small_d(l, &d[l], r.alpha, r.gamma))
        .collect();
    let mut out = coeffs.clone();
    for c in 0..coeffs.channels() {
        for (l, block) in blocks.iter().enumerate() {
            let n = 2 * l + 1;
            let src = coeffs.degree_block(c, l);
            let dst = out.degree_block_mut(c, l);
            for i in 0..n {
                dst[i] = block.matrix[i * n..(i + 1) * n]
                    .iter()
                    .zip(src)
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
    }
    out
}

/// Rotates a sampled signal through its spectrum. Content at or above the
/// bandwidth is discarded, so this is exact only for bandlimited input.
pub fn rotate_signal(signal: &SphericalSignal, r: &RotationZYZ, table: &HarmonicTable) -> Result<SphericalSignal> {
    let spec = sft_sepvar(signal, table)?;
    isft(&rotate_spectrum(&spec, r), table)
}

/// Rotates a signal by bilinear resampling of the grid at `R⁻¹ x`.
///
/// Not exactly equivariant; this is the stand-in for rotating a raw,
/// non-bandlimited input.
pub fn rotate_signal_resampled(signal: &SphericalSignal, r: &RotationZYZ) -> SphericalSignal {
    let grid = SphericalGrid::new(signal.bandwidth());
    let n = grid.size();
    let inv = transpose(&r.matrix());
    let dtheta = PI / n as f64;
    let dphi = TWO_PI / n as f64;
    let mut out = SphericalSignal::zeros(signal.bandwidth(), signal.channels());
    let pole_means: Vec<f64> = (0..signal.channels())
        .map(|c| signal.channel(c)[(n - 1) * n..].iter().sum::<f64>() / n as f64)
        .collect();
    for j in 0..n {
        for k in 0..n {
            let (t, p) = cartesian_to_spherical(matvec(&inv, grid.direction(j, k)));
            let u = t / dtheta;
            let v = p / dphi;
            let j0 = (u.floor() as usize).min(n - 1);
            let fu = u - j0 as f64;
            let k0 = v.floor() as usize % n;
            let k1 = (k0 + 1) % n;
            let fv = v - v.floor();
            for c in 0..signal.channels() {
                let ch = signal.channel(c);
                let row = |jj: usize| -> f64 {
                    if jj >= n {
                        pole_means[c]
                    } else {
                        ch[jj * n + k0] * (1.0 - fv) + ch[jj * n + k1] * fv
                    }
                };
                let val = row(j0) * (1.0 - fu) + row(j0 + 1) * fu;
                out.channel_mut(c)[j * n + k] = val;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationSampling {
    /// Haar-uniform draws from a seeded generator.
    RandomUniform { seed: u64, count: usize },
    /// `α_i = 2πi/nα`, `β_j = πj/nβ`, `γ_k = 2πk/nγ`, in lexicographic order.
    EquiangularGrid { n_alpha: usize, n_beta: usize, n_gamma: usize },
}

pub fn sample_rotations(scheme: &RotationSampling) -> Vec<RotationZYZ> {
    match *scheme {
        RotationSampling::RandomUniform { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| RotationZYZ::random(&mut rng)).collect()
        }
        RotationSampling::EquiangularGrid {
            n_alpha,
            n_beta,
            n_gamma,
        } => {
            let mut out = Vec::with_capacity(n_alpha * n_beta * n_gamma);
            for i in 0..n_alpha {
                for j in 0..n_beta {
                    for k in 0..n_gamma {
                        out.push(RotationZYZ::new(
                            TWO_PI * i as f64 / n_alpha as f64,
                            PI * j as f64 / n_beta as f64,
                            TWO_PI * k as f64 / n_gamma as f64,
                        ));
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{spherical_to_cartesian, Bandwidth};
    use crate::harmonics::sph_harmonic;
    use crate::synth::random_real_coeffs;
    use std::sync::Arc;

    fn table(b: u32) -> Arc<HarmonicTable> {
        HarmonicTable::shared(Bandwidth::new(b).unwrap())
    }

    /// Evaluates Σ c Y at an arbitrary point with the scalar harmonic routine.
    fn evaluate(c: &SpectralCoeffs, ch: usize, theta: f64, phi: f64) -> f64 {
        let b = c.bandwidth().degrees();
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..b {
            for m in -(l as i64)..=(l as i64) {
                acc += c.get(ch, l, m) * sph_harmonic(l, m, theta, phi).unwrap();
            }
        }
        acc.re
    }

    #[test]
    fn identity_block_is_identity() {
        for l in [0usize, 1, 5, 12] {
            let d = wigner_d(l, &RotationZYZ::identity());
            let n = d.dim();
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(d.matrix[i * n + j], Complex64::new(e, 0.0));
                }
            }
        }
    }

    #[test]
    fn z_rotation_is_diagonal_phase() {
        let g = 0.83;
        let d = wigner_d(3, &RotationZYZ::about_z(g));
        for mp in -3i64..=3 {
            for m in -3i64..=3 {
                let expect = if mp == m {
                    Complex64::from_polar(1.0, -(m as f64) * g)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((d.get(mp, m) - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn small_d_known_values() {
        let beta: f64 = 0.7;
        let d = small_d_matrices(2, beta);
        let at = |l: usize, mp: i64, m: i64| d[l][((mp + l as i64) * (2 * l as i64 + 1) + m + l as i64) as usize];
        assert!((at(1, 1, 0) + beta.sin() / 2f64.sqrt()).abs() < 1e-14);
        assert!((at(1, 0, 1) - beta.sin() / 2f64.sqrt()).abs() < 1e-14);
        assert!((at(1, 1, 1) - (1.0 + beta.cos()) / 2.0).abs() < 1e-14);
        assert!((at(2, 0, 0) - (3.0 * beta.cos().powi(2) - 1.0) / 2.0).abs() < 1e-14);
        assert!((at(2, 2, 1) + (1.0 + beta.cos()) * beta.sin() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn blocks_are_unitary_at_high_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            let r = RotationZYZ::random(&mut rng);
            for l in [1usize, 10, 31, 63] {
                assert!(wigner_d(l, &r).unitarity_defect() < 1e-10, "l={l}");
            }
        }
    }

    #[test]
    fn convention_lock() {
        // rotate_signal agrees with pointwise evaluation at R⁻¹ x
        let b = Bandwidth::new(8).unwrap();
        let t = table(8);
        let grid = t.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..50 {
            let r = RotationZYZ::random(&mut rng);
            let c = random_real_coeffs(b, 1, 1000 + trial);
            let rotated = rotate_signal(&isft(&c, &t).unwrap(), &r, &t).unwrap();
            let inv = r.inverse();
            for (j, k) in [(0usize, 0usize), (3, 5), (7, 11), (15, 2), (9, 9)] {
                let x = grid.direction(j, k);
                let (th, ph) = cartesian_to_spherical(inv.apply(x));
                let expect = evaluate(&c, 0, th, ph);
                assert!((rotated.get(0, j, k) - expect).abs() < 1e-9, "trial {trial}");
            }
        }
    }

    #[test]
    fn degree_one_matches_resampling_oracle() {
        let b = Bandwidth::new(4).unwrap();
        let t = table(4);
        let mut c = SpectralCoeffs::zeros(b, 1);
        c.set(0, 1, 0, Complex64::new(0.7, 0.0));
        c.set(0, 1, 1, Complex64::new(0.2, -0.4));
        c.enforce_real_symmetry();
        let r = RotationZYZ::new(0.3, 1.2, 2.1);
        let inv = r.inverse();
        let resampled = SphericalSignal::from_fn(b, 1, |_, th, ph| {
            let (t2, p2) = cartesian_to_spherical(inv.apply(spherical_to_cartesian(th, ph)));
            evaluate(&c, 0, t2, p2)
        });
        let via_spectrum = rotate_spectrum(&c, &r);
        let via_samples = sft_sepvar(&resampled, &t).unwrap();
        assert!(via_spectrum.max_abs_diff(&via_samples) < 1e-9);
    }

    #[test]
    fn composition_and_inverse() {
        let b = Bandwidth::new(8).unwrap();
        let c = random_real_coeffs(b, 2, 5);
        let r1 = RotationZYZ::new(0.4, 2.0, 5.0);
        let r2 = RotationZYZ::new(3.0, 0.9, 1.0);
        let two_step = rotate_spectrum(&rotate_spectrum(&c, &r1), &r2);
        let one_step = rotate_spectrum(&c, &r2.compose(&r1));
        assert!(two_step.max_abs_diff(&one_step) < 1e-9);
        let back = rotate_spectrum(&rotate_spectrum(&c, &r1), &r1.inverse());
        assert!(back.max_abs_diff(&c) < 1e-9);
        assert!(rotate_spectrum(&c, &RotationZYZ::identity()).max_abs_diff(&c) < 1e-15);
        // per-degree norms preserved
        let rc = rotate_spectrum(&c, &r1);
        for l in 0..8 {
            let n0: f64 = c.degree_block(1, l).iter().map(|v| v.norm_sqr()).sum();
            let n1: f64 = rc.degree_block(1, l).iter().map(|v| v.norm_sqr()).sum();
            assert!((n0 - n1).abs() < 1e-10);
        }
    }

    #[test]
    fn azimuthal_grid_step_rolls_columns() {
        let b = Bandwidth::new(8).unwrap();
        let t = table(8);
        let s = isft(&random_real_coeffs(b, 1, 3), &t).unwrap();
        let rolled = rotate_signal(&s, &RotationZYZ::about_z(PI / 8.0), &t).unwrap();
        let n = 16;
        for j in 0..n {
            for k in 0..n {
                assert!((rolled.get(0, j, k) - s.get(0, j, (k + n - 1) % n)).abs() < 1e-9);
            }
        }
        let ident = rotate_signal(&s, &RotationZYZ::identity(), &t).unwrap();
        assert!(ident.max_abs_diff(&s) < 1e-9);
    }

    #[test]
    fn sampling_schemes() {
        let id = sample_rotations(&RotationSampling::EquiangularGrid {
            n_alpha: 1,
            n_beta: 1,
            n_gamma: 1,
        });
        assert_eq!(id, vec![RotationZYZ::identity()]);
        let s = RotationSampling::RandomUniform { seed: 4, count: 5 };
        assert_eq!(sample_rotations(&s), sample_rotations(&s));
    }

    #[test]
    fn haar_mean_of_degree_one_vanishes() {
        let rots = sample_rotations(&RotationSampling::RandomUniform { seed: 17, count: 10_000 });
        let mut mean = vec![Complex64::new(0.0, 0.0); 9];
        for r in &rots {
            for (acc, v) in mean.iter_mut().zip(wigner_d(1, r).matrix) {
                *acc += v / rots.len() as f64;
            }
        }
        assert!(mean.iter().all(|v| v.norm() < 0.05));
    }

    #[test]
    fn matrix_round_trip_and_canonical_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let r = RotationZYZ::random(&mut rng);
            assert!((0.0..TWO_PI).contains(&r.alpha) && (0.0..=PI).contains(&r.beta));
            let back = RotationZYZ::from_matrix(&r.matrix());
            assert!(r.geodesic_distance(&back) < 1e-7);
        }
        let r = RotationZYZ::new(-0.5, 4.0, 7.0);
        assert!(r.beta <= PI && r.alpha >= 0.0 && r.gamma < TWO_PI);
        let raw = matmul(&matmul(&rot_z(-0.5), &rot_y(4.0)), &rot_z(7.0));
        assert!(RotationZYZ::from_matrix(&raw).geodesic_distance(&r) < 1e-7);
    }
}
