//! Shape alignment by maximizing the SO(3) correlation of spherical feature maps.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Bandwidth;
use crate::mesh::{mesh_to_sphere, TriangleMesh};
use crate::network::{forward, NetworkConfig, ParameterStore};
use crate::rotation::{rotate_spectrum, small_d_matrices, RotationZYZ};
use crate::sft::{forward as sft_forward, SpectralCoeffs, SphericalSignal};

/// Threshold on `(max − median) / max|score|` below which the optimum is
/// considered not unique.
pub const DEGENERATE_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Search {
    /// `α_i = 2πi/nα`, `β_j = πj/nβ`, `γ_k = 2πk/nγ`, scored with FFTs over
    /// (α, γ), optionally followed by a local search around the best peaks.
    Grid {
        n_alpha: usize,
        n_beta: usize,
        n_gamma: usize,
        refine: bool,
    },
    /// Explicit candidates, scored one by one.
    Candidates { rotations: Vec<RotationZYZ> },
}

impl Default for Search {
    fn default() -> Self {
        Search::Grid {
            n_alpha: 16,
            n_beta: 16,
            n_gamma: 16,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Rotation `r` maximizing `Σ_c Re⟨r·a_c, b_c⟩`, so `b ≈ r·a`.
    pub rotation: RotationZYZ,
    pub score: f64,
    pub degenerate: bool,
    /// Scores over the coarse search, in lexicographic (α, β, γ) order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_rotation_scores: Option<Vec<f64>>,
    /// Geodesic distance to a supplied ground truth, in degrees.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular_error: Option<f64>,
}

impl AlignmentResult {
    /// The `{rotation_zyz, score, degenerate, angular_error?}` document.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "rotation_zyz": [self.rotation.alpha, self.rotation.beta, self.rotation.gamma],
            "score": self.score,
            "degenerate": self.degenerate,
        });
        if let Some(e) = self.angular_error {
            v["angular_error"] = serde_json::json!(e);
        }
        v
    }

    pub fn with_ground_truth(mut self, truth: &RotationZYZ) -> Self {
        self.angular_error = Some(self.rotation.geodesic_distance(truth).to_degrees());
        self
    }
}

fn check_pair(a: &[SpectralCoeffs], b: &[SpectralCoeffs]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Shape(format!("{} feature maps against {}", a.len(), b.len())));
    }
    for (x, y) in a.iter().zip(b) {
        if x.bandwidth() != y.bandwidth() || x.channels() != y.channels() {
            return Err(Error::Shape(format!(
                "feature maps differ: {}x{} vs {}x{}",
                x.channels(),
                x.bandwidth(),
                y.channels(),
                y.bandwidth()
            )));
        }
    }
    Ok(())
}

/// Correlation score of a single rotation.
pub fn correlation_score(a: &[SpectralCoeffs], b: &[SpectralCoeffs], r: &RotationZYZ) -> Result<f64> {
    check_pair(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| rotate_spectrum(x, r).inner(y).re).sum())
}

/// `S(m', m) = Σ_ℓ,c conj(b_ℓm') d^ℓ_{m'm}(β) a_ℓm`, stored with offsets
/// `m' + L`, `m + L` in a `(2L+1)²` square, `L` the largest degree.
struct BetaSlice {
    lmax: usize,
    s: Vec<Complex64>,
}

fn beta_slice(a: &[SpectralCoeffs], b: &[SpectralCoeffs], beta: f64) -> BetaSlice {
    let lmax = a.iter().map(|x| x.bandwidth().degrees()).max().unwrap_or(1) - 1;
    let w = 2 * lmax + 1;
    let mut s = vec![Complex64::new(0.0, 0.0); w * w];
    let d = small_d_matrices(lmax, beta);
    for (x, y) in a.iter().zip(b) {
        for c in 0..x.channels() {
            for l in 0..x.bandwidth().degrees() {
                let n = 2 * l + 1;
                let xa = x.degree_block(c, l);
                let yb = y.degree_block(c, l);
                let dl = &d[l];
                for i in 0..n {
                    let by = yb[i].conj();
                    let row = (i + lmax - l) * w + (lmax - l);
                    for j in 0..n {
                        s[row + j] += by * (dl[i * n + j] * xa[j]);
                    }
                }
            }
        }
    }
    BetaSlice { lmax, s }
}

impl BetaSlice {
    /// `Re Σ S(m', m) e^{−i(m'α + mγ)}`.
    fn score(&self, alpha: f64, gamma: f64) -> f64 {
        let l = self.lmax as i64;
        let w = 2 * self.lmax + 1;
        let ea: Vec<Complex64> = (-l..=l).map(|m| Complex64::from_polar(1.0, -(m as f64) * alpha)).collect();
        let eg: Vec<Complex64> = (-l..=l).map(|m| Complex64::from_polar(1.0, -(m as f64) * gamma)).collect();
        let mut acc = 0.0;
        for i in 0..w {
            let inner: Complex64 = (0..w).map(|j| self.s[i * w + j] * eg[j]).sum();
            acc += (inner * ea[i]).re;
        }
        acc
    }

    /// Scores on the full `nα × nγ` torus grid via one 2D DFT.
    fn grid_scores(&self, na: usize, ng: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
        let l = self.lmax as i64;
        let w = 2 * self.lmax + 1;
        let mut t = vec![Complex64::new(0.0, 0.0); na * ng];
        for i in 0..w {
            let p = (i as i64 - l).rem_euclid(na as i64) as usize;
            for j in 0..w {
                let q = (j as i64 - l).rem_euclid(ng as i64) as usize;
                t[p * ng + q] += self.s[i * w + j];
            }
        }
        let fa = planner.plan_fft_forward(na);
        let fg = planner.plan_fft_forward(ng);
        for row in t.chunks_exact_mut(ng) {
            fg.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); na];
        for q in 0..ng {
            for p in 0..na {
                col[p] = t[p * ng + q];
            }
            fa.process(&mut col);
            for p in 0..na {
                t[p * ng + q] = col[p];
            }
        }
        t.iter().map(|v| v.re).collect()
    }
}

fn first_max(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn is_degenerate(scores: &[f64]) -> bool {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = *sorted.last().unwrap();
    let median = sorted[sorted.len() / 2];
    let scale = sorted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    scale == 0.0 || (max - median) / scale < DEGENERATE_THRESHOLD
}

/// Coarse grid maxima refined by the grid search.
const REFINE_STARTS: usize = 8;
/// Each level searches 7³ offsets spaced a third of the previous spacing.
const REFINE_LEVELS: usize = 3;

/// Indices of the `k` best strict-or-first local maxima of the coarse grid,
/// periodic in α and γ.
fn coarse_peaks(scores: &[f64], (na, nb, ng): (usize, usize, usize), k: usize) -> Vec<usize> {
    let idx = |p: usize, j: usize, q: usize| (p * nb + j) * ng + q;
    let mut peaks: Vec<usize> = (0..scores.len())
        .filter(|&i| {
            let (p, j, q) = (i / (nb * ng), (i / ng) % nb, i % ng);
            let v = scores[i];
            for dp in [na - 1, 0, 1] {
                for dj in [-1i64, 0, 1] {
                    for dq in [ng - 1, 0, 1] {
                        let jj = j as i64 + dj;
                        if jj < 0 || jj >= nb as i64 {
                            continue;
                        }
                        let o = idx((p + dp) % na, jj as usize, (q + dq) % ng);
                        if o != i && (scores[o] > v || (scores[o] == v && o < i)) {
                            return false;
                        }
                    }
                }
            }
            true
        })
        .collect();
    peaks.sort_by(|x, y| scores[*y].total_cmp(&scores[*x]).then(x.cmp(y)));
    peaks.truncate(k.max(1));
    peaks
}

/// Local search around `start`: each level tries the 7³
/// offsets `k·step/3`, `k = −3..3`, recentres, then shrinks the step.
fn refine_peak(
    a: &[SpectralCoeffs],
    b: &[SpectralCoeffs],
    start: (f64, f64, f64),
    cell: (f64, f64, f64),
) -> (f64, (f64, f64, f64)) {
    let mut best = (f64::NEG_INFINITY, start);
    let mut step = cell;
    for _ in 0..REFINE_LEVELS {
        step = (step.0 / 3.0, step.1 / 3.0, step.2 / 3.0);
        let centre = best.1;
        let level: Vec<(f64, (f64, f64, f64))> = (-3..=3)
            .into_par_iter()
            .map(|kb| {
                let beta = centre.1 + kb as f64 * step.1;
                let slice = beta_slice(a, b, beta);
                let mut local = (f64::NEG_INFINITY, centre);
                for ka in -3..=3 {
                    for kg in -3..=3 {
                        let cand = (centre.0 + ka as f64 * step.0, beta, centre.2 + kg as f64 * step.2);
                        let s = slice.score(cand.0, cand.2);
                        if s > local.0 {
                            local = (s, cand);
                        }
                    }
                }
                local
            })
            .collect();
        for cand in level {
            if cand.0 > best.0 {
                best = cand;
            }
        }
    }
    best
}

/// Finds the rotation maximizing the summed correlation of `a` against `b`.
/// Ties go to the lexicographically first `(α, β, γ)` of the search.
pub fn so3_correlate(a: &[SpectralCoeffs], b: &[SpectralCoeffs], search: &Search) -> Result<AlignmentResult> {
    check_pair(a, b)?;
    match search {
        Search::Candidates { rotations } => {
            if rotations.is_empty() {
                return Err(Error::Config("no candidate rotations".into()));
            }
            let scores: Vec<f64> = rotations
                .par_iter()
                .map(|r| a.iter().zip(b).map(|(x, y)| rotate_spectrum(x, r).inner(y).re).sum())
                .collect();
            let best = first_max(&scores);
            Ok(AlignmentResult {
                rotation: rotations[best],
                score: scores[best],
                degenerate: is_degenerate(&scores),
                per_rotation_scores: Some(scores),
                angular_error: None,
            })
        }
        &Search::Grid {
            n_alpha,
            n_beta,
            n_gamma,
            refine,
        } => {
            if n_alpha == 0 || n_beta == 0 || n_gamma == 0 {
                return Err(Error::Config("empty search grid".into()));
            }
            let slices: Vec<Vec<f64>> = (0..n_beta)
                .into_par_iter()
                .map(|j| {
                    let slice = beta_slice(a, b, PI * j as f64 / n_beta as f64);
                    slice.grid_scores(n_alpha, n_gamma, &mut FftPlanner::new())
                })
                .collect();
            let mut scores = Vec::with_capacity(n_alpha * n_beta * n_gamma);
            for p in 0..n_alpha {
                for slice in &slices {
                    scores.extend_from_slice(&slice[p * n_gamma..(p + 1) * n_gamma]);
                }
            }
            let best = first_max(&scores);
            let (da, db, dg) = (TAU / n_alpha as f64, PI / n_beta as f64, TAU / n_gamma as f64);
            let at = |i: usize| {
                let (p, j, q) = (i / (n_beta * n_gamma), (i / n_gamma) % n_beta, i % n_gamma);
                (p as f64 * da, j as f64 * db, q as f64 * dg)
            };
            let mut angles = at(best);
            let mut score = scores[best];
            if refine {
                for start in coarse_peaks(&scores, (n_alpha, n_beta, n_gamma), REFINE_STARTS) {
                    let (s, cand) = refine_peak(a, b, at(start), (da, db, dg));
                    if s > score {
                        score = s;
                        angles = cand;
                    }
                }
            }
            Ok(AlignmentResult {
                rotation: RotationZYZ::new(angles.0, angles.1, angles.2),
                score,
                degenerate: is_degenerate(&scores),
                per_rotation_scores: Some(scores),
                angular_error: None,
            })
        }
    }
}

/// Feature maps of a spherical signal used for alignment: the signal
/// itself, or the taps named `layer` (exactly, or `<branch>.<layer>` in every
/// branch) of a network run on it.
pub fn signal_features(
    signal: &SphericalSignal,
    net: Option<(&NetworkConfig, &ParameterStore)>,
    layer: &str,
) -> Result<Vec<SpectralCoeffs>> {
    let Some((cfg, params)) = net else {
        return Ok(vec![sft_forward(signal)]);
    };
    let out = forward(cfg, params, signal)?;
    let suffix = format!(".{layer}");
    let maps: Vec<SpectralCoeffs> = out
        .taps
        .iter()
        .filter(|t| t.name == layer || t.name.ends_with(&suffix))
        .map(|t| sft_forward(&t.signal))
        .collect();
    if maps.is_empty() {
        let names: Vec<&str> = out.taps.iter().map(|t| t.name.as_str()).collect();
        return Err(Error::Config(format!("no tap named {layer:?}; available: {names:?}")));
    }
    Ok(maps)
}

/// [`signal_features`] of a mesh's spherical representation, projected at
/// the network's input bandwidth when a network is given.
pub fn mesh_features(
    mesh: &TriangleMesh,
    bandwidth: Bandwidth,
    net: Option<(&NetworkConfig, &ParameterStore)>,
    layer: &str,
) -> Result<Vec<SpectralCoeffs>> {
    let b = net.map_or(bandwidth, |(cfg, _)| cfg.input_bandwidth);
    signal_features(&mesh_to_sphere(mesh, b)?.signal, net, layer)
}

/// Aligns `mesh_a` onto `mesh_b`: the result rotation maps A's features to B's.
pub fn align_shapes(
    mesh_a: &TriangleMesh,
    mesh_b: &TriangleMesh,
    bandwidth: Bandwidth,
    net: Option<(&NetworkConfig, &ParameterStore)>,
    layer: &str,
    search: &Search,
) -> Result<AlignmentResult> {
    let a = mesh_features(mesh_a, bandwidth, net, layer)?;
    let b = mesh_features(mesh_b, bandwidth, net, layer)?;
    so3_correlate(&a, &b, search)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::{sample_rotations, RotationSampling};
    use crate::synth::random_real_coeffs;

    fn bw(b: u32) -> Bandwidth {
        Bandwidth::new(b).unwrap()
    }

    fn brute_scores(a: &[SpectralCoeffs], b: &[SpectralCoeffs], n: usize) -> Vec<f64> {
        sample_rotations(&RotationSampling::EquiangularGrid {
            n_alpha: n,
            n_beta: n,
            n_gamma: n,
        })
        .iter()
        .map(|r| correlation_score(a, b, r).unwrap())
        .collect()
    }

    #[test]
    fn fft_scores_match_direct_rotation() {
        let a = vec![random_real_coeffs(bw(6), 2, 1)];
        let b = vec![random_real_coeffs(bw(6), 2, 2)];
        let fast = so3_correlate(
            &a,
            &b,
            &Search::Grid {
                n_alpha: 6,
                n_beta: 6,
                n_gamma: 6,
                refine: false,
            },
        )
        .unwrap();
        let slow = brute_scores(&a, &b, 6);
        for (x, y) in fast.per_rotation_scores.unwrap().iter().zip(&slow) {
            assert!((x - y).abs() < 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn identical_features_align_at_identity() {
        let a = vec![random_real_coeffs(bw(8), 1, 3)];
        let r = so3_correlate(&a, &a, &Search::default()).unwrap();
        assert!(r.rotation.geodesic_distance(&RotationZYZ::identity()) < 1e-12);
        assert!((r.score - a[0].norm_sqr()).abs() < 1e-9);
        assert!(!r.degenerate);
    }

    #[test]
    fn planted_grid_rotation_recovered_exactly() {
        let a = vec![random_real_coeffs(bw(8), 2, 5)];
        let planted = RotationZYZ::new(3.0 * TAU / 16.0, 5.0 * PI / 16.0, 11.0 * TAU / 16.0);
        let b = vec![rotate_spectrum(&a[0], &planted)];
        let r = so3_correlate(&a, &b, &Search::default()).unwrap();
        assert!(r.rotation.geodesic_distance(&planted) < 1e-9);
        assert!((r.score - a[0].norm_sqr()).abs() < 1e-6);
        let cands = Search::Candidates {
            rotations: vec![RotationZYZ::identity(), planted, RotationZYZ::new(1.0, 1.0, 1.0)],
        };
        assert_eq!(so3_correlate(&a, &b, &cands).unwrap().rotation, planted);
    }

    #[test]
    fn off_grid_rotation_recovered_within_a_cell() {
        let a = vec![random_real_coeffs(bw(8), 1, 8)];
        let planted = RotationZYZ::new(1.234, 0.987, -2.2);
        let b = vec![rotate_spectrum(&a[0], &planted)];
        let r = so3_correlate(&a, &b, &Search::default()).unwrap();
        assert!(r.rotation.geodesic_distance(&planted).to_degrees() < 11.25);
    }

    #[test]
    fn score_symmetry() {
        let a = vec![random_real_coeffs(bw(6), 1, 1)];
        let b = vec![random_real_coeffs(bw(6), 1, 2)];
        for r in sample_rotations(&RotationSampling::RandomUniform { seed: 3, count: 10 }) {
            let x = correlation_score(&a, &b, &r).unwrap();
            let y = correlation_score(&b, &a, &r.inverse()).unwrap();
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_features_are_degenerate() {
        let mut c = SpectralCoeffs::zeros(bw(4), 1);
        c.set(0, 0, 0, Complex64::new(2.0, 0.0));
        let r = so3_correlate(&[c.clone()], &[c], &Search::default()).unwrap();
        assert!(r.degenerate);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = vec![random_real_coeffs(bw(4), 1, 1)];
        let b = vec![random_real_coeffs(bw(8), 1, 1)];
        assert!(so3_correlate(&a, &b, &Search::default()).is_err());
        assert!(so3_correlate(&a, &[], &Search::default()).is_err());
    }

    #[test]
    fn sphere_mesh_is_degenerate() {
        let s = TriangleMesh::icosphere(3);
        let r = align_shapes(&s, &s, bw(8), None, "input", &Search::default()).unwrap();
        assert!(r.degenerate);
    }

    #[test]
    fn json_document() {
        let r = AlignmentResult {
            rotation: RotationZYZ::new(0.1, 0.2, 0.3),
            score: 1.5,
            degenerate: false,
            per_rotation_scores: None,
            angular_error: None,
        };
        let v = r.clone().to_json();
        assert_eq!(v["score"], 1.5);
        assert!(v.get("angular_error").is_none());
        let v = r.with_ground_truth(&RotationZYZ::new(0.1, 0.2, 0.3)).to_json();
        assert!(v["angular_error"].as_f64().unwrap() < 1e-6);
    }
}
