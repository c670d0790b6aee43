//! Equivariance measurement: rotate the input, rotate the feature maps, and
//! report the mean relative discrepancy per layer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::HarmonicTable;
use crate::mesh::{mesh_to_sphere, TriangleMesh};
use crate::network::{forward, NetworkConfig, ParameterStore, PoolKind};
use crate::rotation::{rotate_signal, rotate_signal_resampled, RotationZYZ};
use crate::sft::{bandlimit, SphericalSignal};
use crate::spectral::Nonlinearity;

/// Norm used for every relative error in a report.
pub const NORM_DESCRIPTION: &str = "quadrature-weighted L2 over the sphere";

/// Inputs to probe the network with.
#[derive(Clone, Debug)]
pub enum Stimuli {
    /// Spherical signals. Without bandlimiting, the rotated copy is resampled
    /// bilinearly from the grid.
    Signals(Vec<SphericalSignal>),
    /// Meshes. Without bandlimiting, the rotated copy is the projection of
    /// the rotated mesh.
    Meshes(Vec<TriangleMesh>),
}

impl Stimuli {
    fn len(&self) -> usize {
        match self {
            Stimuli::Signals(s) => s.len(),
            Stimuli::Meshes(m) => m.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureOptions {
    /// Rotations drawn per stimulus.
    pub rotations: usize,
    pub seed: u64,
    /// Project inputs onto degrees below `b` and rotate them spectrally.
    pub bandlimit: bool,
    /// Recorded in the report only.
    pub trained: bool,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            rotations: 1,
            seed: 0,
            bandlimit: false,
            trained: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigDescriptor {
    /// Input grid side, `2b`.
    pub resolution: usize,
    pub bandlimited: bool,
    /// Pooling kind shared by the pooling layers, or `mixed`.
    pub pool: String,
    pub linear: bool,
    pub trained: bool,
}

impl ConfigDescriptor {
    /// Short row label such as `64²/blim/lin/sp`.
    pub fn label(&self) -> String {
        let mut parts = vec![format!("{}²", self.resolution)];
        if self.bandlimited {
            parts.push("blim".into());
        }
        if self.linear {
            parts.push("lin".into());
        }
        parts.push(self.pool.clone());
        if !self.trained {
            parts.push("untrained".into());
        }
        parts.join("/")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub config: ConfigDescriptor,
    pub norm: String,
    pub layers: Vec<String>,
    pub per_layer_error: Vec<f64>,
    pub rotations_used: usize,
    pub samples_used: usize,
    /// (sample, layer) pairs skipped because the feature map was zero.
    pub excluded: usize,
    pub seed: u64,
}

fn describe(cfg: &NetworkConfig, opts: &MeasureOptions) -> ConfigDescriptor {
    let pools: Vec<PoolKind> = cfg.layers.iter().map(|l| l.pool).filter(|p| *p != PoolKind::None).collect();
    let pool = match pools.first() {
        None => "none".to_string(),
        Some(p) if pools.iter().all(|q| q == p) => format!("{p:?}").to_lowercase(),
        Some(_) => "mixed".to_string(),
    };
    ConfigDescriptor {
        resolution: cfg.input_bandwidth.grid_size(),
        bandlimited: opts.bandlimit,
        pool,
        linear: cfg.layers.iter().all(|l| l.nonlinearity == Nonlinearity::None),
        trained: opts.trained,
    }
}

fn weighted_diff_norm(a: &SphericalSignal, b: &SphericalSignal) -> f64 {
    let values = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    SphericalSignal::from_values(a.bandwidth(), a.channels(), values)
        .expect("same shape")
        .weighted_norm()
}

/// Per-layer errors `‖taps(rotate x) − rotate(taps x)‖ / ‖taps x‖`, averaged
/// over every (stimulus, rotation) pair.
pub fn measure(
    cfg: &NetworkConfig,
    params: &ParameterStore,
    stimuli: &Stimuli,
    opts: &MeasureOptions,
) -> Result<EquivarianceReport> {
    if stimuli.len() == 0 {
        return Err(Error::Config("need at least one stimulus".into()));
    }
    if opts.rotations == 0 {
        return Err(Error::Config("need at least one rotation".into()));
    }
    let b = cfg.input_bandwidth;
    let table = HarmonicTable::shared(b);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let jobs: Vec<(usize, RotationZYZ)> = (0..stimuli.len())
        .flat_map(|i| (0..opts.rotations).map(move |_| i))
        .map(|i| (i, RotationZYZ::random(&mut rng)))
        .collect();
    let results: Vec<Result<(Vec<String>, Vec<Option<f64>>)>> = jobs
        .par_iter()
        .map(|(i, r)| {
            let (x, xr) = match stimuli {
                Stimuli::Signals(s) => {
                    let x = &s[*i];
                    if opts.bandlimit {
                        let x = bandlimit(x, &table)?;
                        let xr = rotate_signal(&x, r, &table)?;
                        (x, xr)
                    } else {
                        (x.clone(), rotate_signal_resampled(x, r))
                    }
                }
                Stimuli::Meshes(m) => {
                    let x = mesh_to_sphere(&m[*i], b)?.signal;
                    if opts.bandlimit {
                        let x = bandlimit(&x, &table)?;
                        let xr = rotate_signal(&x, r, &table)?;
                        (x, xr)
                    } else {
                        (x, mesh_to_sphere(&m[*i].rotated(r), b)?.signal)
                    }
                }
            };
            let base = forward(cfg, params, &x)?;
            let rot = forward(cfg, params, &xr)?;
            let mut names = Vec::new();
            let mut errs = Vec::new();
            for (t, u) in base.taps.iter().zip(&rot.taps) {
                names.push(t.name.clone());
                let lt = HarmonicTable::shared(t.signal.bandwidth());
                let expect = rotate_signal(&t.signal, r, &lt)?;
                let denom = t.signal.weighted_norm();
                errs.push((denom > 0.0).then(|| weighted_diff_norm(&u.signal, &expect) / denom));
            }
            Ok((names, errs))
        })
        .collect();
    let mut layers = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut excluded = 0;
    for res in results {
        let (names, errs) = res?;
        if layers.is_empty() {
            sums = vec![0.0; names.len()];
            counts = vec![0; names.len()];
            layers = names;
        }
        for (k, e) in errs.into_iter().enumerate() {
            match e {
                Some(v) => {
                    sums[k] += v;
                    counts[k] += 1;
                }
                None => excluded += 1,
            }
        }
    }
    if excluded > 0 {
        log::warn!("excluded {excluded} zero-norm feature maps from the equivariance means");
    }
    Ok(EquivarianceReport {
        config: describe(cfg, opts),
        norm: NORM_DESCRIPTION.into(),
        per_layer_error: sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect(),
        layers,
        rotations_used: jobs.len(),
        samples_used: stimuli.len(),
        excluded,
        seed: opts.seed,
    })
}

/// Aligned text table, one row per report, one column per layer.
pub fn format_table(reports: &[EquivarianceReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let labels: Vec<String> = reports.iter().map(|r| r.config.label()).collect();
    let lw = labels.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(6);
    let cw = first.layers.iter().map(|l| l.len()).max().unwrap_or(0).max(8);
    let mut out = format!("# errors: mean relative {}\n", first.norm);
    out += &format!("{:<lw$}", "config");
    for l in &first.layers {
        out += &format!(" | {l:>cw$}");
    }
    out.push('\n');
    out += &"-".repeat(lw + first.layers.len() * (cw + 3));
    out.push('\n');
    for (r, label) in reports.iter().zip(&labels) {
        out += label;
        out += &" ".repeat(lw.saturating_sub(label.chars().count()));
        for e in &r.per_layer_error {
            out += &format!(" | {e:>cw$.4}");
        }
        out.push('\n');
    }
    out
}
