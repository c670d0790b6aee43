//! Spherical CNN: configuration, parameters, forward pass with taps,
//! hand-written reverse mode, and ADAM training.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Bandwidth, SphericalGrid};
use crate::harmonics::HarmonicTable;
use crate::mesh::{bounding_sphere, mesh_to_sphere_with_center, SphericalRepresentation, TriangleMesh};
use crate::rotation::{rotate_signal, RotationZYZ};
use crate::sft::{analyze, sft_sepvar, synthesize_real, SpectralCoeffs, SphericalSignal};
use crate::spectral::{
    anchor_interpolation, conv_mixed, conv_scale, magl, max_pool_with_argmax, pool_taper, spectral_pool_with,
    uniform_anchor_degrees, weighted_avg_pool, wgap, wgap_row_weights, DescriptorKind, InvariantDescriptor,
    Nonlinearity, ZonalFilterSpec,
};
use crate::synth::LabeledSignal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    /// One learned coefficient per degree.
    Full,
    /// `n` learned anchors, linearly interpolated across degrees.
    Anchored(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    None,
    Sp,
    Wap,
    Max,
}

impl std::str::FromStr for PoolKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PoolKind::None),
            "sp" => Ok(PoolKind::Sp),
            "wap" => Ok(PoolKind::Wap),
            "max" => Ok(PoolKind::Max),
            _ => Err(Error::Config(format!("unknown pooling {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub filter_mode: FilterMode,
    pub pool: PoolKind,
    pub nonlinearity: Nonlinearity,
}

impl LayerConfig {
    pub fn new(in_channels: usize, out_channels: usize, filter_mode: FilterMode, pool: PoolKind) -> Self {
        LayerConfig {
            in_channels,
            out_channels,
            filter_mode,
            pool,
            nonlinearity: Nonlinearity::Relu,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConcatMode {
    /// Normals branch features are appended to the distance branch.
    OneWay,
    /// Each branch receives the other's features.
    TwoWay,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Single,
    /// Input channel 0 feeds the distance branch, channel 1 the normals
    /// branch. Before each 0-based layer index in `concat_at` the branches
    /// exchange features.
    TwoBranch { concat_at: Vec<usize>, mode: ConcatMode },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_bandwidth: Bandwidth,
    pub layers: Vec<LayerConfig>,
    pub head: DescriptorKind,
    pub num_classes: usize,
    #[serde(default)]
    pub architecture: Architecture,
    /// Hann taper on the kept degrees before spectral pooling.
    #[serde(default)]
    pub sp_smoothing: bool,
}

impl NetworkConfig {
    /// Small single-branch classifier used for the toy experiments.
    pub fn toy(bandwidth: Bandwidth, in_channels: usize, num_classes: usize) -> Self {
        let a = FilterMode::Anchored(4);
        NetworkConfig {
            input_bandwidth: bandwidth,
            layers: vec![
                LayerConfig::new(in_channels, 8, a, PoolKind::Sp),
                LayerConfig::new(8, 16, a, PoolKind::Sp),
                LayerConfig::new(16, 16, a, PoolKind::None),
            ],
            head: DescriptorKind::Wgap,
            num_classes,
            architecture: Architecture::Single,
            sp_smoothing: false,
        }
    }

    /// The two-branch classifier: eight layers per branch with
    /// 16,16,32,32,64,64,128,128 channels on `2 × 64²` inputs. Branches
    /// exchange features wherever the channel count grows, and pooling
    /// after every second layer takes the grid from 64² to 8².
    pub fn paper_two_branch(num_classes: usize) -> Self {
        let widths = [16, 16, 32, 32, 64, 64, 128, 128];
        let concat_at = vec![2, 4, 6];
        let layers = widths
            .iter()
            .enumerate()
            .map(|(i, &out)| {
                let prev = if i == 0 { 1 } else { widths[i - 1] };
                let inc = if concat_at.contains(&i) { 2 * prev } else { prev };
                let pool = if i % 2 == 1 && i < 7 { PoolKind::Wap } else { PoolKind::None };
                LayerConfig::new(inc, out, FilterMode::Full, pool)
            })
            .collect();
        NetworkConfig {
            input_bandwidth: Bandwidth::new(32).expect("valid bandwidth"),
            layers,
            head: DescriptorKind::Wgap,
            num_classes,
            architecture: Architecture::TwoBranch {
                concat_at,
                mode: ConcatMode::TwoWay,
            },
            sp_smoothing: false,
        }
    }

    pub fn branch_names(&self) -> Vec<&'static str> {
        match self.architecture {
            Architecture::Single => vec![""],
            Architecture::TwoBranch { .. } => vec!["distance.", "normals."],
        }
    }

    /// Channels the network expects in its input signal.
    pub fn input_channels(&self) -> usize {
        match self.architecture {
            Architecture::Single => self.layers.first().map_or(0, |l| l.in_channels),
            Architecture::TwoBranch { .. } => 2,
        }
    }

    /// Layer `i` as seen by branch `branch` (0 distance, 1 normals). Under a
    /// one-way exchange the normals branch keeps its own width.
    pub fn branch_layer(&self, branch: usize, i: usize) -> LayerConfig {
        let mut l = self.layers[i].clone();
        if branch == 1 && self.concat_before(i) == Some(ConcatMode::OneWay) {
            l.in_channels = self.layers[i - 1].out_channels;
        }
        l
    }

    fn concat_before(&self, layer: usize) -> Option<ConcatMode> {
        match &self.architecture {
            Architecture::TwoBranch { concat_at, mode } if concat_at.contains(&layer) => Some(*mode),
            _ => None,
        }
    }

    /// Bandwidth at which each layer convolves, plus the final bandwidth.
    pub fn layer_bandwidths(&self) -> Result<Vec<Bandwidth>> {
        let mut out = vec![self.input_bandwidth];
        for l in &self.layers {
            let b = *out.last().unwrap();
            out.push(if l.pool == PoolKind::None { b } else { b.halved()? });
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        self.layer_bandwidths()?;
        let two = matches!(self.architecture, Architecture::TwoBranch { .. });
        if two && self.layers[0].in_channels != 1 {
            return Err(Error::Config("two-branch layer 0 must take one channel per branch".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_channels == 0 || l.out_channels == 0 {
                return Err(Error::Config(format!("layer {} has zero channels", i + 1)));
            }
            if let FilterMode::Anchored(n) = l.filter_mode {
                if n < 2 {
                    return Err(Error::Config(format!("layer {} needs at least two anchors", i + 1)));
                }
            }
            if i > 0 {
                let prev = self.layers[i - 1].out_channels;
                let expect = match self.concat_before(i) {
                    Some(_) => 2 * prev,
                    None => prev,
                };
                if l.in_channels != expect {
                    return Err(Error::Config(format!(
                        "layer {} expects {} input channels, previous layer provides {expect}",
                        i + 1,
                        l.in_channels
                    )));
                }
            }
        }
        if let Architecture::TwoBranch { concat_at, .. } = &self.architecture {
            if concat_at.iter().any(|&i| i == 0 || i >= self.layers.len()) {
                return Err(Error::Config("concatenation points must be inner layer indices".into()));
            }
        }
        Ok(())
    }

    /// Length of the descriptor fed to the linear head.
    pub fn descriptor_len(&self) -> Result<usize> {
        let last = self.layers.last().ok_or_else(|| Error::Config("network has no layers".into()))?;
        let per_branch = match self.head {
            DescriptorKind::Wgap => last.out_channels,
            DescriptorKind::Magl => last.out_channels * self.layer_bandwidths()?.last().unwrap().degrees(),
        };
        Ok(per_branch * self.branch_names().len())
    }

    /// Tensor names and shapes, in a fixed order.
    pub fn parameter_shapes(&self) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let bws = self.layer_bandwidths()?;
        let mut out = Vec::new();
        for (bi, prefix) in self.branch_names().into_iter().enumerate() {
            for i in 0..self.layers.len() {
                let l = self.branch_layer(bi, i);
                let k = filter_len(l.filter_mode, bws[i]);
                out.push((format!("{prefix}conv{}.filter", i + 1), vec![l.out_channels, l.in_channels, k]));
                out.push((format!("{prefix}conv{}.bias", i + 1), vec![l.out_channels]));
            }
        }
        let d = self.descriptor_len()?;
        out.push(("head.weight".into(), vec![self.num_classes, d]));
        out.push(("head.bias".into(), vec![self.num_classes]));
        Ok(out)
    }

    pub fn num_parameters(&self) -> Result<usize> {
        Ok(self.parameter_shapes()?.iter().map(|(_, s)| s.iter().product::<usize>()).sum())
    }
}

fn filter_len(mode: FilterMode, b: Bandwidth) -> usize {
    match mode {
        FilterMode::Full => b.degrees(),
        FilterMode::Anchored(n) => uniform_anchor_degrees(b, n).len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }
}

/// Named parameter tensors together with ADAM state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    tensors: BTreeMap<String, Tensor>,
    adam_m: BTreeMap<String, Vec<f64>>,
    adam_v: BTreeMap<String, Vec<f64>>,
    adam_step: u64,
}

impl ParameterStore {
    /// Zero-valued parameters for `cfg`.
    pub fn zeros(cfg: &NetworkConfig) -> Result<Self> {
        let mut store = ParameterStore::default();
        for (name, shape) in cfg.parameter_shapes()? {
            store.insert(name, Tensor::zeros(shape));
        }
        Ok(store)
    }

    /// Random initialization: filter values `g·N(0,1)` in identity units with
    /// He gain `g = sqrt(2 / in_channels)`, zero biases, Glorot-uniform head.
    pub fn init(cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        let mut store = ParameterStore::zeros(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        for (bi, prefix) in cfg.branch_names().into_iter().enumerate() {
            for i in 0..cfg.layers.len() {
                let gain = (2.0 / cfg.branch_layer(bi, i).in_channels as f64).sqrt();
                let t = store.get_mut(&format!("{prefix}conv{}.filter", i + 1)).unwrap();
                t.data.iter_mut().for_each(|v| *v = gain * normal.sample(&mut rng));
            }
        }
        let w = store.get_mut("head.weight").unwrap();
        let limit = (6.0 / (w.shape[0] + w.shape[1]) as f64).sqrt();
        w.data.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
        Ok(store)
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::Config(format!("missing parameter {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    pub fn adam_step(&self) -> u64 {
        self.adam_step
    }

    /// First and second ADAM moments of a tensor, if any update happened.
    pub fn adam_moments(&self, name: &str) -> Option<(&[f64], &[f64])> {
        Some((self.adam_m.get(name)?, self.adam_v.get(name)?))
    }

    pub(crate) fn set_adam_state(&mut self, step: u64, m: BTreeMap<String, Vec<f64>>, v: BTreeMap<String, Vec<f64>>) {
        self.adam_step = step;
        self.adam_m = m;
        self.adam_v = v;
    }

    /// Checks that names and shapes match `cfg`.
    pub fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        for (name, shape) in cfg.parameter_shapes()? {
            let t = self.require(&name)?;
            if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Shape(format!(
                    "parameter {name} has shape {:?}, config needs {shape:?}",
                    t.shape
                )));
            }
        }
        Ok(())
    }

    /// One ADAM update with bias correction.
    pub fn adam_update(&mut self, grads: &Gradients, lr: f64, hp: &AdamParams) {
        self.adam_step += 1;
        let t = self.adam_step as i32;
        let c1 = 1.0 - hp.beta1.powi(t);
        let c2 = 1.0 - hp.beta2.powi(t);
        for (name, g) in &grads.0 {
            let Some(p) = self.tensors.get_mut(name) else { continue };
            let m = self.adam_m.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            let v = self.adam_v.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            for i in 0..g.len() {
                m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
                v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
                p.data[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + hp.epsilon);
            }
        }
    }
}

/// Gradients keyed by parameter name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients(pub BTreeMap<String, Vec<f64>>);

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.0.get(name).map(Vec::as_slice)
    }

    fn add(&mut self, name: &str, g: Vec<f64>) {
        match self.0.get_mut(name) {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => {
                self.0.insert(name.to_string(), g);
            }
        }
    }

    fn merge(mut self, other: Gradients) -> Gradients {
        for (k, v) in other.0 {
            self.add(&k, v);
        }
        self
    }
}

/// A named intermediate feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct Tap {
    pub name: String,
    pub signal: SphericalSignal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub descriptor: InvariantDescriptor,
    /// `input` (per branch), then every block output in branch order.
    pub taps: Vec<Tap>,
}

impl ForwardOutput {
    pub fn tap(&self, name: &str) -> Option<&SphericalSignal> {
        self.taps.iter().find(|t| t.name == name).map(|t| &t.signal)
    }

    pub fn predicted_class(&self) -> usize {
        argmax(&self.logits)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

struct BlockCache {
    spectrum: SpectralCoeffs,
    filters: Vec<f64>,
    pre_activation: SphericalSignal,
    argmax: Option<Vec<usize>>,
}

struct Cache {
    branches: Vec<Vec<BlockCache>>,
    outputs: Vec<SphericalSignal>,
    descriptor: Vec<f64>,
    final_spectra: Vec<Option<SpectralCoeffs>>,
}

/// Degrees carrying one learned value each.
fn filter_degrees(mode: FilterMode, b: Bandwidth) -> Vec<usize> {
    match mode {
        FilterMode::Full => (0..b.degrees()).collect(),
        FilterMode::Anchored(n) => uniform_anchor_degrees(b, n),
    }
}

/// Realized spectra `[pair][ℓ]` from stored values. A stored value `θ` at
/// degree `d` means `ĥ_d = θ / s_d`, so `θ = 1` everywhere is the identity
/// filter; anchored spectra are interpolated linearly in `ĥ`.
fn realize_filters(mode: FilterMode, b: Bandwidth, param: &[f64], pairs: usize) -> Vec<f64> {
    let degrees = filter_degrees(mode, b);
    let k = degrees.len();
    let unit: Vec<f64> = degrees.iter().map(|&d| 1.0 / conv_scale(d)).collect();
    match mode {
        FilterMode::Full => param.iter().enumerate().map(|(i, v)| v * unit[i % k]).collect(),
        FilterMode::Anchored(_) => {
            let nb = b.degrees();
            let interp = anchor_interpolation(nb, &degrees);
            let mut out = vec![0.0; pairs * nb];
            for p in 0..pairs {
                let a = &param[p * k..(p + 1) * k];
                for l in 0..nb {
                    out[p * nb + l] = (0..k).map(|i| interp[l * k + i] * a[i] * unit[i]).sum();
                }
            }
            out
        }
    }
}

/// Stored filter values as standalone zonal filters, laid out `[o][i]`.
pub fn layer_filters(cfg: &NetworkConfig, params: &ParameterStore, prefix: &str, layer: usize) -> Result<Vec<ZonalFilterSpec>> {
    let l = cfg.layers.get(layer).ok_or_else(|| Error::Config(format!("no layer {}", layer + 1)))?;
    let b = cfg.layer_bandwidths()?[layer];
    let param = &params.require(&format!("{prefix}conv{}.filter", layer + 1))?.data;
    let pairs = l.in_channels * l.out_channels;
    let realized = realize_filters(l.filter_mode, b, param, pairs);
    let nb = b.degrees();
    Ok((0..pairs)
        .map(|p| ZonalFilterSpec::Full {
            coeffs: realized[p * nb..(p + 1) * nb].to_vec(),
        })
        .collect())
}

fn block_forward(
    cfg: &NetworkConfig,
    layer: &LayerConfig,
    b: Bandwidth,
    x: SphericalSignal,
    filter: &[f64],
    bias: &[f64],
) -> Result<(SphericalSignal, BlockCache)> {
    if x.channels() != layer.in_channels || x.bandwidth() != b {
        return Err(Error::Shape(format!(
            "block expects {} channels at bandwidth {b}, got {} at {}",
            layer.in_channels,
            x.channels(),
            x.bandwidth()
        )));
    }
    let table = HarmonicTable::shared(b);
    let spectrum = sft_sepvar(&x, &table)?;
    let filters = realize_filters(layer.filter_mode, b, filter, layer.in_channels * layer.out_channels);
    let mut g = conv_mixed(&spectrum, &filters, layer.out_channels)?;
    if layer.pool == PoolKind::Sp {
        g = spectral_pool_with(&g, cfg.sp_smoothing)?;
    }
    let gt = HarmonicTable::shared(g.bandwidth());
    let mut y = SphericalSignal::from_values(
        g.bandwidth(),
        layer.out_channels,
        synthesize_real(g.coeffs(), layer.out_channels, &gt),
    )?;
    for (o, &bo) in bias.iter().enumerate() {
        y.channel_mut(o).iter_mut().for_each(|v| *v += bo);
    }
    let mut argmax = None;
    let y = match layer.pool {
        PoolKind::Wap => weighted_avg_pool(&y)?,
        PoolKind::Max => {
            let (p, idx) = max_pool_with_argmax(&y)?;
            argmax = Some(idx);
            p
        }
        PoolKind::None | PoolKind::Sp => y,
    };
    let z = crate::spectral::pointwise_nonlinearity(&y, layer.nonlinearity);
    Ok((
        z,
        BlockCache {
            spectrum,
            filters,
            pre_activation: y,
            argmax,
        },
    ))
}

fn forward_cached(cfg: &NetworkConfig, params: &ParameterStore, signal: &SphericalSignal) -> Result<(ForwardOutput, Cache)> {
    cfg.validate()?;
    if signal.bandwidth() != cfg.input_bandwidth {
        return Err(Error::BandwidthMismatch {
            expected: cfg.input_bandwidth.get(),
            got: signal.bandwidth().get(),
        });
    }
    if signal.channels() != cfg.input_channels() {
        return Err(Error::Shape(format!(
            "network expects {} input channels, got {}",
            cfg.input_channels(),
            signal.channels()
        )));
    }
    let prefixes = cfg.branch_names();
    let bws = cfg.layer_bandwidths()?;
    let mut current: Vec<SphericalSignal> = if prefixes.len() == 1 {
        vec![signal.clone()]
    } else {
        vec![signal.select_channels(0..1), signal.select_channels(1..2)]
    };
    let mut taps: Vec<Tap> = prefixes
        .iter()
        .zip(&current)
        .map(|(p, s)| Tap {
            name: format!("{p}input"),
            signal: s.clone(),
        })
        .collect();
    let mut caches: Vec<Vec<BlockCache>> = prefixes.iter().map(|_| Vec::new()).collect();
    for i in 0..cfg.layers.len() {
        let inputs = match cfg.concat_before(i) {
            Some(mode) => {
                let (d, n) = (&current[0], &current[1]);
                let d_in = SphericalSignal::concat(&[d, n])?;
                let n_in = match mode {
                    ConcatMode::TwoWay => SphericalSignal::concat(&[n, d])?,
                    ConcatMode::OneWay => n.clone(),
                };
                vec![d_in, n_in]
            }
            None => current,
        };
        let results: Vec<Result<(SphericalSignal, BlockCache)>> = inputs
            .into_par_iter()
            .enumerate()
            .map(|(bi, x)| {
                let p = prefixes[bi];
                let filter = &params.require(&format!("{p}conv{}.filter", i + 1))?.data;
                let bias = &params.require(&format!("{p}conv{}.bias", i + 1))?.data;
                block_forward(cfg, &cfg.branch_layer(bi, i), bws[i], x, filter, bias)
            })
            .collect();
        current = Vec::with_capacity(results.len());
        for (bi, r) in results.into_iter().enumerate() {
            let (z, cache) = r?;
            taps.push(Tap {
                name: format!("{}conv{}", prefixes[bi], i + 1),
                signal: z.clone(),
            });
            caches[bi].push(cache);
            current.push(z);
        }
    }
    let mut descriptor = Vec::new();
    let mut final_spectra = Vec::new();
    for out in &current {
        match cfg.head {
            DescriptorKind::Wgap => {
                descriptor.extend(wgap(out).values);
                final_spectra.push(None);
            }
            DescriptorKind::Magl => {
                let table = HarmonicTable::shared(out.bandwidth());
                let spec = sft_sepvar(out, &table)?;
                descriptor.extend(magl(&spec).values);
                final_spectra.push(Some(spec));
            }
        }
    }
    let w = params.require("head.weight")?;
    let bias = &params.require("head.bias")?.data;
    let d = descriptor.len();
    if w.data.len() != cfg.num_classes * d {
        return Err(Error::Shape(format!("head.weight needs {} entries", cfg.num_classes * d)));
    }
    let logits: Vec<f64> = (0..cfg.num_classes)
        .map(|k| bias[k] + (0..d).map(|i| w.data[k * d + i] * descriptor[i]).sum::<f64>())
        .collect();
    let out = ForwardOutput {
        logits,
        descriptor: InvariantDescriptor {
            kind: cfg.head,
            channels: cfg.layers.last().unwrap().out_channels * prefixes.len(),
            values: descriptor.clone(),
        },
        taps,
    };
    Ok((
        out,
        Cache {
            branches: caches,
            outputs: current,
            descriptor,
            final_spectra,
        },
    ))
}

/// Runs the network on one signal.
pub fn forward(cfg: &NetworkConfig, params: &ParameterStore, signal: &SphericalSignal) -> Result<ForwardOutput> {
    Ok(forward_cached(cfg, params, signal)?.0)
}

/// Sign pattern of every ReLU and the winner of every max-pool window.
/// Finite differences are only meaningful where this stays fixed.
pub fn activation_pattern(cfg: &NetworkConfig, params: &ParameterStore, signal: &SphericalSignal) -> Result<Vec<u64>> {
    let (_, cache) = forward_cached(cfg, params, signal)?;
    let mut out = Vec::new();
    for (branch, _) in cache.branches.iter().zip(cfg.branch_names()) {
        for (c, layer) in branch.iter().zip(&cfg.layers) {
            if layer.nonlinearity == Nonlinearity::Relu {
                out.extend(c.pre_activation.values().iter().map(|&v| (v > 0.0) as u64));
            }
            if let Some(a) = &c.argmax {
                out.extend(a.iter().map(|&i| i as u64));
            }
        }
    }
    Ok(out)
}

/// Softmax cross-entropy of one logit vector; returns (loss, dloss/dlogits).
/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let grad = exps
        .iter()
        .enumerate()
        .map(|(k, e)| e / sum - if k == label { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

fn block_backward(
    cfg: &NetworkConfig,
    layer: &LayerConfig,
    b: Bandwidth,
    cache: &BlockCache,
    grad_out: &SphericalSignal,
    filter_param: &[f64],
) -> Result<(SphericalSignal, Vec<f64>, Vec<f64>)> {
    let cin = layer.in_channels;
    let cout = layer.out_channels;
    // nonlinearity
    let mut gy = grad_out.clone();
    if layer.nonlinearity == Nonlinearity::Relu {
        for (g, &y) in gy.values_mut().iter_mut().zip(cache.pre_activation.values()) {
            if y <= 0.0 {
                *g = 0.0;
            }
        }
    }
    // spatial pooling
    let synth_b = if layer.pool == PoolKind::Sp { b.halved()? } else { b };
    let gy = match layer.pool {
        PoolKind::Wap => {
            let grid = SphericalGrid::new(b);
            let w = grid.area_weights();
            let n = b.grid_size();
            let h = n / 2;
            let mut fine = SphericalSignal::zeros(b, cout);
            for c in 0..cout {
                let src = gy.channel(c);
                let dst = fine.channel_mut(c);
                for i in 0..h {
                    let (w0, w1) = (w[2 * i], w[2 * i + 1]);
                    let total = 2.0 * (w0 + w1);
                    let (a0, a1) = if total > 0.0 { (w0 / total, w1 / total) } else { (0.25, 0.25) };
                    for k in 0..h {
                        let g = src[i * h + k];
                        dst[2 * i * n + 2 * k] = a0 * g;
                        dst[2 * i * n + 2 * k + 1] = a0 * g;
                        dst[(2 * i + 1) * n + 2 * k] = a1 * g;
                        dst[(2 * i + 1) * n + 2 * k + 1] = a1 * g;
                    }
                }
            }
            fine
        }
        PoolKind::Max => {
            let mut fine = SphericalSignal::zeros(b, cout);
            let idx = cache.argmax.as_ref().expect("max pool caches argmax");
            let vals = fine.values_mut();
            for (g, &i) in gy.values().iter().zip(idx) {
                vals[i] += g;
            }
            fine
        }
        PoolKind::None | PoolKind::Sp => gy,
    };
    let per = synth_b.samples();
    let gbias: Vec<f64> = (0..cout).map(|o| gy.values()[o * per..(o + 1) * per].iter().sum()).collect();
    // inverse transform adjoint
    let st = HarmonicTable::shared(synth_b);
    let ones = vec![1.0; synth_b.grid_size()];
    let gg_small = SpectralCoeffs::from_coeffs(synth_b, cout, analyze(gy.values(), cout, &st, &ones), true)?;
    let gg = if layer.pool == PoolKind::Sp {
        let mut g = gg_small.zero_pad(b)?;
        if cfg.sp_smoothing {
            let taper = pool_taper(synth_b.degrees());
            for c in 0..cout {
                for (l, t) in taper.iter().enumerate() {
                    g.degree_block_mut(c, l).iter_mut().for_each(|v| *v *= t);
                }
            }
        }
        g
    } else {
        gg_small
    };
    // convolution
    let nb = b.degrees();
    let scales: Vec<f64> = (0..nb).map(conv_scale).collect();
    let mut gh = vec![0.0; cout * cin * nb];
    let mut gf = SpectralCoeffs::zeros(b, cin);
    for o in 0..cout {
        for i in 0..cin {
            let h = &cache.filters[(o * cin + i) * nb..(o * cin + i + 1) * nb];
            for l in 0..nb {
                let go = gg.degree_block(o, l);
                let fi = cache.spectrum.degree_block(i, l);
                let dot: f64 = go.iter().zip(fi).map(|(g, f)| (g.conj() * f).re).sum();
                gh[(o * cin + i) * nb + l] = scales[l] * dot;
                let k = scales[l] * h[l];
                if k != 0.0 {
                    let go: Vec<Complex64> = go.to_vec();
                    for (d, g) in gf.degree_block_mut(i, l).iter_mut().zip(go) {
                        *d += g * k;
                    }
                }
            }
        }
    }
    let degrees = filter_degrees(layer.filter_mode, b);
    let k = degrees.len();
    let unit: Vec<f64> = degrees.iter().map(|&d| 1.0 / conv_scale(d)).collect();
    let gparam = match layer.filter_mode {
        FilterMode::Full => gh.iter().enumerate().map(|(i, g)| g * unit[i % k]).collect::<Vec<_>>(),
        FilterMode::Anchored(_) => {
            let interp = anchor_interpolation(nb, &degrees);
            let mut out = vec![0.0; cout * cin * k];
            for p in 0..cout * cin {
                for l in 0..nb {
                    for a in 0..k {
                        out[p * k + a] += interp[l * k + a] * unit[a] * gh[p * nb + l];
                    }
                }
            }
            out
        }
    };
    debug_assert_eq!(gparam.len(), filter_param.len());
    // forward transform adjoint
    let table = HarmonicTable::shared(b);
    let w = table.grid().quad_weights();
    let n = b.grid_size();
    let mut gx = synthesize_real(gf.coeffs(), cin, &table);
    for c in 0..cin {
        for j in 0..n {
            gx[c * n * n + j * n..c * n * n + (j + 1) * n].iter_mut().for_each(|v| *v *= w[j]);
        }
    }
    Ok((SphericalSignal::from_values(b, cin, gx)?, gparam, gbias))
}

/// Loss and parameter gradients for one labeled sample.
fn sample_gradients(cfg: &NetworkConfig, params: &ParameterStore, signal: &SphericalSignal, label: usize) -> Result<(f64, usize, Gradients)> {
    if label >= cfg.num_classes {
        return Err(Error::Config(format!("label {label} out of range for {} classes", cfg.num_classes)));
    }
    let (out, cache) = forward_cached(cfg, params, signal)?;
    let (loss, glogits) = softmax_cross_entropy(&out.logits, label);
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {loss}")));
    }
    let mut grads = Gradients::default();
    let d = cache.descriptor.len();
    let w = &params.require("head.weight")?.data;
    let mut gw = vec![0.0; cfg.num_classes * d];
    let mut gd = vec![0.0; d];
    for k in 0..cfg.num_classes {
        for i in 0..d {
            gw[k * d + i] = glogits[k] * cache.descriptor[i];
            gd[i] += w[k * d + i] * glogits[k];
        }
    }
    grads.add("head.weight", gw);
    grads.add("head.bias", glogits.clone());

    let prefixes = cfg.branch_names();
    let bws = cfg.layer_bandwidths()?;
    let per_branch = d / prefixes.len();
    // descriptor adjoint
    let mut g_out: Vec<SphericalSignal> = Vec::new();
    for (bi, out) in cache.outputs.iter().enumerate() {
        let gdb = &gd[bi * per_branch..(bi + 1) * per_branch];
        let b = out.bandwidth();
        let n = b.grid_size();
        let g = match cfg.head {
            DescriptorKind::Wgap => {
                let rw = wgap_row_weights(b);
                let mut v = vec![0.0; out.values().len()];
                for c in 0..out.channels() {
                    for j in 0..n {
                        v[c * n * n + j * n..c * n * n + (j + 1) * n].iter_mut().for_each(|x| *x = gdb[c] * rw[j]);
                    }
                }
                v
            }
            DescriptorKind::Magl => {
                let spec = cache.final_spectra[bi].as_ref().expect("magl caches spectra");
                let nb = b.degrees();
                let mut gs = spec.clone();
                for c in 0..out.channels() {
                    for l in 0..nb {
                        let norm = spec.degree_block(c, l).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                        let k = if norm > 0.0 { gdb[c * nb + l] / norm } else { 0.0 };
                        gs.degree_block_mut(c, l).iter_mut().for_each(|v| *v *= k);
                    }
                }
                let table = HarmonicTable::shared(b);
                let w = table.grid().quad_weights();
                let mut v = synthesize_real(gs.coeffs(), out.channels(), &table);
                for c in 0..out.channels() {
                    for j in 0..n {
                        v[c * n * n + j * n..c * n * n + (j + 1) * n].iter_mut().for_each(|x| *x *= w[j]);
                    }
                }
                v
            }
        };
        g_out.push(SphericalSignal::from_values(b, out.channels(), g)?);
    }
    // blocks, last to first
    for i in (0..cfg.layers.len()).rev() {
        let mut g_in = Vec::with_capacity(prefixes.len());
        for (bi, p) in prefixes.iter().enumerate() {
            let filter = &params.require(&format!("{p}conv{}.filter", i + 1))?.data;
            let layer = cfg.branch_layer(bi, i);
            let (gx, gf, gb) = block_backward(cfg, &layer, bws[i], &cache.branches[bi][i], &g_out[bi], filter)?;
            grads.add(&format!("{p}conv{}.filter", i + 1), gf);
            grads.add(&format!("{p}conv{}.bias", i + 1), gb);
            g_in.push(gx);
        }
        g_out = match cfg.concat_before(i) {
            Some(mode) => {
                let prev = cfg.layers[i - 1].out_channels;
                let gd_in = &g_in[0];
                let gn_in = &g_in[1];
                let mut gd = gd_in.select_channels(0..prev);
                let mut gn = gd_in.select_channels(prev..2 * prev);
                match mode {
                    ConcatMode::TwoWay => {
                        gn.values_mut().iter_mut().zip(gn_in.select_channels(0..prev).values()).for_each(|(a, b)| *a += b);
                        gd.values_mut()
                            .iter_mut()
                            .zip(gn_in.select_channels(prev..2 * prev).values())
                            .for_each(|(a, b)| *a += b);
                    }
                    ConcatMode::OneWay => {
                        gn.values_mut().iter_mut().zip(gn_in.values()).for_each(|(a, b)| *a += b);
                    }
                }
                vec![gd, gn]
            }
            None => g_in,
        };
    }
    Ok((loss, out.predicted_class(), grads))
}

/// Summed loss, number of correct predictions and summed gradients over a batch.
pub fn backward(
    cfg: &NetworkConfig,
    params: &ParameterStore,
    batch: &[(&SphericalSignal, usize)],
) -> Result<(f64, usize, Gradients)> {
    let parts: Vec<Result<(f64, usize, Gradients)>> = batch
        .par_iter()
        .map(|(s, label)| sample_gradients(cfg, params, s, *label))
        .collect();
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grads = Gradients::default();
    for (p, (_, label)) in parts.into_iter().zip(batch) {
        let (l, pred, g) = p?;
        loss += l;
        correct += (pred == *label) as usize;
        grads = grads.merge(g);
    }
    Ok((loss, correct, grads))
}

/// Total softmax cross-entropy over a batch (no gradients).
pub fn batch_loss(cfg: &NetworkConfig, params: &ParameterStore, batch: &[(&SphericalSignal, usize)]) -> Result<f64> {
    batch
        .iter()
        .map(|(s, label)| Ok(softmax_cross_entropy(&forward(cfg, params, s)?.logits, *label).0))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RotationAugment {
    #[default]
    None,
    /// Random rotation about the z axis.
    Z,
    /// Uniformly random rotation.
    So3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AugmentOptions {
    pub rotate: RotationAugment,
    /// Projection-center offset as a fraction of the bounding radius (meshes only).
    #[serde(default)]
    pub center_jitter: f64,
}

fn draw_rotation(kind: RotationAugment, rng: &mut impl Rng) -> Option<RotationZYZ> {
    match kind {
        RotationAugment::None => None,
        RotationAugment::Z => Some(RotationZYZ::about_z(rng.gen_range(0.0..std::f64::consts::TAU))),
        RotationAugment::So3 => Some(RotationZYZ::random(rng)),
    }
}

/// Rotates a signal (through its spectrum) according to `opts`.
pub fn augment_signal(signal: &SphericalSignal, opts: &AugmentOptions, rng: &mut impl Rng) -> Result<SphericalSignal> {
    match draw_rotation(opts.rotate, rng) {
        None => Ok(signal.clone()),
        Some(r) => rotate_signal(signal, &r, &HarmonicTable::shared(signal.bandwidth())),
    }
}

/// Rotates a mesh, then projects it from a jittered bounding-sphere center.
pub fn augment_mesh(
    mesh: &TriangleMesh,
    bandwidth: Bandwidth,
    opts: &AugmentOptions,
    rng: &mut impl Rng,
) -> Result<SphericalRepresentation> {
    let mesh = match draw_rotation(opts.rotate, rng) {
        None => mesh.clone(),
        Some(r) => mesh.rotated(&r),
    };
    let (mut center, radius) = bounding_sphere(&mesh)?;
    if opts.center_jitter > 0.0 {
        let dir = RotationZYZ::random(rng).apply([0.0, 0.0, 1.0]);
        let len = opts.center_jitter * radius * rng.gen::<f64>();
        for i in 0..3 {
            center[i] += dir[i] * len;
        }
    }
    mesh_to_sphere_with_center(&mesh, bandwidth, center)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// The rate is divided by `lr_divisor` after each of these (1-based) epochs.
    pub lr_drop_epochs: Vec<usize>,
    pub lr_divisor: f64,
    pub adam: AdamParams,
    pub augment: AugmentOptions,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 48,
            batch_size: 16,
            learning_rate: 1e-3,
            lr_drop_epochs: vec![32, 40],
            lr_divisor: 5.0,
            adam: AdamParams::default(),
            augment: AugmentOptions::default(),
            seed: 0,
        }
    }
}

impl TrainSchedule {
    /// Learning rate in effect during `epoch` (1-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let drops = self.lr_drop_epochs.iter().filter(|&&e| epoch > e).count();
        self.learning_rate / self.lr_divisor.powi(drops as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: ParameterStore,
    pub log: Vec<EpochLog>,
}

/// ADAM training with the step schedule in `schedule`. Writes a checkpoint
/// after every epoch when `checkpoint` is set. A non-finite loss aborts.
pub fn train(
    cfg: &NetworkConfig,
    mut params: ParameterStore,
    data: &[LabeledSignal],
    schedule: &TrainSchedule,
    checkpoint: Option<&Path>,
) -> Result<TrainOutcome> {
    params.check(cfg)?;
    if data.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    if schedule.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(schedule.epochs);
    for epoch in 1..=schedule.epochs {
        let lr = schedule.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(schedule.batch_size) {
            let seeds: Vec<u64> = chunk.iter().map(|_| rng.gen()).collect();
            let inputs: Vec<SphericalSignal> = chunk
                .par_iter()
                .zip(&seeds)
                .map(|(&i, &s)| augment_signal(&data[i].signal, &schedule.augment, &mut ChaCha8Rng::seed_from_u64(s)))
                .collect::<Result<_>>()?;
            let batch: Vec<(&SphericalSignal, usize)> = inputs.iter().zip(chunk).map(|(s, &i)| (s, data[i].label)).collect();
            let (loss, c, grads) = backward(cfg, &params, &batch).map_err(|e| match e {
                Error::Numerical(msg) => Error::Numerical(format!("training diverged in epoch {epoch}: {msg}")),
                other => other,
            })?;
            total += loss;
            correct += c;
            params.adam_update(&grads, lr, &schedule.adam);
        }
        let entry = EpochLog {
            epoch,
            learning_rate: lr,
            mean_loss: total / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
        };
        log::info!(
            "epoch {epoch}: loss {:.5} accuracy {:.3} lr {lr:.1e}",
            entry.mean_loss,
            entry.train_accuracy
        );
        log.push(entry);
        if let Some(path) = checkpoint {
            crate::io::write_checkpoint(path, &params)?;
        }
    }
    Ok(TrainOutcome { params, log })
}

/// Fraction of samples whose predicted class matches the label.
pub fn accuracy(cfg: &NetworkConfig, params: &ParameterStore, data: &[LabeledSignal]) -> Result<f64> {
    let hits: Vec<Result<bool>> = data
        .par_iter()
        .map(|s| Ok(forward(cfg, params, &s.signal)?.predicted_class() == s.label))
        .collect();
    let mut n = 0;
    for h in hits {
        n += h? as usize;
    }
    Ok(n as f64 / data.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::rotate_spectrum;
    use crate::sft::{forward as sft_forward, inverse};
    use crate::synth::{random_bandlimited_signal, random_real_coeffs};

    fn bw(b: u32) -> Bandwidth {
        Bandwidth::new(b).unwrap()
    }

    fn tiny(pool: PoolKind, mode: FilterMode, head: DescriptorKind) -> NetworkConfig {
        NetworkConfig {
            input_bandwidth: bw(8),
            layers: vec![LayerConfig::new(2, 3, mode, pool), LayerConfig::new(3, 2, mode, PoolKind::None)],
            head,
            num_classes: 3,
            architecture: Architecture::Single,
            sp_smoothing: false,
        }
    }

    #[test]
    fn presets_validate() {
        NetworkConfig::toy(bw(16), 1, 3).validate().unwrap();
        let p = NetworkConfig::paper_two_branch(40);
        p.validate().unwrap();
        let n = p.num_parameters().unwrap();
        assert!((n as f64 - 0.5e6).abs() <= 0.05e6, "{n}");
        assert_eq!(ParameterStore::zeros(&p).unwrap().num_parameters(), n);
    }

    #[test]
    fn broken_chain_rejected() {
        let mut c = tiny(PoolKind::None, FilterMode::Full, DescriptorKind::Wgap);
        c.layers[1].in_channels = 4;
        assert!(c.validate().is_err());
        let mut c = tiny(PoolKind::Sp, FilterMode::Full, DescriptorKind::Wgap);
        c.input_bandwidth = bw(3);
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_parameters_give_equal_logits() {
        let cfg = tiny(PoolKind::Wap, FilterMode::Anchored(3), DescriptorKind::Wgap);
        let p = ParameterStore::zeros(&cfg).unwrap();
        let out = forward(&cfg, &p, &random_bandlimited_signal(bw(8), 2, 1)).unwrap();
        assert!(out.logits.iter().all(|&l| l == out.logits[0]));
    }

    #[test]
    fn identity_filter_reproduces_input() {
        let b = bw(8);
        let cfg = NetworkConfig {
            input_bandwidth: b,
            layers: vec![LayerConfig {
                in_channels: 1,
                out_channels: 1,
                filter_mode: FilterMode::Full,
                pool: PoolKind::None,
                nonlinearity: Nonlinearity::None,
            }],
            head: DescriptorKind::Wgap,
            num_classes: 2,
            architecture: Architecture::Single,
            sp_smoothing: false,
        };
        let mut p = ParameterStore::zeros(&cfg).unwrap();
        p.get_mut("conv1.filter").unwrap().data = vec![1.0; 8];
        let realized = layer_filters(&cfg, &p, "", 0).unwrap()[0].realize().unwrap();
        for (l, h) in realized.iter().enumerate() {
            assert!((h - 1.0 / (2.0 * std::f64::consts::PI * (4.0 * std::f64::consts::PI / (2 * l + 1) as f64).sqrt())).abs() < 1e-15);
        }
        let x = random_bandlimited_signal(b, 1, 3);
        let out = forward(&cfg, &p, &x).unwrap();
        assert!(out.tap("conv1").unwrap().max_abs_diff(&x) < 1e-6);
    }

    #[test]
    fn linear_spectral_network_is_equivariant() {
        let b = bw(8);
        let mut cfg = tiny(PoolKind::Sp, FilterMode::Anchored(3), DescriptorKind::Wgap);
        cfg.layers.iter_mut().for_each(|l| l.nonlinearity = Nonlinearity::None);
        let p = ParameterStore::init(&cfg, 4).unwrap();
        let c = random_real_coeffs(b, 2, 9);
        let r = RotationZYZ::new(0.3, 2.0, -1.0);
        let a = forward(&cfg, &p, &inverse(&c).unwrap()).unwrap();
        let rot = forward(&cfg, &p, &inverse(&rotate_spectrum(&c, &r)).unwrap()).unwrap();
        for name in ["conv1", "conv2"] {
            let expect = inverse(&rotate_spectrum(&sft_forward(a.tap(name).unwrap()), &r)).unwrap();
            assert!(expect.max_abs_diff(rot.tap(name).unwrap()) < 1e-9);
        }
    }

    #[test]
    fn zero_head_kills_upstream_gradient() {
        let cfg = tiny(PoolKind::Wap, FilterMode::Full, DescriptorKind::Wgap);
        let mut p = ParameterStore::init(&cfg, 1).unwrap();
        p.get_mut("head.weight").unwrap().data.iter_mut().for_each(|v| *v = 0.0);
        let x = random_bandlimited_signal(bw(8), 2, 2);
        let (_, _, g) = backward(&cfg, &p, &[(&x, 1)]).unwrap();
        for name in ["conv1.filter", "conv1.bias", "conv2.filter", "conv2.bias"] {
            assert!(g.get(name).unwrap().iter().all(|&v| v == 0.0), "{name}");
        }
        assert!(g.get("head.weight").unwrap().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn duplicated_sample_doubles_gradient() {
        let cfg = tiny(PoolKind::Max, FilterMode::Anchored(3), DescriptorKind::Magl);
        let p = ParameterStore::init(&cfg, 1).unwrap();
        let x = random_bandlimited_signal(bw(8), 2, 2);
        let (l1, _, g1) = backward(&cfg, &p, &[(&x, 2)]).unwrap();
        let (l2, _, g2) = backward(&cfg, &p, &[(&x, 2), (&x, 2)]).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
        for (k, v) in &g1.0 {
            for (a, b) in v.iter().zip(&g2.0[k]) {
                assert!((2.0 * a - b).abs() <= 1e-12 * a.abs().max(1e-300) + 1e-15);
            }
        }
    }

    fn check_gradients(cfg: &NetworkConfig, seed: u64) {
        let p = ParameterStore::init(cfg, seed).unwrap();
        let x = random_bandlimited_signal(cfg.input_bandwidth, cfg.input_channels(), seed + 1);
        let batch = [(&x, 1usize)];
        let (_, _, g) = backward(cfg, &p, &batch).unwrap();
        let base = activation_pattern(cfg, &p, &x).unwrap();
        for (name, t) in p.tensors() {
            for i in (0..t.data.len()).step_by((t.data.len() / 7).max(1)) {
                let mut eps = 1e-3;
                let fd = loop {
                    let mut plus = p.clone();
                    plus.get_mut(name).unwrap().data[i] += eps;
                    let mut minus = p.clone();
                    minus.get_mut(name).unwrap().data[i] -= eps;
                    let stable = activation_pattern(cfg, &plus, &x).unwrap() == base
                        && activation_pattern(cfg, &minus, &x).unwrap() == base;
                    if stable || eps < 1e-7 {
                        break (batch_loss(cfg, &plus, &batch).unwrap() - batch_loss(cfg, &minus, &batch).unwrap()) / (2.0 * eps);
                    }
                    eps /= 10.0;
                };
                let a = g.get(name).unwrap()[i];
                assert!((a - fd).abs() <= 1e-4 * a.abs().max(fd.abs()) + 1e-8, "{name}[{i}]: {a} vs {fd}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_gradients(&tiny(PoolKind::Sp, FilterMode::Anchored(3), DescriptorKind::Wgap), 1);
        check_gradients(&tiny(PoolKind::Wap, FilterMode::Full, DescriptorKind::Magl), 2);
        check_gradients(&tiny(PoolKind::Max, FilterMode::Full, DescriptorKind::Wgap), 3);
        let mut smooth = tiny(PoolKind::Sp, FilterMode::Full, DescriptorKind::Magl);
        smooth.sp_smoothing = true;
        check_gradients(&smooth, 4);
    }

    #[test]
    fn two_branch_gradients() {
        for mode in [ConcatMode::OneWay, ConcatMode::TwoWay] {
            let cfg = NetworkConfig {
                input_bandwidth: bw(8),
                layers: vec![
                    LayerConfig::new(1, 2, FilterMode::Anchored(3), PoolKind::Wap),
                    LayerConfig::new(4, 2, FilterMode::Full, PoolKind::None),
                ],
                head: DescriptorKind::Wgap,
                num_classes: 2,
                architecture: Architecture::TwoBranch {
                    concat_at: vec![1],
                    mode,
                },
                sp_smoothing: false,
            };
            if mode == ConcatMode::OneWay {
                let shapes = cfg.parameter_shapes().unwrap();
                let shape = |n: &str| shapes.iter().find(|(k, _)| k == n).unwrap().1.clone();
                assert_eq!(shape("distance.conv2.filter")[1], 4);
                assert_eq!(shape("normals.conv2.filter")[1], 2);
            }
            check_gradients(&cfg, 5);
        }
    }

    #[test]
    fn schedule_matches_step_drops() {
        let s = TrainSchedule::default();
        assert_eq!(s.learning_rate_at(1), 1e-3);
        assert_eq!(s.learning_rate_at(32), 1e-3);
        assert!((s.learning_rate_at(33) - 2e-4).abs() < 1e-18);
        assert!((s.learning_rate_at(41) - 4e-5).abs() < 1e-18);
        assert_eq!(s.epochs, 48);
    }

    #[test]
    fn partial_schedule_json_uses_defaults() {
        let s: TrainSchedule =
            serde_json::from_str(r#"{"epochs": 5, "augment": {"rotate": "z"}, "adam": {"beta1": 0.8}}"#).unwrap();
        assert_eq!(s.epochs, 5);
        assert_eq!(s.augment.rotate, RotationAugment::Z);
        assert_eq!(s.augment.center_jitter, 0.0);
        assert_eq!(s.adam.beta1, 0.8);
        assert_eq!(s.adam.beta2, 0.999);
        assert_eq!(s.lr_drop_epochs, vec![32, 40]);
    }

    #[test]
    fn augmentation_identity_and_reproducibility() {
        let x = random_bandlimited_signal(bw(8), 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(augment_signal(&x, &AugmentOptions::default(), &mut rng).unwrap(), x);
        let opts = AugmentOptions {
            rotate: RotationAugment::So3,
            center_jitter: 0.0,
        };
        let a = augment_signal(&x, &opts, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = augment_signal(&x, &opts, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let sphere = TriangleMesh::icosphere(2);
        let plain = augment_mesh(&sphere, bw(8), &AugmentOptions::default(), &mut rng).unwrap();
        let d = plain.signal.channel(0);
        let spread = d.iter().cloned().fold(f64::MIN, f64::max) - d.iter().cloned().fold(f64::MAX, f64::min);
        let jit = augment_mesh(
            &sphere,
            bw(8),
            &AugmentOptions {
                rotate: RotationAugment::None,
                center_jitter: 0.2,
            },
            &mut rng,
        )
        .unwrap();
        let d = jit.signal.channel(0);
        let jspread = d.iter().cloned().fold(f64::MIN, f64::max) - d.iter().cloned().fold(f64::MAX, f64::min);
        assert!(jspread > spread + 0.02, "{spread} {jspread}");
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let cfg = NetworkConfig::toy(bw(8), 1, 2);
        let data: Vec<LabeledSignal> = (0..6)
            .map(|i| LabeledSignal {
                signal: random_bandlimited_signal(bw(8), 1, i),
                label: (i % 2) as usize,
            })
            .collect();
        let sched = TrainSchedule {
            epochs: 3,
            batch_size: 4,
            augment: AugmentOptions {
                rotate: RotationAugment::Z,
                center_jitter: 0.0,
            },
            ..TrainSchedule::default()
        };
        let p = ParameterStore::init(&cfg, 0).unwrap();
        let a = train(&cfg, p.clone(), &data, &sched, None).unwrap();
        let b = train(&cfg, p, &data, &sched, None).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.params, b.params);
        assert_eq!(a.params.adam_step(), 6);
    }
}
