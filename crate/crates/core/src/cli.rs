//! The `sphconv` command line. Diagnostics go to stderr; machine-readable
//! results go to files or to stdout as JSON.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{align_shapes, signal_features, so3_correlate, Search};
use crate::bench::bench_sft;
use crate::equivariance::{format_table, measure, EquivarianceReport, MeasureOptions, Stimuli};
use crate::error::Error;
use crate::grid::Bandwidth;
use crate::harmonics::HarmonicTable;
use crate::io::{load_sph, load_spec, read_checkpoint, save_sph, save_spec, write_checkpoint, Dtype};
use crate::mesh::TriangleMesh;
use crate::network::{
    accuracy, augment_mesh, forward, softmax, train, AugmentOptions, NetworkConfig, ParameterStore,
    RotationAugment, TrainSchedule,
};
use crate::rotation::RotationZYZ;
use crate::sft::{forward as sft_forward, inverse, isft, sft, SftMethod, SphericalSignal};
use crate::spectral::{conv_spectral, max_pool, spectral_pool_with, weighted_avg_pool, ZonalFilterSpec};
use crate::synth::{random_smooth_signal, random_star_mesh, toy_dataset, LabeledSignal, Orientation, ToyConfig, ToyKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sphconv", version, about = "Rotation-equivariant spherical convolution toolkit")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Project a mesh (OFF or OBJ) to a two-channel spherical signal.
    Mesh2sphere(Mesh2SphereArgs),
    /// Forward spherical harmonic transform of an SPH1 signal.
    Sft(SftArgs),
    /// Inverse transform of a SPEC spectrum.
    Isft(IsftArgs),
    /// Convolve every channel of a spectrum with a zonal filter.
    Conv(ConvArgs),
    /// Halve the bandwidth of a signal or spectrum.
    Pool(PoolArgs),
    /// Train a classifier on a dataset directory written by `synth`.
    Train(TrainArgs),
    /// Run a trained classifier on one signal.
    Infer(InferArgs),
    /// Align shape A onto shape B by SO(3) correlation.
    Align(AlignArgs),
    /// Measure per-layer equivariance error.
    EquivReport(EquivArgs),
    /// Time the direct and separation-of-variables transforms.
    BenchSft(BenchArgs),
    /// Generate a toy classification dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DtypeArg {
    F32,
    F64,
}

impl From<DtypeArg> for Dtype {
    fn from(d: DtypeArg) -> Self {
        match d {
            DtypeArg::F32 => Dtype::F32,
            DtypeArg::F64 => Dtype::F64,
        }
    }
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    let b: u32 = s.parse().map_err(|e| format!("{e}"))?;
    Bandwidth::new(b).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct Mesh2SphereArgs {
    mesh: PathBuf,
    #[arg(short = 'b', long, value_parser = parse_bandwidth)]
    bandwidth: Bandwidth,
    #[arg(short, long)]
    output: PathBuf,
    /// Random projection-center offset, as a fraction of the bounding radius.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Seed of a uniformly random rotation applied before projection.
    #[arg(long)]
    rotate: Option<u64>,
    #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
    dtype: DtypeArg,
}

#[derive(Args, Debug)]
struct SftArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Sepvar)]
    method: MethodArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Direct,
    Sepvar,
}

#[derive(Args, Debug)]
struct IsftArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
    dtype: DtypeArg,
}

#[derive(Args, Debug)]
struct ConvArgs {
    input: PathBuf,
    /// JSON zonal filter document.
    #[arg(long)]
    filter: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum PoolArg {
    Sp,
    Wap,
    Max,
}

#[derive(Args, Debug)]
struct PoolArgs {
    /// SPH1 signal or SPEC spectrum; the output has the same type.
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: PoolArg,
    #[arg(short, long)]
    output: PathBuf,
    /// Hann taper before spectral pooling.
    #[arg(long)]
    smooth: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Network configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Dataset directory containing manifest.json.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training schedule (JSON); defaults apply to missing fields.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Rotation augmentation.
    #[arg(long, value_enum)]
    augment: Option<AugmentArg>,
    /// Checkpoint written after every epoch.
    #[arg(short, long, default_value = "model.ckpt")]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AugmentArg {
    None,
    Z,
    So3,
}

#[derive(Args, Debug)]
struct InferArgs {
    input: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    net: PathBuf,
}

#[derive(Args, Debug)]
struct AlignArgs {
    /// Mesh (OFF/OBJ) or SPH1 signal.
    a: PathBuf,
    b: PathBuf,
    /// Bandwidth for mesh projection without a network.
    #[arg(short = 'b', long, value_parser = parse_bandwidth, default_value = "32")]
    bandwidth: Bandwidth,
    /// Tap to correlate when a network is given.
    #[arg(long, default_value = "input")]
    layer: String,
    /// Checkpoint of a trained network (requires --config).
    #[arg(long, requires = "config")]
    net: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground truth `alpha,beta,gamma` in radians; adds angular_error.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, default_value_t = 16)]
    grid: usize,
}

#[derive(Args, Debug)]
struct EquivArgs {
    /// Report configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trained parameters; all rows then share this checkpoint.
    #[arg(long)]
    net: Option<PathBuf>,
    /// Also print the aligned table to stderr.
    #[arg(long)]
    table: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    bandwidths: Vec<u32>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'b', long, value_parser = parse_bandwidth, default_value = "16")]
    bandwidth: Bandwidth,
    /// Apply a random rotation to every sample.
    #[arg(long)]
    arbitrary: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Harmonics,
    Blobs,
}

/// `manifest.json` of a dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: ToyConfig,
    pub samples: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub label: usize,
}

/// Reads every sample listed in `<dir>/manifest.json`.
pub fn load_dataset(dir: &Path) -> crate::Result<Vec<LabeledSignal>> {
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    manifest
        .samples
        .iter()
        .map(|e| {
            Ok(LabeledSignal {
                signal: load_sph(dir.join(&e.file))?,
                label: e.label,
            })
        })
        .collect()
}

/// One row of an `equiv-report` configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivRow {
    pub network: NetworkConfig,
    #[serde(default)]
    pub bandlimit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StimulusKind {
    SmoothSignals,
    StarMeshes,
}

/// `equiv-report` configuration document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivReportConfig {
    pub rows: Vec<EquivRow>,
    pub stimuli: StimulusKind,
    pub samples: usize,
    #[serde(default = "one")]
    pub rotations: usize,
}

fn one() -> usize {
    1
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(Error::Json(e))
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_USAGE;
        }
        // Fails only if the pool already exists (repeated in-process calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn print_json(v: &impl Serialize) -> CliResult {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> std::result::Result<T, Failure> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn magic(path: &Path) -> std::result::Result<[u8; 4], Failure> {
    let bytes = fs::read(path)?;
    bytes
        .get(..4)
        .and_then(|m| m.try_into().ok())
        .ok_or_else(|| Failure::Lib(Error::Format(format!("{} is too short", path.display()))))
}

fn is_mesh(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("off") | Some("obj")
    )
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Mesh2sphere(a) => {
            let mesh = TriangleMesh::load(&a.mesh)?;
            if !(0.0..1.0).contains(&a.jitter) {
                return Err(Failure::Usage("--jitter must lie in [0, 1)".into()));
            }
            let opts = AugmentOptions {
                rotate: if a.rotate.is_some() { RotationAugment::So3 } else { RotationAugment::None },
                center_jitter: a.jitter,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(a.rotate.unwrap_or(0));
            let rep = augment_mesh(&mesh, a.bandwidth, &opts, &mut rng)?;
            save_sph(&a.output, &rep.signal, a.dtype.into())?;
            print_json(&serde_json::json!({
                "output": a.output,
                "bandwidth": a.bandwidth,
                "center": rep.center,
                "radius": rep.radius,
                "faces": mesh.faces().len(),
            }))
        }
        Command::Sft(a) => {
            let s = load_sph(&a.input)?;
            let method = match a.method {
                MethodArg::Direct => SftMethod::Direct,
                MethodArg::Sepvar => SftMethod::Sepvar,
            };
            let c = sft(&s, &HarmonicTable::shared(s.bandwidth()), method)?;
            save_spec(&a.output, &c)?;
            Ok(())
        }
        Command::Isft(a) => {
            let c = load_spec(&a.input)?;
            let s = isft(&c, &HarmonicTable::shared(c.bandwidth()))?;
            save_sph(&a.output, &s, a.dtype.into())?;
            Ok(())
        }
        Command::Conv(a) => {
            let c = load_spec(&a.input)?;
            let filter: ZonalFilterSpec = read_json(&a.filter)?;
            save_spec(&a.output, &conv_spectral(&c, &filter)?)?;
            Ok(())
        }
        Command::Pool(a) => {
            let spectral_input = &magic(&a.input)? == crate::io::SPEC_MAGIC;
            match (a.kind, spectral_input) {
                (PoolArg::Sp, true) => {
                    let c = load_spec(&a.input)?;
                    save_spec(&a.output, &spectral_pool_with(&c, a.smooth)?)?;
                }
                (PoolArg::Sp, false) => {
                    let s = load_sph(&a.input)?;
                    let pooled = inverse(&spectral_pool_with(&sft_forward(&s), a.smooth)?)?;
                    save_sph(&a.output, &pooled, Dtype::F64)?;
                }
                (kind, spectral) => {
                    let s = if spectral { inverse(&load_spec(&a.input)?)? } else { load_sph(&a.input)? };
                    let pooled = if kind == PoolArg::Wap { weighted_avg_pool(&s)? } else { max_pool(&s)? };
                    if spectral {
                        save_spec(&a.output, &sft_forward(&pooled))?;
                    } else {
                        save_sph(&a.output, &pooled, Dtype::F64)?;
                    }
                }
            }
            Ok(())
        }
        Command::Train(a) => {
            let cfg: NetworkConfig = read_json(&a.config)?;
            cfg.validate()?;
            let mut schedule: TrainSchedule = match &a.schedule {
                Some(p) => read_json(p)?,
                None => TrainSchedule::default(),
            };
            schedule.seed = a.seed;
            if let Some(e) = a.epochs {
                schedule.epochs = e;
            }
            if let Some(aug) = a.augment {
                schedule.augment.rotate = match aug {
                    AugmentArg::None => RotationAugment::None,
                    AugmentArg::Z => RotationAugment::Z,
                    AugmentArg::So3 => RotationAugment::So3,
                };
            }
            let data = load_dataset(&a.data)?;
            let params = ParameterStore::init(&cfg, a.seed)?;
            let out = train(&cfg, params, &data, &schedule, Some(&a.output))?;
            write_checkpoint(&a.output, &out.params)?;
            print_json(&serde_json::json!({
                "checkpoint": a.output,
                "parameters": out.params.num_parameters(),
                "epochs": out.log,
                "final_train_accuracy": accuracy(&cfg, &out.params, &data)?,
            }))
        }
        Command::Infer(a) => {
            let cfg: NetworkConfig = read_json(&a.config)?;
            let params = read_checkpoint(&a.net)?;
            params.check(&cfg)?;
            let s = load_sph(&a.input)?;
            let out = forward(&cfg, &params, &s)?;
            let probs = softmax(&out.logits);
            print_json(&serde_json::json!({
                "class": out.predicted_class(),
                "logits": out.logits,
                "probabilities": probs,
                "descriptor": out.descriptor,
            }))
        }
        Command::Align(a) => {
            let net = match (&a.config, &a.net) {
                (Some(c), Some(n)) => {
                    let cfg: NetworkConfig = read_json(c)?;
                    let params = read_checkpoint(n)?;
                    params.check(&cfg)?;
                    Some((cfg, params))
                }
                (Some(_), None) => return Err(Failure::Usage("--config needs --net".into())),
                _ => None,
            };
            let search = Search::Grid {
                n_alpha: a.grid,
                n_beta: a.grid,
                n_gamma: a.grid,
                refine: true,
            };
            let net_ref = net.as_ref().map(|(c, p)| (c, p));
            let result = if is_mesh(&a.a) && is_mesh(&a.b) {
                let (ma, mb) = (TriangleMesh::load(&a.a)?, TriangleMesh::load(&a.b)?);
                align_shapes(&ma, &mb, a.bandwidth, net_ref, &a.layer, &search)?
            } else if !is_mesh(&a.a) && !is_mesh(&a.b) {
                let features = |p: &Path| signal_features(&load_sph(p)?, net_ref, &a.layer);
                so3_correlate(&features(&a.a)?, &features(&a.b)?, &search)?
            } else {
                return Err(Failure::Usage("align needs two meshes or two SPH1 signals".into()));
            };
            let result = match &a.truth {
                Some(t) => {
                    let v: Vec<f64> = t
                        .split(',')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Failure::Usage(format!("--truth: {e}")))?;
                    if v.len() != 3 {
                        return Err(Failure::Usage("--truth needs alpha,beta,gamma".into()));
                    }
                    result.with_ground_truth(&RotationZYZ::new(v[0], v[1], v[2]))
                }
                None => result,
            };
            print_json(&result.to_json())
        }
        Command::EquivReport(a) => {
            let cfg: EquivReportConfig = read_json(&a.config)?;
            let trained = match &a.net {
                Some(p) => Some(read_checkpoint(p)?),
                None => None,
            };
            let reports = equivalence_rows(&cfg, a.seed, trained.as_ref())?;
            if a.table {
                eprint!("{}", format_table(&reports));
            }
            print_json(&reports)
        }
        Command::BenchSft(a) => {
            let bws = a
                .bandwidths
                .iter()
                .map(|&b| Bandwidth::new(b))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            print_json(&bench_sft(&bws, a.reps, a.seed)?)
        }
        Command::Synth(a) => {
            let config = ToyConfig {
                kind: match a.kind {
                    KindArg::Blobs => ToyKind::Blobs,
                    KindArg::Harmonics => ToyKind::Harmonics,
                },
                bandwidth: a.bandwidth,
                classes: a.classes,
                count: a.count,
                seed: a.seed,
                orientation: if a.arbitrary { Orientation::Arbitrary } else { Orientation::Canonical },
            };
            let data = toy_dataset(&config)?;
            fs::create_dir_all(&a.output)?;
            let mut samples = Vec::with_capacity(data.len());
            for (i, s) in data.iter().enumerate() {
                let file = format!("sample_{i:05}.sph");
                save_sph(a.output.join(&file), &s.signal, Dtype::F64)?;
                samples.push(ManifestEntry { file, label: s.label });
            }
            let manifest = DatasetManifest { config, samples };
            fs::write(a.output.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
            Ok(())
        }
    }
}

/// Runs every row of an `equiv-report` configuration on shared stimuli.
pub fn equivalence_rows(
    cfg: &EquivReportConfig,
    seed: u64,
    trained: Option<&ParameterStore>,
) -> crate::Result<Vec<EquivarianceReport>> {
    let mut out = Vec::with_capacity(cfg.rows.len());
    for row in &cfg.rows {
        let b = row.network.input_bandwidth;
        let stimuli = match cfg.stimuli {
            StimulusKind::SmoothSignals => Stimuli::Signals(
                (0..cfg.samples)
                    .map(|i| random_smooth_signal(b, row.network.input_channels(), seed.wrapping_add(i as u64)))
                    .collect::<Vec<SphericalSignal>>(),
            ),
            StimulusKind::StarMeshes => {
                Stimuli::Meshes((0..cfg.samples).map(|i| random_star_mesh(seed.wrapping_add(i as u64))).collect())
            }
        };
        let params = match trained {
            Some(p) => {
                p.check(&row.network)?;
                p.clone()
            }
            None => ParameterStore::init(&row.network, seed)?,
        };
        let opts = MeasureOptions {
            rotations: cfg.rotations,
            seed,
            bandlimit: row.bandlimit,
            trained: trained.is_some(),
        };
        out.push(measure(&row.network, &params, &stimuli, &opts)?);
    }
    Ok(out)
}
