//! `gmcal`: build, inspect, scan and calibrate butterfly networks from the shell.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid configuration
//! (including a missing seed or refusing to overwrite outputs), 3 singular
//! matrix, 4 a calibration did not converge or a sweep saw no interference.

mod config;
mod output;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use greenmachine::calibration::{
    analyze_scan, gbnm_calibrate, scan_error_space, systematic_calibrate, ChannelMapping,
    ConvergenceTrace, GbnmConfig, ScanAnalysis, ScanRequest,
};
use greenmachine::codebook::routed_fraction;
use greenmachine::experiment::{
    assess_codeword, emulate_experiment, ExperimentConfig, ASSESS_REPEATS, REPORTED_FINALS,
};
use greenmachine::export::{write_scan_csv, write_trace_csv};
use greenmachine::network::{random_gap_errors, stage_count};
use greenmachine::{
    build, codeword_distance, extract_codebook, Codebook, Codeword, DeviceModel, Flavor,
    NetworkSpec, NoiseConfig, NoisePreset, PhaseLayer, TransferMatrix,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::{FileConfig, NoiseSetting, Provenance};
use output::Outputs;

/// RNG stream used for randomly drawn network phases.
const PHASE_STREAM: u64 = 7;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{} already exists (use --force to overwrite)", .0.display())]
    Exists(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    NotConverged(String),
    #[error(transparent)]
    Core(#[from] greenmachine::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        use greenmachine::Error as E;
        match self {
            CliError::Config(_) | CliError::Exists(_) => 2,
            CliError::NotConverged(_) => 4,
            CliError::Core(E::Singular { .. }) => 3,
            CliError::Core(E::DegenerateInterference { .. }) => 4,
            CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gmcal", version, about = "Green Machine / Butler matrix toolkit")]
struct Cli {
    /// Seed for every random draw; required by stochastic runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving the output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// JSON file with `seed`, `noise`, `gbnm` and `sweep_resolution` defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a transfer matrix and report its unitarity.
    Build(BuildArgs),
    /// Extract the codebook of a matrix and check its orthogonality.
    Codebook(NetworkArgs),
    /// Scan the objective over two channels.
    Scan(ScanArgs),
    /// Learn codewords from intensity readings of a simulated device.
    Calibrate(CalibrateArgs),
    /// Emulate the 4-port GBNM calibration experiment.
    EmulateExperiment(ExperimentArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct NetworkArgs {
    /// JSON network spec, bare transfer matrix, or `build` output.
    #[arg(long, conflicts_with_all = ["flavor", "n", "random_phases"])]
    matrix: Option<PathBuf>,
    #[arg(long, default_value = "ideal")]
    flavor: Flavor,
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Draw random phase errors (every layer for `custom`, the inter-stage gaps otherwise).
    #[arg(long)]
    random_phases: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
struct BuildArgs {
    #[command(flatten)]
    network: NetworkArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ScanArgs {
    #[command(flatten)]
    network: NetworkArgs,
    /// Output port whose intensity is scanned.
    #[arg(long, default_value_t = 0)]
    target: usize,
    /// The two channels to scan, e.g. `1,2`.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
    channels: Vec<usize>,
    /// Scan range in radians; accepts multiples of pi such as `-4pi,4pi`.
    #[arg(long, value_delimiter = ',', value_parser = parse_angle,
          default_values_t = [-4.0 * PI, 4.0 * PI], allow_hyphen_values = true)]
    range: Vec<f64>,
    #[arg(long, default_value_t = 161)]
    resolution: usize,
    /// Noise preset: none, experiment, drift or harsh.
    #[arg(long)]
    noise: Option<NoisePreset>,
    /// Phases of the channels not being scanned.
    #[arg(long, value_enum, default_value_t = Base::Codeword)]
    base: Base,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Base {
    /// The analytic codeword of the target port.
    Codeword,
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Gbnm,
    Systematic,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CalibrateArgs {
    #[command(flatten)]
    network: NetworkArgs,
    /// Port to learn, or `all`.
    #[arg(long, default_value = "all")]
    channel: String,
    #[arg(long, value_enum, default_value_t = Method::Gbnm)]
    method: Method,
    #[arg(long)]
    noise: Option<NoisePreset>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    n_starts: Option<usize>,
    /// Samples per 2π in each systematic sweep.
    #[arg(long)]
    sweep_resolution: Option<usize>,
    /// JSON channel mapping for the systematic method; derived from the network otherwise.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ExperimentArgs {
    /// Run on a noiseless device.
    #[arg(long)]
    noiseless: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    n_starts: Option<usize>,
}

fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let value = match t.strip_suffix("pi") {
        Some(coef) => {
            let coef = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => c.trim_end_matches('*').parse::<f64>().map_err(|e| e.to_string())?,
            };
            coef * PI
        }
        None => t.parse::<f64>().map_err(|e| e.to_string())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("angle '{s}' is not finite"))
    }
}

/// Flags merged with the optional config file.
struct Context {
    seed: Option<u64>,
    file: FileConfig,
    out_dir: PathBuf,
    force: bool,
}

impl Context {
    fn require_seed(&self, why: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config(format!("--seed is required {why}")))
    }

    fn noise(&self, flag: Option<NoisePreset>) -> NoiseSetting {
        match flag {
            Some(p) => NoiseSetting::Preset(p),
            None => self
                .file
                .noise
                .clone()
                .unwrap_or(NoiseSetting::Preset(NoisePreset::None)),
        }
    }

    fn finish(&self, outputs: Outputs) -> Result<(), CliError> {
        for path in outputs.write(&self.out_dir, self.force)? {
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// A network loaded from disk or constructed from flags.
struct Network {
    spec: Option<NetworkSpec>,
    matrix: TransferMatrix,
}

impl Network {
    fn resolve(args: &NetworkArgs, ctx: &Context) -> Result<Self, CliError> {
        if let Some(path) = &args.matrix {
            return Self::load(path);
        }
        let mut spec = NetworkSpec::for_flavor(args.flavor, args.n)?;
        if args.random_phases {
            let seed = ctx.require_seed("with --random-phases")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(PHASE_STREAM);
            if args.flavor == Flavor::Custom {
                let k = stage_count(args.n)?;
                spec.phase_layers = (0..=k).map(|_| PhaseLayer::random(args.n, &mut rng)).collect();
            } else {
                spec = spec.with_errors(&random_gap_errors(args.n, &mut rng)?, None)?;
            }
        }
        let matrix = build(&spec)?;
        Ok(Self {
            spec: Some(spec),
            matrix,
        })
    }

    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let bad = |e: serde_json::Error| CliError::Config(format!("{}: {e}", path.display()));
        let spec_value = match value.get("spec") {
            Some(s) if !s.is_null() => Some(s.clone()),
            _ if value.get("flavor").is_some() => Some(value.clone()),
            _ => None,
        };
        if let Some(s) = spec_value {
            let spec: NetworkSpec = serde_json::from_value(s).map_err(bad)?;
            let matrix = build(&spec)?;
            return Ok(Self {
                spec: Some(spec),
                matrix,
            });
        }
        let mut m = value.get("matrix").cloned().unwrap_or(value);
        if let serde_json::Value::Array(rows) = &m {
            // A plain array of rows of [re, im] pairs.
            m = serde_json::json!({ "n": rows.len(), "entries": rows });
        }
        let matrix: TransferMatrix = serde_json::from_value(m).map_err(bad)?;
        if !matrix.is_finite() {
            return Err(CliError::Config(format!("{}: non-finite matrix entries", path.display())));
        }
        Ok(Self { spec: None, matrix })
    }

    fn device(&self, noise: NoiseConfig) -> Result<DeviceModel, CliError> {
        Ok(match &self.spec {
            Some(spec) => DeviceModel::from_spec(spec, noise)?,
            None => DeviceModel::new(self.matrix.clone(), noise)?,
        })
    }

    fn lossless(&self) -> bool {
        self.spec.as_ref().map_or(self.matrix.unitarity_residual() < 1e-10, NetworkSpec::is_lossless)
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Other(format!("writing csv: {e}")))?;
    Ok(buf)
}

#[derive(Serialize)]
struct BuildOutput<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a, BuildArgs>,
    spec: Option<&'a NetworkSpec>,
    matrix: &'a TransferMatrix,
    lossless: bool,
    unitarity_residual: f64,
    column_orthogonality_residual: f64,
}

fn cmd_build(args: &BuildArgs, ctx: &Context) -> Result<(), CliError> {
    let net = Network::resolve(&args.network, ctx)?;
    let unitarity = net.matrix.unitarity_residual();
    let orthogonality = net.matrix.column_orthogonality_residual();
    println!("n = {}; max |A†A - I| = {unitarity:.3e}; column orthogonality residual = {orthogonality:.3e}", net.matrix.n());
    let mut out = Outputs::default();
    out.json(
        "matrix.json",
        &BuildOutput {
            provenance: Provenance::new("build", ctx.seed, args),
            spec: net.spec.as_ref(),
            matrix: &net.matrix,
            lossless: net.lossless(),
            unitarity_residual: unitarity,
            column_orthogonality_residual: orthogonality,
        },
    )?;
    ctx.finish(out)
}

#[derive(Serialize)]
struct CodebookOutput<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a, NetworkArgs>,
    codebook: &'a Codebook,
    condition_number: f64,
    routed_fractions: Vec<f64>,
    /// `|⟨cw_i, cw_j⟩| / n`.
    normalized_gram: Vec<Vec<f64>>,
    max_cross_talk: f64,
}

fn cmd_codebook(args: &NetworkArgs, ctx: &Context) -> Result<(), CliError> {
    let net = Network::resolve(args, ctx)?;
    let (_, condition) = net.matrix.inverse_with_condition()?;
    let codebook = extract_codebook(&net.matrix)?;
    let fractions = greenmachine::verify_codebook(&codebook, &net.matrix)?;
    let cross = codebook.max_cross_talk()?;
    let worst = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    println!("n = {}; condition = {condition:.3e}; worst routed fraction = {worst:.12}; max cross-talk = {cross:.3e}", codebook.n);
    let mut out = Outputs::default();
    out.json(
        "codebook.json",
        &CodebookOutput {
            provenance: Provenance::new("codebook", ctx.seed, args),
            normalized_gram: codebook.normalized_gram()?,
            codebook: &codebook,
            condition_number: condition,
            routed_fractions: fractions,
            max_cross_talk: cross,
        },
    )?;
    ctx.finish(out)
}

#[derive(Serialize)]
struct ScanConfig<'a> {
    #[serde(flatten)]
    args: &'a ScanArgs,
    resolved_noise: &'a NoiseConfig,
}

#[derive(Serialize)]
struct ScanOutput<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a, ScanConfig<'a>>,
    base_phases: &'a [f64],
    /// Target codeword phases of the scanned channels, relative to the base.
    expected_minimum: (f64, f64),
    periodic_within_1e_9: Option<bool>,
    analysis: &'a ScanAnalysis,
    minima_per_cell: Vec<usize>,
    global_minimum: (f64, f64, f64),
}

fn cmd_scan(args: &ScanArgs, ctx: &Context) -> Result<(), CliError> {
    let net = Network::resolve(&args.network, ctx)?;
    let noise_setting = ctx.noise(args.noise);
    let seed = if noise_setting.is_stochastic() {
        ctx.require_seed("with a noisy device")?
    } else {
        ctx.seed.unwrap_or(0)
    };
    let noise = noise_setting.resolve(seed)?;
    let n = net.matrix.n();
    let codebook = extract_codebook(&net.matrix)?;
    let target = codebook
        .codeword(args.target)
        .ok_or_else(|| CliError::Config(format!("target port {} out of range", args.target)))?;
    let base = match args.base {
        Base::Codeword => target.phases.clone(),
        Base::Zeros => vec![0.0; n],
    };
    if args.channels.len() != 2 || args.range.len() != 2 {
        return Err(CliError::Config("--channels and --range each take two comma-separated values".into()));
    }
    let (a, b) = (args.channels[0], args.channels[1]);
    let request = ScanRequest {
        target_port: args.target,
        channels: (a, b),
        range: (args.range[0], args.range[1]),
        resolution: args.resolution,
        base: Some(base.clone()),
    };
    let mut dev = net.device(noise.clone())?;
    let grid = scan_error_space(&mut dev, &request)?;
    let analysis = analyze_scan(&grid);
    let global = grid
        .values
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, v)| (i, j, *v)))
        .fold((0, 0, f64::INFINITY), |best, cur| if cur.2 < best.2 { cur } else { best });
    let per_cell: Vec<usize> = analysis.cells.iter().map(|c| c.minima).collect();
    let periodic_ok = analysis.periodicity_residual.map(|r| r < 1e-9);
    println!(
        "{}x{} grid; periodicity residual = {}; strict minima per 2π cell = {:?}",
        grid.resolution(),
        grid.resolution(),
        analysis
            .periodicity_residual
            .map_or("n/a".to_string(), |r| format!("{r:.3e}")),
        per_cell
    );
    let config = ScanConfig {
        args,
        resolved_noise: &noise,
    };
    let provenance = Provenance::new("scan", Some(seed), &config);
    let mut out = Outputs::default();
    out.csv("scan.csv", &provenance, csv_bytes(|w| write_scan_csv(&grid, w))?)?;
    out.json(
        "scan.json",
        &ScanOutput {
            provenance,
            base_phases: &base,
            expected_minimum: (target.phases[a], target.phases[b]),
            periodic_within_1e_9: periodic_ok,
            analysis: &analysis,
            minima_per_cell: per_cell,
            global_minimum: (grid.axis[global.0], grid.axis[global.1], global.2),
        },
    )?;
    ctx.finish(out)
}

#[derive(Serialize)]
struct CalibrateConfig<'a> {
    #[serde(flatten)]
    args: &'a CalibrateArgs,
    resolved_noise: &'a NoiseConfig,
    gbnm: Option<&'a GbnmConfig>,
    sweep_resolution: Option<usize>,
    mapping: Option<&'a ChannelMapping>,
}

#[derive(Serialize)]
struct ChannelReport {
    port: usize,
    converged: bool,
    /// Mean relative intensity of the learned codeword over fresh measurements.
    final_relative: f64,
    best_trace_relative: f64,
    evaluations: usize,
    codeword: Codeword,
    /// Oracle checks against the simulated device.
    routed_fraction: f64,
    distance_to_analytic: f64,
}

#[derive(Serialize)]
struct CalibrateOutput<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a, CalibrateConfig<'a>>,
    channels: &'a [ChannelReport],
    all_converged: bool,
    codebook: Option<&'a Codebook>,
    normalized_gram: Option<Vec<Vec<f64>>>,
}

fn parse_channels(spec: &str, n: usize) -> Result<Vec<usize>, CliError> {
    if spec == "all" {
        return Ok((0..n).collect());
    }
    let k: usize = spec
        .parse()
        .map_err(|_| CliError::Config(format!("--channel expects a port or 'all', got '{spec}'")))?;
    if k >= n {
        return Err(CliError::Config(format!("channel {k} out of range for {n} ports")));
    }
    Ok(vec![k])
}

fn cmd_calibrate(args: &CalibrateArgs, ctx: &Context) -> Result<(), CliError> {
    let net = Network::resolve(&args.network, ctx)?;
    let n = net.matrix.n();
    let channels = parse_channels(&args.channel, n)?;
    let noise_setting = ctx.noise(args.noise);
    let stochastic = args.method == Method::Gbnm || noise_setting.is_stochastic();
    let seed = if stochastic {
        ctx.require_seed("for GBNM or a noisy device")?
    } else {
        ctx.seed.unwrap_or(0)
    };
    let noise = noise_setting.resolve(seed)?;

    let gbnm = (args.method == Method::Gbnm).then(|| {
        let mut cfg = ctx.file.gbnm.clone().unwrap_or_default();
        cfg.seed = seed;
        if let Some(m) = args.max_iters {
            cfg.max_iters_per_start = m;
        }
        if let Some(s) = args.n_starts {
            cfg.n_starts = s;
        }
        cfg
    });
    if let Some(cfg) = &gbnm {
        cfg.validate()?;
    }
    let sweep_resolution = (args.method == Method::Systematic)
        .then(|| args.sweep_resolution.or(ctx.file.sweep_resolution).unwrap_or(32));
    let mapping = match (args.method, &args.mapping) {
        (Method::Gbnm, _) => None,
        (Method::Systematic, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Some(
                serde_json::from_str::<ChannelMapping>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            )
        }
        (Method::Systematic, None) => Some(match &net.spec {
            Some(spec) => ChannelMapping::for_network(spec)?,
            None => ChannelMapping::butterfly(n)?,
        }),
    };

    let mut dev = net.device(noise.clone())?;
    let truth = dev.matrix().clone();
    let analytic = extract_codebook(&truth)?;
    let mut reports = Vec::with_capacity(channels.len());
    let mut traces: Vec<ConvergenceTrace> = Vec::with_capacity(channels.len());
    for &k in &channels {
        let (codeword, trace, evaluations, converged) = match (&gbnm, &mapping) {
            (Some(cfg), _) => {
                let o = gbnm_calibrate(&mut dev, k, cfg)?;
                (o.codeword, o.trace, o.evaluations, o.converged)
            }
            (None, Some(m)) => {
                let (cw, trace) = systematic_calibrate(&mut dev, k, m, sweep_resolution.unwrap_or(32))?;
                let last = trace.rows.last().map_or(0.0, |r| r.relative_target);
                let evals = trace.len();
                (cw, trace, evals, last >= GbnmConfig::default().convergence_threshold)
            }
            (None, None) => unreachable!("systematic runs always carry a mapping"),
        };
        let final_relative = assess_codeword(&mut dev, &codeword, ASSESS_REPEATS)?;
        let reference = analytic.codeword(k).expect("analytic codebook covers every port");
        reports.push(ChannelReport {
            port: k,
            converged,
            final_relative,
            best_trace_relative: trace.best_relative,
            evaluations,
            routed_fraction: routed_fraction(&truth, &codeword)?,
            distance_to_analytic: codeword_distance(&codeword, reference),
            codeword,
        });
        traces.push(trace);
    }
    for r in &reports {
        println!(
            "port {}: final relative {:.4} (best seen {:.4}), {} evaluations, {}",
            r.port,
            r.final_relative,
            r.best_trace_relative,
            r.evaluations,
            if r.converged { "converged" } else { "NOT converged" }
        );
    }
    let all_converged = reports.iter().all(|r| r.converged);
    let codebook = (channels.len() == n).then(|| Codebook {
        n,
        output_scale: (n as f64).sqrt(),
        codewords: reports.iter().map(|r| r.codeword.clone()).collect(),
        amplitude_deviation: Vec::new(),
    });
    let gram = codebook.as_ref().map(Codebook::normalized_gram).transpose()?;

    let config = CalibrateConfig {
        args,
        resolved_noise: &noise,
        gbnm: gbnm.as_ref(),
        sweep_resolution,
        mapping: mapping.as_ref(),
    };
    let provenance = Provenance::new("calibrate", Some(seed), &config);
    let mut out = Outputs::default();
    for trace in &traces {
        out.csv(
            &format!("trace_port{}.csv", trace.target_port),
            &provenance,
            csv_bytes(|w| write_trace_csv(trace, w))?,
        )?;
    }
    out.json(
        "calibration.json",
        &CalibrateOutput {
            provenance,
            channels: &reports,
            all_converged,
            codebook: codebook.as_ref(),
            normalized_gram: gram,
        },
    )?;
    ctx.finish(out)?;
    if all_converged {
        Ok(())
    } else {
        Err(CliError::NotConverged("at least one channel did not converge".into()))
    }
}

#[derive(Serialize)]
struct ComparisonRow {
    channel: usize,
    final_relative: f64,
    reported: f64,
    difference_pp: f64,
}

#[derive(Serialize)]
struct ExperimentOutput<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a, ExperimentConfig>,
    report: &'a greenmachine::experiment::ExperimentReport,
    comparison: Vec<ComparisonRow>,
    all_within_0_90_1_00: bool,
    all_converged: bool,
}

fn cmd_experiment(args: &ExperimentArgs, ctx: &Context) -> Result<(), CliError> {
    let seed = ctx.require_seed("for emulate-experiment")?;
    let mut gbnm = ctx.file.gbnm.clone().unwrap_or_default();
    if let Some(m) = args.max_iters {
        gbnm.max_iters_per_start = m;
    }
    if let Some(s) = args.n_starts {
        gbnm.n_starts = s;
    }
    gbnm.seed = seed;
    let cfg = ExperimentConfig {
        seed,
        n: 4,
        preset: if args.noiseless {
            NoisePreset::None
        } else {
            NoisePreset::Experiment
        },
        gbnm,
    };
    let report = emulate_experiment(&cfg).map_err(|e| match e {
        greenmachine::Error::InvalidConfig(m) => CliError::Config(m),
        other => other.into(),
    })?;
    let comparison: Vec<ComparisonRow> = report
        .channels
        .iter()
        .zip(REPORTED_FINALS)
        .map(|(c, reported)| ComparisonRow {
            channel: c.port + 1,
            final_relative: c.final_relative,
            reported,
            difference_pp: 100.0 * (c.final_relative - reported),
        })
        .collect();
    println!("visibility {:.4}", report.visibility);
    println!("channel  final    reported  diff(pp)  converged");
    for (row, c) in comparison.iter().zip(&report.channels) {
        println!(
            "{:>7}  {:.4}   {:.3}     {:+6.2}    {}",
            row.channel, row.final_relative, row.reported, row.difference_pp, c.converged
        );
    }
    let in_band = report
        .finals()
        .iter()
        .all(|f| (0.90..=1.00).contains(f));
    let all_converged = report.all_converged();

    let provenance = Provenance::new("emulate-experiment", Some(seed), &cfg);
    let mut summary = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(["channel", "final_relative", "best_trace_relative", "reported", "difference_pp", "converged", "evaluations"])?;
        for (row, c) in comparison.iter().zip(&report.channels) {
            w.write_record([
                row.channel.to_string(),
                row.final_relative.to_string(),
                c.best_trace_relative.to_string(),
                row.reported.to_string(),
                row.difference_pp.to_string(),
                c.converged.to_string(),
                c.evaluations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut summary).map_err(|e| CliError::Other(format!("writing csv: {e}")))?;
    let body = summary
        .into_inner()
        .map_err(|e| CliError::Other(format!("writing csv: {e}")))?;
    let mut out = Outputs::default();
    out.csv("experiment.csv", &provenance, body)?;
    out.json(
        "experiment.json",
        &ExperimentOutput {
            provenance,
            report: &report,
            comparison,
            all_within_0_90_1_00: in_band,
            all_converged,
        },
    )?;
    ctx.finish(out)?;
    if all_converged {
        Ok(())
    } else {
        Err(CliError::NotConverged("at least one channel did not converge".into()))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(file.seed),
        file,
        out_dir: cli.out_dir,
        force: cli.force,
    };
    match &cli.command {
        Command::Build(a) => cmd_build(a, &ctx),
        Command::Codebook(a) => cmd_codebook(a, &ctx),
        Command::Scan(a) => cmd_scan(a, &ctx),
        Command::Calibrate(a) => cmd_calibrate(a, &ctx),
        Command::EmulateExperiment(a) => cmd_experiment(a, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gmcal: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
