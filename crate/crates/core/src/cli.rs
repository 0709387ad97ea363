//! Command-line surface: every command writes a JSON run manifest next to its
//! outputs, and `replay` re-executes a manifest.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{digits, edge_coded, unstructured, DigitStyle};
use crate::error::{domain, Error, Result};
use crate::fit::{achieved_rate_report, fit_params, sweep, write_report_csv, FitConfig, SweepConfig};
use crate::format::{load_stream, save_stream};
use crate::image::{write_pgm, Image};
use crate::mask::SampleMask;
use crate::pipeline::{budget, Fill, Sampler};
use crate::sauce::{apply_mask, heatmap, SamplerParams, Selection, VarianceMode};
use crate::scanner::{scan, Flyback, ScanConfig};
use crate::taskproxy::{LabeledDataset, TrainConfig};
use crate::twostage::{two_stage_sample, TwoStageConfig};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const SEED_ENV: &str = "SAUCE_SEED";

/// Samplerates swept when `--rates` is not given.
pub const DEFAULT_RATES: [f64; 9] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.5, 0.75, 1.0];
/// Targets reported when `--rates` is not given.
pub const DEFAULT_REPORT_RATES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Parser)]
#[command(name = "sauce", version, about = "Scanning single-pixel camera sampling experiments")]
pub struct Cli {
    /// Seed for every random choice; falls back to $SAUCE_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan an image into a sample-stream file.
    Scan(ScanArgs),
    /// Select samples from a stream and write mask, heatmap and reconstruction.
    Sample(SampleArgs),
    /// Fit sampler weights on a dataset directory.
    Fit(FitArgs),
    /// Accuracy against samplerate for several samplers.
    Sweep(SweepArgs),
    /// Achieved samplerate with and without rate normalization.
    Report(ReportArgs),
    /// Write a synthetic dataset directory.
    Corpus(CorpusArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Footprint side in pixels.
    #[arg(long, default_value_t = 1)]
    pub footprint: usize,
    /// Samplerate as a multiple of the no-overlap bound.
    #[arg(long, default_value_t = 1.0)]
    pub sr_mult: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    pub stream: PathBuf,
    /// sauce, uniform, random, lc, mar[:rho=R] or twostage[:f=F].
    #[arg(long)]
    pub sampler: String,
    #[arg(long)]
    pub rate: f64,
    /// SamplerParams JSON; defaults to alpha = beta = 1, gamma = 0.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// topk or bernoulli.
    #[arg(long, default_value = "topk")]
    pub selection: String,
    /// twopass or streaming.
    #[arg(long, default_value = "twopass")]
    pub variance: String,
    /// euclidean or clamp.
    #[arg(long, default_value = "euclidean")]
    pub flyback: String,
    /// nearest or zero.
    #[arg(long, default_value = "nearest")]
    pub fill: String,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fit log CSV; defaults to `<out stem>_log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 40)]
    pub iterations: usize,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value = "topk")]
    pub selection: String,
    #[arg(long, default_value = "nearest")]
    pub fill: String,
    #[arg(long, default_value_t = 0.05)]
    pub rate_min: f64,
    #[arg(long, default_value_t = 0.95)]
    pub rate_max: f64,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "sauce,uniform,random,lc,mar")]
    pub samplers: Vec<String>,
    #[arg(long, default_value = "nearest")]
    pub fill: String,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    pub out_dir: PathBuf,
    /// digits, edge or unstructured.
    #[arg(long, default_value = "digits")]
    pub kind: String,
    #[arg(long, default_value_t = 20)]
    pub per_class: usize,
    /// When set, also writes a `test/` split with this many images per class.
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long, default_value_t = 16)]
    pub size: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Everything needed to re-run a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Arguments with the resolved seed made explicit.
    pub argv: Vec<String>,
    /// Directory relative paths in `argv` resolve against.
    pub cwd: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub flags: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = serde_json::from_slice(&fs::read(path)?)?;
        if m.schema_version != MANIFEST_SCHEMA {
            return Err(Error::Format(format!(
                "manifest schema {} not supported (expected {MANIFEST_SCHEMA})",
                m.schema_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Process exit code for an error: 3 for numeric failures, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| domain(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn parse_selection(s: &str) -> Result<Selection> {
    match s {
        "topk" => Ok(Selection::TopK),
        "bernoulli" => Ok(Selection::Bernoulli),
        _ => Err(domain(format!("unknown selection `{s}`"))),
    }
}

fn parse_variance(s: &str) -> Result<VarianceMode> {
    match s {
        "twopass" => Ok(VarianceMode::TwoPass),
        "streaming" => Ok(VarianceMode::Streaming),
        _ => Err(domain(format!("unknown variance mode `{s}`"))),
    }
}

fn parse_flyback(s: &str) -> Result<Flyback> {
    match s {
        "euclidean" => Ok(Flyback::Euclidean),
        "clamp" => Ok(Flyback::Clamp),
        _ => Err(domain(format!("unknown flyback `{s}`"))),
    }
}

fn load_params(path: &Option<PathBuf>) -> Result<SamplerParams> {
    match path {
        Some(p) => SamplerParams::load(p),
        None => Ok(SamplerParams::default()),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    ensure_parent(path)?;
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Train/test split of a dataset directory: `train/` and `test/` when both
/// exist, otherwise an 80/20 split of the class directories.
pub fn load_split(root: &Path, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train_dir, test_dir) = (root.join("train"), root.join("test"));
    if train_dir.is_dir() && test_dir.is_dir() {
        let (train, train_classes) = LabeledDataset::load_dir(&train_dir, seed)?;
        let (test, test_classes) = LabeledDataset::load_dir(&test_dir, seed)?;
        if train_classes != test_classes {
            return Err(domain("train/ and test/ have different class directories"));
        }
        return Ok((train, test));
    }
    let (all, _) = LabeledDataset::load_dir(root, seed)?;
    Ok(all.split(0.8, seed))
}

fn load_all(root: &Path, seed: u64) -> Result<LabeledDataset> {
    let (train, test) = load_split(root, seed)?;
    let mut items = train.items().to_vec();
    items.extend_from_slice(test.items());
    LabeledDataset::new(items, train.class_count())
}

struct Outcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    /// Where the manifest goes.
    manifest: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let cli = Cli::try_parse_from(&argv).map_err(|e| domain(e.to_string()))?;
    run(cli, argv)
}

/// Runs a parsed command; `argv` is recorded in the manifest.
pub fn run(cli: Cli, mut argv: Vec<String>) -> Result<()> {
    if let Command::Replay(args) = &cli.command {
        return replay(&args.manifest);
    }
    let seed = resolve_seed(cli.seed)?;
    if cli.seed.is_none() {
        argv.extend(["--seed".to_string(), seed.to_string()]);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| domain(format!("cannot start {} workers: {e}", cli.workers)))?;
    let (name, flags, outcome) = pool.install(|| -> Result<_> {
        Ok(match &cli.command {
            Command::Scan(a) => ("scan", serde_json::to_value(a)?, cmd_scan(a)?),
            Command::Sample(a) => ("sample", serde_json::to_value(a)?, cmd_sample(a, seed)?),
            Command::Fit(a) => ("fit", serde_json::to_value(a)?, cmd_fit(a, seed)?),
            Command::Sweep(a) => ("sweep", serde_json::to_value(a)?, cmd_sweep(a, seed)?),
            Command::Report(a) => ("report", serde_json::to_value(a)?, cmd_report(a, seed)?),
            Command::Corpus(a) => ("corpus", serde_json::to_value(a)?, cmd_corpus(a, seed)?),
            Command::Replay(_) => unreachable!("handled above"),
        })
    })?;
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: name.to_string(),
        argv,
        cwd: std::env::current_dir()?,
        seed,
        workers: cli.workers,
        flags,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
    };
    manifest.save(&outcome.manifest)
}

/// Re-runs the command recorded in a manifest from its working directory.
pub fn replay(path: &Path) -> Result<()> {
    let manifest = RunManifest::load(path)?;
    if manifest.argv.iter().skip(1).any(|a| a == "replay") {
        return Err(domain("a manifest cannot replay another replay"));
    }
    let previous = std::env::current_dir()?;
    std::env::set_current_dir(&manifest.cwd)?;
    let result = Cli::try_parse_from(&manifest.argv)
        .map_err(|e| domain(e.to_string()))
        .and_then(|cli| run(cli, manifest.argv.clone()));
    std::env::set_current_dir(previous)?;
    result
}

fn cmd_scan(a: &ScanArgs) -> Result<Outcome> {
    let image = Image::open(&a.image)?;
    if a.footprint == 0 {
        return Err(domain("footprint must be at least one pixel"));
    }
    let config = ScanConfig::with_footprint(image.width(), image.height(), a.footprint).oversampled(a.sr_mult);
    let stream = scan(&image, &config)?;
    ensure_parent(&a.out)?;
    save_stream(&stream, &a.out)?;
    println!("samples {} grid {}x{}", stream.len(), stream.grid_width(), stream.grid_height());
    Ok(Outcome {
        inputs: vec![a.image.clone()],
        outputs: vec![a.out.clone()],
        manifest: manifest_path(&a.out),
    })
}

fn cmd_sample(a: &SampleArgs, seed: u64) -> Result<Outcome> {
    let stream = load_stream(&a.stream)?.with_flyback(parse_flyback(&a.flyback)?);
    let params = load_params(&a.params)?;
    let selection = parse_selection(&a.selection)?;
    let variance = parse_variance(&a.variance)?;
    let fill: Fill = a.fill.parse()?;
    let total = stream.len();
    let n = budget(a.rate, total)?;
    let sampler = match Sampler::parse(&a.sampler, params)? {
        Sampler::Sauce { params, .. } => Sampler::Sauce {
            params,
            variance,
            selection,
        },
        other => other,
    };
    fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;
    let mut outputs = Vec::new();

    let (mask, achieved, sparse) = if let Sampler::TwoStage {
        factor,
        params,
        reuse_first_pass,
    } = &sampler
    {
        let image = stream.to_image();
        let low = crate::twostage::low_res_count(image.width(), image.height(), *factor);
        let config = TwoStageConfig {
            factor: *factor,
            second_pass_budget: if n == total { total } else { n.saturating_sub(low) },
            params: *params,
            reuse_first_pass: *reuse_first_pass,
        };
        let out = two_stage_sample(&image, &config)?;
        out.low_heatmap.write_pgm(dir.join("first_pass_heatmap.pgm"))?;
        out.upsampled.write_pgm(dir.join("heatmap.pgm"))?;
        let first = SampleMask::full(out.low_stream.len());
        first.write_to(create(&dir.join("first_pass_mask.bin"))?)?;
        outputs.extend(["first_pass_heatmap.pgm", "heatmap.pgm", "first_pass_mask.bin"].map(|f| dir.join(f)));
        (out.mask, out.effective_rate, out.sparse)
    } else {
        if let Sampler::Sauce { params, variance, .. } = &sampler {
            heatmap(&stream, params, *variance)?.write_pgm(dir.join("heatmap.pgm"))?;
            outputs.push(dir.join("heatmap.pgm"));
        }
        let mask = sampler.mask(&stream, n, seed)?;
        let sparse = apply_mask(&stream, &mask)?;
        (mask.clone(), mask.rate(), sparse)
    };

    let mut w = create(&dir.join("mask.bin"))?;
    mask.write_to(&mut w)?;
    w.flush()?;
    let recon = if sparse.is_empty() {
        crate::reconstruct::zero_fill(&sparse)?
    } else {
        fill.apply(&sparse)?
    };
    let recon_path = dir.join("reconstruction.pgm");
    write_pgm(&recon_path, recon.width(), recon.height(), &recon.luminance())?;
    let mut summary = create(&dir.join("summary.csv"))?;
    writeln!(summary, "sampler,rate,kept,total,achieved_rate")?;
    writeln!(
        summary,
        "{},{:.6},{},{},{:.6}",
        sampler.name(),
        a.rate,
        mask.kept(),
        total,
        achieved
    )?;
    summary.flush()?;
    println!("{} kept {} of {} (achieved rate {achieved:.6})", sampler.name(), mask.kept(), total);
    outputs.extend([dir.join("mask.bin"), recon_path, dir.join("summary.csv")]);
    let mut inputs = vec![a.stream.clone()];
    inputs.extend(a.params.clone());
    Ok(Outcome {
        inputs,
        outputs,
        manifest: dir.join("manifest.json"),
    })
}

fn cmd_fit(a: &FitArgs, seed: u64) -> Result<Outcome> {
    let (train, _) = load_split(&a.dataset, seed)?;
    let config = FitConfig {
        rate_range: (a.rate_min, a.rate_max),
        lambda_drop: a.lambda,
        iterations: a.iterations,
        restarts: a.restarts,
        seed,
        selection: parse_selection(&a.selection)?,
        fill: a.fill.parse()?,
        train: TrainConfig {
            epochs: a.epochs,
            seed,
            ..TrainConfig::default()
        },
        ..FitConfig::default()
    };
    let result = fit_params(&train, &config)?;
    ensure_parent(&a.out)?;
    result.params.save(&a.out)?;
    let log = a.log.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        a.out.with_file_name(format!("{stem}_log.csv"))
    });
    let mut w = create(&log)?;
    result.write_log(&mut w)?;
    w.flush()?;
    println!(
        "alpha {:.6} beta {:.6} gamma {:.6} validation {:.6} (init {:.6})",
        result.params.alpha,
        result.params.beta,
        result.params.gamma,
        result.validation_objective,
        result.init_validation_objective
    );
    Ok(Outcome {
        inputs: vec![a.dataset.clone()],
        outputs: vec![a.out.clone(), log],
        manifest: manifest_path(&a.out),
    })
}

fn cmd_sweep(a: &SweepArgs, seed: u64) -> Result<Outcome> {
    let (train, test) = load_split(&a.dataset, seed)?;
    let params = load_params(&a.params)?;
    let samplers = a
        .samplers
        .iter()
        .map(|s| Sampler::parse(s.trim(), params))
        .collect::<Result<Vec<_>>>()?;
    let rates = a.rates.clone().unwrap_or_else(|| DEFAULT_RATES.to_vec());
    let config = SweepConfig {
        fill: a.fill.parse()?,
        train: TrainConfig {
            epochs: a.epochs,
            seed,
            ..TrainConfig::default()
        },
        seed,
    };
    let curve = sweep(&train, &test, &rates, &samplers, &config)?;
    let mut w = create(&a.out)?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    let mut inputs = vec![a.dataset.clone()];
    inputs.extend(a.params.clone());
    Ok(Outcome {
        inputs,
        outputs: vec![a.out.clone()],
        manifest: manifest_path(&a.out),
    })
}

fn cmd_report(a: &ReportArgs, seed: u64) -> Result<Outcome> {
    let data = load_all(&a.dataset, seed)?;
    let params = load_params(&a.params)?;
    let rates = a.rates.clone().unwrap_or_else(|| DEFAULT_REPORT_RATES.to_vec());
    let report = achieved_rate_report(&data, &params, &rates, seed)?;
    let mut w = create(&a.out)?;
    write_report_csv(&report, &mut w)?;
    w.flush()?;
    let mut inputs = vec![a.dataset.clone()];
    inputs.extend(a.params.clone());
    Ok(Outcome {
        inputs,
        outputs: vec![a.out.clone()],
        manifest: manifest_path(&a.out),
    })
}

fn cmd_corpus(a: &CorpusArgs, seed: u64) -> Result<Outcome> {
    if a.per_class == 0 {
        return Err(domain("per-class count must be positive"));
    }
    let make = |per_class: usize, seed: u64| -> Result<LabeledDataset> {
        match a.kind.as_str() {
            "digits" => Ok(digits(
                per_class,
                &DigitStyle {
                    size: a.size,
                    ..DigitStyle::default()
                },
                seed,
            )),
            "edge" => Ok(edge_coded(per_class, a.size, seed)),
            "unstructured" => Ok(unstructured(per_class, 2, a.size, seed)),
            other => Err(domain(format!("unknown corpus kind `{other}`"))),
        }
    };
    if a.size < 4 {
        return Err(domain("corpus images need a size of at least 4"));
    }
    let mut outputs = Vec::new();
    match a.test_per_class {
        Some(test_per_class) => {
            make(a.per_class, seed)?.save_dir(a.out_dir.join("train"))?;
            make(test_per_class, seed ^ 0x7E57)?.save_dir(a.out_dir.join("test"))?;
            outputs.extend([a.out_dir.join("train"), a.out_dir.join("test")]);
        }
        None => {
            make(a.per_class, seed)?.save_dir(&a.out_dir)?;
            outputs.push(a.out_dir.clone());
        }
    }
    Ok(Outcome {
        inputs: Vec::new(),
        outputs,
        manifest: a.out_dir.join("manifest.json"),
    })
}
