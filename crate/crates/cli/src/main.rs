//! `mlspi` command-line pipeline: train, realize, evaluate, classify, sweep.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlspi::dataset::{self, Dataset};
use mlspi::evaluation::{self, Model};
use mlspi::optics::{self, RealizedPatternSet};
use mlspi::{model_io, perceptron, ClassifierEnsemble, Error};

use config::{DataKind, NoiseKindName, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    /// 1 usage/config, 2 data, 3 numeric.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Run(Error::Argument(_)) => 1,
            CliError::Run(Error::Divergence { .. } | Error::Degenerate(_)) => 3,
            CliError::Run(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mlspi", version, about = "Single-pixel imaging classifiers")]
struct Cli {
    /// Global seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    #[arg(long, value_enum)]
    data_kind: Option<DataKind>,
    #[arg(long)]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test_images: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    #[arg(long)]
    train_dir: Option<PathBuf>,
    #[arg(long)]
    test_dir: Option<PathBuf>,
    /// Resize target for image directories, `HxW`.
    #[arg(long, value_parser = parse_size)]
    size: Option<(usize, usize)>,
    #[arg(long)]
    train_count: Option<usize>,
    #[arg(long)]
    test_count: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    init_range: Option<f64>,
    #[arg(long)]
    no_shuffle: bool,
    /// Enable random shift/rotation/scale of training images.
    #[arg(long)]
    augment: bool,
}

#[derive(Args, Debug, Default)]
struct NoiseArgs {
    #[arg(long, value_enum)]
    noise: Option<NoiseKindName>,
    /// Gaussian noise level as a fraction of full scale.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    photon_scale: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct RealizeArgs {
    /// Percentile clamp `LOW,HIGH`, e.g. `1,99`.
    #[arg(long, value_parser = parse_pair)]
    truncate: Option<(f64, f64)>,
    /// Quantization levels; 0 disables.
    #[arg(long)]
    quant_levels: Option<u32>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct ModelSource {
    /// Trained model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Directory of exported patterns (implies optical mode).
    #[arg(long)]
    patterns: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Raw,
    Optical,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one classifier per class and write `model.txt`.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Turn a model into projector patterns (`patterns/`).
    Realize {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        realize: RealizeArgs,
    },
    /// Score a model or pattern set on the test data and write reports.
    Evaluate {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, value_enum, default_value = "raw")]
        mode: Mode,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        realize: RealizeArgs,
        /// Run a noise sweep instead (same as the `sweep` subcommand).
        #[arg(long)]
        sweep: bool,
    },
    /// Optical accuracy across a range of noise levels (`sweep.csv`).
    Sweep {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        realize: RealizeArgs,
        #[arg(long)]
        sigma_min: Option<f64>,
        #[arg(long)]
        sigma_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Report the sigma whose accuracy is closest to this value.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Print the detector readings and predicted class for one image.
    Classify {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_enum, default_value = "raw")]
        mode: Mode,
        #[command(flatten)]
        noise: NoiseArgs,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got `{s}`"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height in `{s}`"))?;
    let w = w.trim().parse().map_err(|_| format!("bad width in `{s}`"))?;
    Ok((h, w))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LOW,HIGH, got `{s}`"))?;
    let a = a.trim().parse().map_err(|_| format!("bad number in `{s}`"))?;
    let b = b.trim().parse().map_err(|_| format!("bad number in `{s}`"))?;
    Ok((a, b))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl DataArgs {
    fn apply(self, c: &mut RunConfig) {
        let d = &mut c.data;
        set(&mut d.kind, self.data_kind);
        set_opt(&mut d.train_images, self.train_images);
        set_opt(&mut d.train_labels, self.train_labels);
        set_opt(&mut d.test_images, self.test_images);
        set_opt(&mut d.test_labels, self.test_labels);
        if self.train_dir.is_some() || self.test_dir.is_some() {
            d.kind = DataKind::ImageDir;
        }
        set_opt(&mut d.train_dir, self.train_dir);
        set_opt(&mut d.test_dir, self.test_dir);
        if let Some((h, w)) = self.size {
            d.height = h;
            d.width = w;
        }
        set_opt(&mut d.train_count, self.train_count);
        set_opt(&mut d.test_count, self.test_count);
    }
}

impl TrainArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.train.learning_rate, self.learning_rate);
        set(&mut c.train.epochs, self.epochs);
        set(&mut c.train.init_range, self.init_range);
        if self.no_shuffle {
            c.train.shuffle = false;
        }
        if self.augment {
            c.train.augment.enabled = true;
        }
    }
}

impl NoiseArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.noise.kind, self.noise);
        set(&mut c.noise.sigma, self.sigma);
        set(&mut c.noise.photon_scale, self.photon_scale);
    }
}

impl RealizeArgs {
    /// `simulate` selects the in-memory quantization used for optical
    /// evaluation instead of the export setting.
    fn apply(self, c: &mut RunConfig, simulate: bool) {
        if let Some((lo, hi)) = self.truncate {
            c.realize.truncation = Some([lo, hi]);
        }
        if simulate {
            set_opt(&mut c.realize.simulate_quant_levels, self.quant_levels);
        } else {
            set_opt(&mut c.realize.quant_levels, self.quant_levels);
        }
    }
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing {what} path")))
}

fn check_exists(p: &Path) -> Result<(), CliError> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{} does not exist", p.display())))
    }
}

fn load_split(c: &RunConfig, train: bool) -> Result<Dataset, CliError> {
    let d = &c.data;
    let (count, seed) = if train {
        (d.train_count, c.train_subset_seed())
    } else {
        (None, 0)
    };
    let data = match d.kind {
        DataKind::Idx => {
            let (images, labels) = if train {
                (require(&d.train_images, "training images")?, require(&d.train_labels, "training labels")?)
            } else {
                (require(&d.test_images, "test images")?, require(&d.test_labels, "test labels")?)
            };
            check_exists(images)?;
            check_exists(labels)?;
            dataset::load_idx(images, labels)?
        }
        DataKind::ImageDir => {
            let root = if train {
                require(&d.train_dir, "training directory")?
            } else {
                require(&d.test_dir, "test directory")?
            };
            check_exists(root)?;
            dataset::load_image_dir(root, (d.height, d.width))?
        }
    };
    match count {
        Some(n) if n < data.len() => Ok(dataset::subset(&data, n, seed)?),
        _ => Ok(data),
    }
}

fn build_config(cli_config: &Option<PathBuf>, seed: Option<u64>, out: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let mut c = match cli_config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut c.seed, seed);
    set(&mut c.out, out);
    Ok(c)
}

fn create_dir(p: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(p).map_err(|e| CliError::Run(Error::Io {
        path: p.to_path_buf(),
        source: e,
    }))
}

enum Loaded {
    Ensemble(ClassifierEnsemble),
    Patterns(RealizedPatternSet),
}

fn load_source(source: &ModelSource) -> Result<Loaded, CliError> {
    if let Some(m) = &source.model {
        check_exists(m)?;
        Ok(Loaded::Ensemble(model_io::load_ensemble(m)?))
    } else {
        let p = source.patterns.as_ref().expect("clap enforces one source");
        check_exists(p)?;
        Ok(Loaded::Patterns(optics::import_patterns(p)?))
    }
}

/// Patterns for optical scoring: realized in memory from a model, or as
/// loaded from disk.
fn optical_patterns(loaded: &Loaded, c: &RunConfig) -> Result<RealizedPatternSet, CliError> {
    match loaded {
        Loaded::Ensemble(e) => Ok(optics::realize(
            e,
            c.truncation(),
            c.realize.simulate_quant_levels.filter(|&l| l > 0),
        )?),
        Loaded::Patterns(p) => Ok(p.clone()),
    }
}

fn cmd_train(c: &RunConfig) -> Result<(), CliError> {
    let train = load_split(c, true)?;
    let config = c.train_config();
    let ensemble = perceptron::train_ensemble(&train, &config)?;
    create_dir(&c.out)?;
    let path = c.out.join("model.txt");
    model_io::save_ensemble(&ensemble, &path)?;
    let acc = evaluation::evaluate(&Model::Raw(&ensemble), &train)?.accuracy;
    println!(
        "dataset={} samples={} K={} N={} epochs={} train_accuracy={acc:.4} model={}",
        train.name(),
        train.len(),
        ensemble.classes(),
        ensemble.pixels(),
        config.epochs,
        path.display()
    );
    Ok(())
}

fn cmd_realize(c: &RunConfig, model: &Path) -> Result<(), CliError> {
    check_exists(model)?;
    let ensemble = model_io::load_ensemble(model)?;
    let patterns = optics::realize(&ensemble, c.truncation(), c.export_quant_levels())?;
    let dir = c.out.join("patterns");
    let files = optics::export_patterns(&patterns, &dir)?;
    let mut line = format!(
        "patterns={} K={} offset={:e} scale={:e}",
        dir.display(),
        patterns.classes(),
        patterns.offset(),
        patterns.scale()
    );
    if let Some(t) = patterns.truncation() {
        let _ = write!(line, " clamp=[{:e}, {:e}]", t.low, t.high);
    }
    if let Some(l) = patterns.quant_levels() {
        let _ = write!(line, " levels={l}");
    }
    let _ = write!(line, " files={}", files.len());
    println!("{line}");
    Ok(())
}

fn cmd_evaluate(c: &RunConfig, source: &ModelSource, mode: Mode) -> Result<(), CliError> {
    let loaded = load_source(source)?;
    let mode = if matches!(loaded, Loaded::Patterns(_)) {
        Mode::Optical
    } else {
        mode
    };
    let test = load_split(c, false)?;
    let patterns;
    let model = match (&loaded, mode) {
        (Loaded::Ensemble(e), Mode::Raw) => Model::Raw(e),
        _ => {
            patterns = optical_patterns(&loaded, c)?;
            Model::Optical {
                patterns: &patterns,
                noise: c.noise_model(),
            }
        }
    };
    let dir = c.out.join(format!("eval-{}", model.mode_name()));
    let mut report = evaluation::evaluate(&model, &test)?;
    report.config = c.echo();
    evaluation::emit_report(&report, &dir)?;
    let mut line = format!(
        "mode={} accuracy={:.4} samples={}",
        report.mode, report.accuracy, report.samples
    );
    if let Some(n) = c.data.test_count.filter(|&n| n < test.len()) {
        let sub = dataset::subset(&test, n, c.test_subset_seed())?;
        let mut sub_report = evaluation::evaluate(&model, &sub)?;
        sub_report.config = c.echo();
        evaluation::emit_report(&sub_report, dir.join("subset"))?;
        let _ = write!(line, " subset_accuracy={:.4} subset_samples={n}", sub_report.accuracy);
    }
    let _ = write!(line, " report={}", dir.display());
    println!("{line}");
    Ok(())
}

fn sweep_sigmas(c: &RunConfig) -> Vec<f64> {
    let s = &c.sweep;
    if s.steps == 1 {
        return vec![s.sigma_min];
    }
    (0..s.steps)
        .map(|i| {
            let sigma = s.sigma_min + (s.sigma_max - s.sigma_min) * i as f64 / (s.steps - 1) as f64;
            // trim accumulated binary noise so the CSV shows the intended grid
            (sigma * 1e12).round() / 1e12
        })
        .collect()
}

fn cmd_sweep(c: &RunConfig, source: &ModelSource) -> Result<(), CliError> {
    let loaded = load_source(source)?;
    let patterns = optical_patterns(&loaded, c)?;
    let test = load_split(c, false)?;
    let mut csv = String::from("sigma,accuracy\n");
    let mut best: Option<(f64, f64)> = None;
    for sigma in sweep_sigmas(c) {
        let model = Model::Optical {
            patterns: &patterns,
            noise: c.noise_with_sigma(sigma),
        };
        let acc = evaluation::evaluate(&model, &test)?.accuracy;
        let _ = writeln!(csv, "{sigma},{acc}");
        if let Some(t) = c.sweep.target {
            if best.is_none_or(|(_, a)| (acc - t).abs() < (a - t).abs()) {
                best = Some((sigma, acc));
            }
        }
    }
    create_dir(&c.out)?;
    let path = c.out.join("sweep.csv");
    std::fs::write(&path, csv).map_err(|e| CliError::Run(Error::Io { path: path.clone(), source: e }))?;
    match best {
        Some((sigma, acc)) => println!(
            "sweep={} closest_sigma={sigma} accuracy={acc:.4} target={:.4}",
            path.display(),
            c.sweep.target.unwrap_or_default()
        ),
        None => println!("sweep={}", path.display()),
    }
    Ok(())
}

fn cmd_classify(c: &RunConfig, source: &ModelSource, image: &Path, mode: Mode) -> Result<(), CliError> {
    check_exists(image)?;
    let loaded = load_source(source)?;
    let img = dataset::load_image_file(image)?;
    let (class, seq, names) = match (&loaded, mode) {
        (Loaded::Ensemble(e), Mode::Raw) => {
            let (k, seq) = perceptron::classify_raw(e, &img)?;
            (k, seq, e.class_names().to_vec())
        }
        _ => {
            let p = optical_patterns(&loaded, c)?;
            let (k, seq) = optics::classify_optical(&p, &img, &c.noise_model())?;
            (k, seq, p.class_names().to_vec())
        }
    };
    for (k, v) in seq.values.iter().enumerate() {
        println!("{k}\t{}\t{v:e}", names[k]);
    }
    println!("class={class} name={}", names[class]);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut c = build_config(&cli.config, cli.seed, cli.out)?;
    match cli.command {
        Command::Train { data, train } => {
            data.apply(&mut c);
            train.apply(&mut c);
            c.validate()?;
            cmd_train(&c)
        }
        Command::Realize { model, realize } => {
            realize.apply(&mut c, false);
            c.validate()?;
            cmd_realize(&c, &model)
        }
        Command::Evaluate {
            source,
            mode,
            data,
            noise,
            realize,
            sweep,
        } => {
            data.apply(&mut c);
            noise.apply(&mut c);
            realize.apply(&mut c, true);
            if sweep && c.noise.kind == NoiseKindName::None {
                c.noise.kind = NoiseKindName::AdditiveGaussian;
            }
            c.validate()?;
            if sweep {
                cmd_sweep(&c, &source)
            } else {
                cmd_evaluate(&c, &source, mode)
            }
        }
        Command::Sweep {
            source,
            data,
            noise,
            realize,
            sigma_min,
            sigma_max,
            steps,
            target,
        } => {
            data.apply(&mut c);
            noise.apply(&mut c);
            realize.apply(&mut c, true);
            if c.noise.kind == NoiseKindName::None {
                c.noise.kind = NoiseKindName::AdditiveGaussian;
            }
            set(&mut c.sweep.sigma_min, sigma_min);
            set(&mut c.sweep.sigma_max, sigma_max);
            set(&mut c.sweep.steps, steps);
            set_opt(&mut c.sweep.target, target);
            c.validate()?;
            cmd_sweep(&c, &source)
        }
        Command::Classify {
            source,
            image,
            mode,
            noise,
        } => {
            noise.apply(&mut c);
            c.validate()?;
            cmd_classify(&c, &source, &image, mode)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlspi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
