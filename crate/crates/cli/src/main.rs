//! `agrisynth` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agrisynth::baseline::{predict_dir, train_dir, CentroidModel};
use agrisynth::config::{load_config, Preset};
use agrisynth::dataset::{generate_dataset, generate_image, write_image, GenerateOptions};
use agrisynth::metrics::{evaluate, load_palette, MetricsReport};
use agrisynth::{GeneratorConfig, Rng};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

#[derive(Parser)]
#[command(name = "agrisynth", version, about = "Synthetic crop/weed/soil segmentation datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of RGB and label image pairs plus a manifest.
    Generate(GenerateArgs),
    /// Render the RGB and label pair of a single image index.
    Preview(PreviewArgs),
    /// Compare predicted masks against ground truth.
    Evaluate(EvaluateArgs),
    /// Write a commented example config for a preset.
    Init(InitArgs),
    /// Train or apply the per-pixel baseline segmenter.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Generate train and test sets, train the baseline, predict and evaluate.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Generator config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long, env = "AGRISYNTH_OUT")]
    out: PathBuf,
    /// Override the dataset size.
    #[arg(long)]
    count: Option<u64>,
    /// Keep images of a previous run with the same config.
    #[arg(long)]
    resume: bool,
    /// Worker threads (0 uses every core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct PreviewArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Image index within the dataset.
    #[arg(long)]
    index: u64,
    /// Output prefix; writes PREFIX_rgb.png and PREFIX_label.png.
    #[arg(long)]
    out: PathBuf,
    /// Fix the camera heading in degrees.
    #[arg(long, allow_negative_numbers = true)]
    yaw: Option<f64>,
    /// Camera height above ground in meters.
    #[arg(long)]
    height: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of predicted masks.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth masks.
    #[arg(long)]
    gt: PathBuf,
    /// Palette file: TOML or JSON palette table, or a dataset manifest.
    #[arg(long)]
    palette: PathBuf,
    /// Merge crop and weed into a single vegetation class.
    #[arg(long)]
    merge_vegetation: bool,
    /// Report file (JSON); defaults to PRED/metrics.json.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct InitArgs {
    /// synthetic-a, synthetic-b, synthetic-c or synthetic-d.
    #[arg(long)]
    preset: String,
    /// Config file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum BaselineCommand {
    /// Fit the model on a generated dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Fraction of pixels sampled per image.
        #[arg(long, default_value_t = 0.1)]
        sample_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write predicted masks for every *_rgb.png in a directory.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Working directory for both splits, the model and the predictions.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    train: u64,
    #[arg(long, default_value_t = 20)]
    test: u64,
    #[arg(long, default_value_t = 0.1)]
    sample_rate: f64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

/// Error caused by invocation or config problems (exit code 2).
#[derive(Debug)]
struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl Into<anyhow::Error>) -> anyhow::Error {
    UsageError(e.into()).into()
}

fn load(args: &ConfigArgs) -> Result<GeneratorConfig> {
    let mut cfg = load_config(&args.config).map_err(usage)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn lib_error(e: agrisynth::Error) -> anyhow::Error {
    if e.is_usage() {
        usage(e)
    } else {
        e.into()
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut cfg = load(&a.config)?;
    if let Some(n) = a.count {
        cfg.dataset_size = n;
    }
    let options = GenerateOptions {
        resume: a.resume,
        jobs: a.jobs,
    };
    let manifest = generate_dataset(&cfg, &a.out, &options).map_err(lib_error)?;
    println!(
        "wrote {} image pairs to {} (plants: {:?})",
        manifest.images.len(),
        a.out.display(),
        manifest.plant_totals()
    );
    Ok(())
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_preview(a: PreviewArgs) -> Result<()> {
    let mut cfg = load(&a.config)?;
    if let Some(yaw) = a.yaw {
        cfg.camera.yaw_range_deg = [yaw, yaw];
    }
    if let Some(h) = a.height {
        cfg.camera.height_m = h;
    }
    cfg.validate().map_err(usage)?;
    let image = generate_image(&cfg, a.index).map_err(lib_error)?;
    let (rgb, label) = (prefixed(&a.out, "_rgb.png"), prefixed(&a.out, "_label.png"));
    if let Some(dir) = rgb.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_image(&image.output.rgb.color, &rgb)?;
    write_image(&image.output.label.color, &label)?;
    println!("{}\n{}", rgb.display(), label.display());
    Ok(())
}

fn write_report(report: &MetricsReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let palette = load_palette(&a.palette).map_err(usage)?;
    let report = evaluate(&a.pred, &a.gt, &palette, a.merge_vegetation)?;
    print!("{}", report.table());
    let path = a.report.unwrap_or_else(|| a.pred.join("metrics.json"));
    write_report(&report, &path)
}

fn cmd_init(a: InitArgs) -> Result<()> {
    let preset = Preset::parse(&a.preset).map_err(usage)?;
    std::fs::write(&a.out, preset.commented_toml(a.seed)).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} preset to {}", preset.name(), a.out.display());
    Ok(())
}

fn cmd_baseline(c: BaselineCommand) -> Result<()> {
    match c {
        BaselineCommand::Train {
            data,
            model,
            sample_rate,
            seed,
        } => {
            let m = train_dir(&data, sample_rate, seed).map_err(lib_error)?;
            m.save(&model)?;
            for c in &m.classes {
                println!("{:<6} prior {:.4}  samples {}", c.name, c.prior, c.samples);
            }
        }
        BaselineCommand::Predict { model, input, out } => {
            let m = CentroidModel::load(&model).map_err(lib_error)?;
            let n = predict_dir(&m, &input, &out)?;
            println!("predicted {n} masks into {}", out.display());
        }
    }
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let cfg = load(&a.config)?;
    let options = GenerateOptions {
        resume: false,
        jobs: a.jobs,
    };
    let (train_dir_path, test_dir_path) = (a.out.join("train"), a.out.join("test"));
    let train_cfg = GeneratorConfig {
        dataset_size: a.train,
        ..cfg.clone()
    };
    // The test split uses an unrelated seed, so no image repeats across splits.
    let test_cfg = GeneratorConfig {
        dataset_size: a.test,
        seed: Rng::new(cfg.seed).fork("test-split").key(),
        ..cfg
    };
    info!("generating {} training images", a.train);
    generate_dataset(&train_cfg, &train_dir_path, &options).map_err(lib_error)?;
    info!("generating {} test images", a.test);
    generate_dataset(&test_cfg, &test_dir_path, &options).map_err(lib_error)?;
    let model = train_dir(&train_dir_path, a.sample_rate, train_cfg.seed).map_err(lib_error)?;
    model.save(&a.out.join("model.json"))?;
    let pred = a.out.join("pred");
    predict_dir(&model, &test_dir_path, &pred)?;
    let palette = load_palette(&test_dir_path.join(agrisynth::dataset::MANIFEST_FILE))?;
    for (merge, name) in [(false, "metrics.json"), (true, "metrics_vegetation.json")] {
        let report = evaluate(&pred, &test_dir_path, &palette, merge)?;
        println!("{}", if merge { "vegetation vs soil" } else { "soil / crop / weed" });
        print!("{}", report.table());
        println!();
        write_report(&report, &a.out.join(name))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Preview(a) => cmd_preview(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Init(a) => cmd_init(a),
        Command::Baseline(c) => cmd_baseline(c),
        Command::Pipeline(a) => cmd_pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            eprintln!("run `agrisynth --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
