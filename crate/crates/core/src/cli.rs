//! The `ssda` command: argument parsing, subcommands and exit codes.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::channel::SnrTarget;
use crate::config::{parse_snr_grid, ExperimentConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, evaluate_at_snr, snr_sweep, write_confusion_csv, write_metrics_csv, EvalPoint};
use crate::modelio::{
    export_receptive_fields, load_dataset, load_model, read_dataset, read_model, save_dataset, save_model,
    sidecar_path, write_kv_file, DATASET_MAGIC, MODEL_MAGIC,
};
use crate::pipeline;
use crate::siggen::{Dataset, ModulationFamily};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ssda",
    version,
    about = "Modulation classification with stacked sparse denoising autoencoders"
)]
pub struct Cli {
    /// Experiment config file (key=value lines); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Architecture preset: softmax, mlp, a, b, c, d or e.
    #[arg(long, global = true)]
    pub arch: Option<String>,
    /// Shrink dataset sizes and layer widths, in (0, 1].
    #[arg(long, global = true)]
    pub scale: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Single evaluation SNR in dB.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    /// Sweep grid, `start:stop:step` or a comma separated list (dB).
    #[arg(long = "snr-grid", global = true, allow_hyphen_values = true)]
    pub snr_grid: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train and test datasets.
    Gen,
    /// Fit whitening, pretrain, fine-tune and save a model.
    Train {
        /// Training set (default `<out>/train.iqd`).
        #[arg(long)]
        train: Option<PathBuf>,
        /// Test set for the final report (default `<out>/test.iqd`).
        #[arg(long)]
        test: Option<PathBuf>,
        /// Model path (default `<out>/model_<arch>.ssda`).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate a model on a dataset, clean or at `--snr`.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Dataset (default `<out>/test.iqd`).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate a model over an SNR grid.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Export receptive fields of one hidden layer as CSV and PGM.
    ExportRf {
        #[arg(long)]
        model: PathBuf,
        /// Hidden layer, starting at 1.
        #[arg(long, default_value_t = 1)]
        layer: usize,
    },
    /// Print the header of a dataset or model file.
    Inspect { path: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Sweep { .. } => "sweep",
            Command::ExportRf { .. } => "export-rf",
            Command::Inspect { .. } => "inspect",
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli, &args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Applies the config file, then flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(arch) = &cli.arch {
        cfg.arch = arch.parse()?;
    }
    if let Some(scale) = cli.scale {
        cfg.scale = scale;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(grid) = &cli.snr_grid {
        cfg.snr_grid = parse_snr_grid(grid)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn snr_tag(snr: Option<f64>) -> String {
    snr.map_or("clean".into(), |db| format!("snr{db}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_provenance(cfg: &ExperimentConfig, command: &str, args: &[OsString]) -> Result<PathBuf> {
    let path = cfg.out.join(format!("{command}.provenance.log"));
    let mut w = create(&path)?;
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    writeln!(w, "# ssda {} provenance", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "command={}", argv.join(" "))?;
    writeln!(w, "crate.version={}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "rng={}", crate::rng::GENERATOR)?;
    writeln!(w, "format.dataset=IQD1 v{}", crate::modelio::DATASET_VERSION)?;
    writeln!(w, "format.model=SSDA v{}", crate::modelio::MODEL_VERSION)?;
    writeln!(w, "# effective config")?;
    w.write_all(cfg.to_text().as_bytes())?;
    w.flush()?;
    Ok(path)
}

fn write_dataset_files(cfg: &ExperimentConfig, path: &Path, data: &Dataset, split: &str) -> Result<()> {
    save_dataset(path, data)?;
    let counts = data.family_counts();
    let mut entries: Vec<(String, String)> = vec![
        ("format".into(), "IQD1".into()),
        ("split".into(), split.into()),
        ("count".into(), data.len().to_string()),
        ("vector_len".into(), data.vector_len.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("scale".into(), cfg.scale.to_string()),
        ("snr_db".into(), "none".into()),
    ];
    for f in ModulationFamily::ALL {
        entries.push((format!("count.{}", f.name()), counts[f.index()].to_string()));
    }
    write_kv_file(
        &sidecar_path(path),
        entries.iter().map(|(k, v)| (k.as_str(), v.as_str())),
    )
}

fn execute(cli: &Cli, args: &[OsString]) -> Result<()> {
    let cfg = resolve_config(cli)?;
    std::fs::create_dir_all(&cfg.out)?;
    write_provenance(&cfg, cli.command.name(), args)?;
    let default_data = |p: &Option<PathBuf>, name: &str| p.clone().unwrap_or_else(|| cfg.out.join(name));
    match &cli.command {
        Command::Gen => cmd_gen(&cfg),
        Command::Train { train, test, model } => {
            let model = model.clone().unwrap_or_else(|| {
                cfg.out
                    .join(format!("model_{}.ssda", cfg.arch.as_str().to_lowercase()))
            });
            cmd_train(
                &cfg,
                &default_data(train, "train.iqd"),
                &default_data(test, "test.iqd"),
                &model,
            )
        }
        Command::Eval { model, data } => cmd_eval(&cfg, model, &default_data(data, "test.iqd"), cli.snr),
        Command::Sweep { model, data } => cmd_sweep(&cfg, model, &default_data(data, "test.iqd")),
        Command::ExportRf { model, layer } => cmd_export_rf(&cfg, model, *layer),
        Command::Inspect { path } => cmd_inspect(path),
    }
}

/// Writes `<out>/train.iqd` and `<out>/test.iqd` with `.meta` sidecars.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<()> {
    let (train, test) = pipeline::generate(cfg)?;
    for (data, name, split) in [(&train, "train.iqd", "train"), (&test, "test.iqd", "test")] {
        let path = cfg.out.join(name);
        write_dataset_files(cfg, &path, data, split)?;
        println!(
            "{}: {} vectors of length {}",
            path.display(),
            data.len(),
            data.vector_len
        );
    }
    Ok(())
}

pub fn cmd_train(cfg: &ExperimentConfig, train: &Path, test: &Path, model: &Path) -> Result<()> {
    let train_set = load_dataset(train)?;
    let test_set = load_dataset(test)?;
    let outcome = pipeline::train(cfg, &train_set)?;
    for (i, report) in outcome.pretrain.iter().enumerate() {
        for (epoch, cost) in report.epoch_costs.iter().enumerate() {
            println!("pretrain layer {} epoch {epoch}: cost {cost:.6}", i + 1);
        }
    }
    for (epoch, nll) in outcome.finetune.epoch_nll.iter().enumerate() {
        println!("finetune epoch {epoch}: nll {nll:.6}");
    }
    save_model(model, &outcome.network)?;
    let point = evaluate(&outcome.network, &test_set, None)?;
    println!("saved {}", model.display());
    println!("clean test P_cc: {:.6}", point.pcc);
    Ok(())
}

fn write_point(cfg: &ExperimentConfig, point: &EvalPoint) -> Result<()> {
    let tag = snr_tag(point.snr_db);
    write_metrics_csv(
        create(&cfg.out.join(format!("metrics_{tag}.csv")))?,
        std::slice::from_ref(point),
    )?;
    write_confusion_csv(
        create(&cfg.out.join(format!("confusion_{tag}.csv")))?,
        &point.confusion,
        false,
    )?;
    write_confusion_csv(
        create(&cfg.out.join(format!("confusion_{tag}_normalized.csv")))?,
        &point.confusion,
        true,
    )
}

pub fn cmd_eval(cfg: &ExperimentConfig, model: &Path, data: &Path, snr: Option<f64>) -> Result<()> {
    let net = load_model(model)?;
    let data = load_dataset(data)?;
    let point = match snr {
        None => evaluate(&net, &data, None)?,
        Some(db) => evaluate_at_snr(&net, &data, SnrTarget::new(db)?, cfg.seed)?,
    };
    write_point(cfg, &point)?;
    println!("{} P_cc: {:.6}", snr_tag(point.snr_db), point.pcc);
    Ok(())
}

pub fn cmd_sweep(cfg: &ExperimentConfig, model: &Path, data: &Path) -> Result<()> {
    let net = load_model(model)?;
    let data = load_dataset(data)?;
    let snrs = cfg
        .snr_grid
        .iter()
        .map(|&db| SnrTarget::new(db))
        .collect::<Result<Vec<_>>>()?;
    let sweep = snr_sweep(&net, &data, &snrs, cfg.seed)?;
    write_metrics_csv(create(&cfg.out.join("sweep.csv"))?, &sweep.points)?;
    for p in &sweep.points {
        println!("{:>8} dB  P_cc {:.6}", p.snr_db.unwrap_or(f64::INFINITY), p.pcc);
    }
    Ok(())
}

pub fn cmd_export_rf(cfg: &ExperimentConfig, model: &Path, layer: usize) -> Result<()> {
    let net = load_model(model)?;
    let (csv, pgm) = export_receptive_fields(&net, layer, cfg.out.join("rf"))?;
    println!("{}\n{}", csv.display(), pgm.display());
    Ok(())
}

pub fn cmd_inspect(path: &Path) -> Result<()> {
    let mut magic = [0u8; 4];
    File::open(path)?
        .read_exact(&mut magic)
        .map_err(|_| Error::Truncated("magic".into()))?;
    let file = std::io::BufReader::new(File::open(path)?);
    if magic == DATASET_MAGIC {
        let data = read_dataset(file)?;
        println!("format: IQD1 v{}", crate::modelio::DATASET_VERSION);
        println!("vectors: {}", data.len());
        println!("vector_len: {}", data.vector_len);
        for f in ModulationFamily::ALL {
            println!("count.{}: {}", f.name(), data.family_counts()[f.index()]);
        }
    } else if magic == MODEL_MAGIC {
        let net = read_model(file)?;
        println!("format: SSDA v{}", crate::modelio::MODEL_VERSION);
        println!("input_dim: {}", net.input_dim());
        let widths: Vec<String> = net.layers.iter().map(|l| l.hidden().to_string()).collect();
        println!("hidden: {}", widths.join("/"));
        println!("classes: {}", net.head_weights.nrows());
        for (k, v) in net.arch.to_kv() {
            println!("{k}: {v}");
        }
        for (k, v) in &net.metadata {
            println!("{k}: {v}");
        }
    } else {
        return Err(Error::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        });
    }
    Ok(())
}
