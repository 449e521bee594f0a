use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use wltls::eval::{self, avg_binary_losses, error_bound, select_b, SweepConfig};
use wltls::{
    load_libsvm_file, load_libsvm_file_with_labels, tune_prune, Dataset, IndexBase, LossKind,
    TrainConfig, WltlsModel,
};

#[derive(Parser)]
#[command(name = "wltls", version, about = "Wide-LTLS extreme multiclass classification")]
struct Cli {
    /// Worker threads for training and batch prediction.
    #[arg(long, global = true, env = "WLTLS_THREADS", default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it with a JSON training log.
    Train(TrainArgs),
    /// Print one predicted label per input line.
    Predict(PredictArgs),
    /// Accuracy, average binary loss and error bound as JSON.
    Eval(EvalArgs),
    /// Train and evaluate several slice widths; CSV to stdout or --out.
    Sweep(SweepArgs),
    /// Zero small weights, either at a fixed --lambda or tuned on --val.
    Prune(PruneArgs),
    /// Model header and size statistics as JSON.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct DataFormat {
    /// Index of the first feature in the input files (0 or 1).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    index_base: u8,
}

impl DataFormat {
    fn base(&self) -> IndexBase {
        if self.index_base == 0 {
            IndexBase::Zero
        } else {
            IndexBase::One
        }
    }
}

#[derive(Args)]
struct Hyper {
    /// Epochs over the training set, reshuffled each epoch.
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// AROW regularizer.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Seeds the path assignment and the per-epoch shuffles.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data in libsvm format (.gz accepted).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    format: DataFormat,
    /// Expected number of classes; training fails if the data disagrees.
    #[arg(long)]
    num_classes: Option<usize>,
    /// Slice width of the trellis, in [2, K].
    #[arg(long, short)]
    b: usize,
    /// Decoding loss stored with the model.
    #[arg(long, default_value = "exp")]
    loss: LossKind,
    #[command(flatten)]
    hyper: Hyper,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Training log (JSON); defaults to `<out>.log.json`.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    format: DataFormat,
    /// Decoding loss; defaults to the one stored in the model.
    #[arg(long)]
    loss: Option<LossKind>,
    /// Append the winning path's total loss after a tab.
    #[arg(long)]
    scores: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    format: DataFormat,
    #[arg(long)]
    loss: Option<LossKind>,
    /// Loss used for the average binary loss and the bound.
    #[arg(long, default_value = "squaredhinge")]
    eps_loss: LossKind,
    /// Minimum code distance assumed by the bound.
    #[arg(long, default_value_t = 4)]
    rho: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    format: DataFormat,
    /// Comma-separated slice widths.
    #[arg(long, short, value_delimiter = ',', default_value = "2,4,10")]
    b: Vec<usize>,
    #[arg(long, default_value = "exp")]
    loss: LossKind,
    #[arg(long, default_value = "squaredhinge")]
    eps_loss: LossKind,
    #[arg(long, default_value_t = 4)]
    rho: usize,
    #[command(flatten)]
    hyper: Hyper,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    model: PathBuf,
    /// Validation data for tuning the threshold.
    #[arg(long, required_unless_present = "lambda")]
    val: Option<PathBuf>,
    #[command(flatten)]
    format: DataFormat,
    /// Largest tolerated validation accuracy drop, as a fraction.
    #[arg(long, default_value_t = 0.01)]
    max_drop: f64,
    /// Fixed threshold instead of tuning.
    #[arg(long, conflicts_with = "val")]
    lambda: Option<f64>,
    /// Pruned model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

fn load_model(path: &Path) -> Result<WltlsModel> {
    WltlsModel::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

/// Parses evaluation data against the model's labels. Labels the model never
/// saw get fresh class ids and always count as errors.
fn load_eval_data(model: &WltlsModel, path: &Path, format: &DataFormat) -> Result<Dataset> {
    load_libsvm_file_with_labels(path, format.base(), model.label_map().clone())
        .with_context(|| format!("cannot read {}", path.display()))
}

fn known_labels_only(model: &WltlsModel, data: &Dataset) -> Result<Option<Dataset>> {
    let k = model.num_classes();
    let samples: Vec<_> = data.samples().iter().filter(|s| s.class_id < k).cloned().collect();
    if samples.is_empty() {
        return Ok(None);
    }
    Ok(Some(Dataset::new(samples, data.num_features(), model.label_map().clone())?))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn train_config(hyper: &Hyper, threads: usize) -> TrainConfig {
    TrainConfig {
        epochs: hyper.epochs,
        r: hyper.r,
        seed: hyper.seed,
        threads,
    }
}

fn train(args: TrainArgs, threads: usize) -> Result<()> {
    let config = train_config(&args.hyper, threads);
    config.validate()?;
    let data = load_libsvm_file(&args.data, args.format.base())
        .with_context(|| format!("cannot read {}", args.data.display()))?;
    if let Some(k) = args.num_classes {
        ensure!(
            k == data.num_classes(),
            "--num-classes {} but {} has {} distinct labels",
            k,
            args.data.display(),
            data.num_classes()
        );
    }
    ensure!(
        (2..=data.num_classes()).contains(&args.b),
        "--b must be in [2, {}] for this data, got {}",
        data.num_classes(),
        args.b
    );

    let started = Instant::now();
    let model = WltlsModel::train(&data, args.b, args.loss, &config)?;
    let train_s = started.elapsed().as_secs_f64();
    model.save(&args.out)?;

    let log_path = args.log.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".log.json");
        p.into()
    });
    let log = json!({
        "data": args.data.display().to_string(),
        "dataset": {
            "num_samples": data.len(),
            "num_features": data.num_features(),
            "num_classes": data.num_classes(),
            "mean_nnz": data.stats().mean_nnz,
        },
        "b": args.b,
        "loss": args.loss.name(),
        "epochs": config.epochs,
        "r": config.r,
        "seed": config.seed,
        "threads": config.threads,
        "train_s": train_s,
        "model": model.stats(),
    });
    std::fs::write(&log_path, serde_json::to_string_pretty(&log)? + "\n")
        .with_context(|| format!("cannot write {}", log_path.display()))?;
    eprintln!(
        "trained K={} b={} ({} edges) in {:.2}s -> {}",
        model.num_classes(),
        args.b,
        model.graph().num_edges(),
        train_s,
        args.out.display()
    );
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = load_eval_data(&model, &args.data, &args.format)?;
    let loss = args.loss.unwrap_or(model.loss());
    let predictions = model.predict_all(&data, loss)?;
    let mut out = output(args.out.as_deref())?;
    for p in predictions {
        let label = model.label_map().label_of(p.class_id).expect("decoded class is mapped");
        if args.scores {
            writeln!(out, "{}\t{}", label, p.total_loss)?;
        } else {
            writeln!(out, "{}", label)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn evaluate(args: EvalArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = load_eval_data(&model, &args.data, &args.format)?;
    let loss = args.loss.unwrap_or(model.loss());
    let accuracy = eval::accuracy(&model, &data, loss)?;
    let known = known_labels_only(&model, &data)?;
    let eps = match &known {
        Some(d) => Some(
            avg_binary_losses(model.margin_model(), model.graph(), model.assignment(), d, &[args.eps_loss])?[0],
        ),
        None => None,
    };
    let ell = model.graph().num_edges();
    let bound = eps.map(|e| error_bound(ell, e, args.rho, args.eps_loss)).transpose()?;
    let report = json!({
        "num_samples": data.len(),
        "unseen_label_samples": data.len() - known.as_ref().map_or(0, |d| d.len()),
        "loss": loss.name(),
        "accuracy": accuracy,
        "eps_loss": args.eps_loss.name(),
        "eps": eps,
        "ell": ell,
        "rho": args.rho,
        "bound": bound,
    });
    println!("{}", report);
    Ok(())
}

fn sweep(args: SweepArgs, threads: usize) -> Result<()> {
    let config = train_config(&args.hyper, threads);
    config.validate()?;
    let train = load_libsvm_file(&args.train, args.format.base())
        .with_context(|| format!("cannot read {}", args.train.display()))?;
    let test = load_libsvm_file_with_labels(&args.test, args.format.base(), train.label_map().clone())
        .with_context(|| format!("cannot read {}", args.test.display()))?;
    let mut widths = args.b.clone();
    widths.sort_unstable();
    widths.dedup();
    let cfg = SweepConfig {
        train: config,
        decode_loss: args.loss,
        eps_loss: args.eps_loss,
        rho: args.rho,
    };
    let report = eval::sweep(&train, &test, &widths, &cfg)?;
    let mut out = output(args.out.as_deref())?;
    report.write_csv(&mut out)?;
    out.flush()?;
    if report.rows.len() >= 2 {
        eprintln!("bound-selected b = {}", select_b(&report)?);
    }
    Ok(())
}

fn prune(args: PruneArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let (pruned, report) = match (args.lambda, &args.val) {
        (Some(lambda), _) => {
            ensure!(lambda >= 0.0, "--lambda must be non-negative, got {}", lambda);
            let pruned = model.prune(lambda)?;
            let report = json!({
                "lambda": lambda,
                "nnz_before": model.margin_model().nnz(),
                "nnz_after": pruned.margin_model().nnz(),
            });
            (pruned, report)
        }
        (None, Some(val)) => {
            ensure!(
                (0.0..=1.0).contains(&args.max_drop),
                "--max-drop is a fraction in [0, 1], got {}",
                args.max_drop
            );
            let data = load_eval_data(&model, val, &args.format)?;
            let (_, pruned, r) = tune_prune(&model, &data, args.max_drop)?;
            let report = json!({
                "lambda": r.lambda,
                "nnz_before": r.nnz_before,
                "nnz_after": r.nnz_after,
                "nnz_reduction": r.nnz_reduction(),
                "accuracy_before": r.accuracy_before,
                "accuracy_after": r.accuracy_after,
                "degradation": r.degradation(),
            });
            (pruned, report)
        }
        (None, None) => bail!("either --val or --lambda is required"),
    };
    pruned.save(&args.out)?;
    println!("{}", report);
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let report = json!({
        "format_version": wltls::model::FORMAT_VERSION,
        "num_classes": model.num_classes(),
        "slice_width": model.graph().slice_width(),
        "num_features": model.num_features(),
        "loss": model.loss().name(),
        "assignment_seed": model.assignment().seed(),
        "file_bytes": std::fs::metadata(&args.model)?.len(),
        "stats": model.stats(),
    });
    println!("{}", report);
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        std::process::exit(2);
    }
    // Batch prediction runs on the global pool.
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start {} worker threads: {}", cli.threads, e);
        std::process::exit(1);
    }
    let result = match cli.command {
        Command::Train(a) => train(a, cli.threads),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => evaluate(a),
        Command::Sweep(a) => sweep(a, cli.threads),
        Command::Prune(a) => prune(a),
        Command::Inspect(a) => inspect(a),
    };
    if let Err(e) = result {
        eprintln!("error: {:#}", e);
        std::process::exit(1);
    }
}
