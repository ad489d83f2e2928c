//! The `cvrnet` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvrnet_core::data::{batches, fixed_split, make_folds, BatchSpec, Fold, FoldPlan, Role};
use cvrnet_core::eval::{confusion, fold_average, parse_confusion_csv, render_fold_average, Aggregation, MetricsReport};
use cvrnet_core::train::{fit, EpochRecord, FitObserver};
use cvrnet_core::verify::{gradcheck_suite, shapes_suite, CheckResult};
use cvrnet_core::{Model, Scalar as _};

use crate::artifacts::{self, emit_report, OutputDir, ReportFormat};
use crate::checkpoint::{self, read_checkpoint};
use crate::config::RunConfig;
use crate::dataset::{load_and_resize, scan_dataset, scan_fixed_split, write_image_folder, DiskSource, ScannedDataset};
use crate::error::exit;
use crate::{fs, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "cvrnet", version, about = "Multi-encoder ensemble classifier for chest X-ray images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a stratified fold plan for a dataset directory.
    Split(SplitArgs),
    /// Train one fold and write the training log and best checkpoint.
    Train(Box<TrainArgs>),
    /// Evaluate a checkpoint on the test samples of a fold.
    Evaluate(EvaluateArgs),
    /// Classify individual image files.
    Predict(PredictArgs),
    /// Recompute every metric from a confusion-matrix CSV.
    Metrics(MetricsArgs),
    /// Run the shape and gradient verification suites.
    Verify(VerifyArgs),
    /// Average metrics reports across folds.
    Foldavg(FoldavgArgs),
    /// Write a separable synthetic image dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub val_frac: f64,
    /// Treat `data` as `train/<class>` and `test/<class>` with a given split.
    #[arg(long)]
    pub fixed_split: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Every run-config key as a flag; values are parsed like the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long, value_name = "BOOL")]
    pub fixed_split: Option<String>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub plan: Option<String>,
    #[arg(long)]
    pub fold: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, value_name = "HxW")]
    pub input_size: Option<String>,
    #[arg(long, value_name = "N/D")]
    pub width: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub beta1: Option<String>,
    #[arg(long)]
    pub beta2: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long, value_name = "BOOL")]
    pub amsgrad: Option<String>,
    #[arg(long)]
    pub patience: Option<String>,
    #[arg(long)]
    pub factor: Option<String>,
    #[arg(long)]
    pub min_lr: Option<String>,
    #[arg(long)]
    pub min_delta: Option<String>,
    #[arg(long)]
    pub weight_mode: Option<String>,
    #[arg(long, value_name = "BOOL")]
    pub augment: Option<String>,
    #[arg(long)]
    pub rotation: Option<String>,
    #[arg(long)]
    pub shift: Option<String>,
    #[arg(long)]
    pub hflip: Option<String>,
    #[arg(long)]
    pub vflip: Option<String>,
    #[arg(long, value_name = "PREFIXES")]
    pub freeze: Option<String>,
    #[arg(long, value_name = "BOOL")]
    pub preload: Option<String>,
    #[arg(long, value_name = "CHECKPOINT")]
    pub init: Option<String>,
    #[arg(long, value_name = "BOOL")]
    pub record_time: Option<String>,
}

impl Overrides {
    pub fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("data", &self.data),
            ("fixed_split", &self.fixed_split),
            ("task", &self.task),
            ("plan", &self.plan),
            ("fold", &self.fold),
            ("out", &self.out),
            ("input_size", &self.input_size),
            ("width", &self.width),
            ("seed", &self.seed),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("lr", &self.lr),
            ("beta1", &self.beta1),
            ("beta2", &self.beta2),
            ("epsilon", &self.epsilon),
            ("amsgrad", &self.amsgrad),
            ("patience", &self.patience),
            ("factor", &self.factor),
            ("min_lr", &self.min_lr),
            ("min_delta", &self.min_delta),
            ("weight_mode", &self.weight_mode),
            ("augment", &self.augment),
            ("rotation", &self.rotation),
            ("shift", &self.shift),
            ("hflip", &self.hflip),
            ("vflip", &self.vflip),
            ("freeze", &self.freeze),
            ("preload", &self.preload),
            ("init", &self.init),
            ("record_time", &self.record_time),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect()
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, requires = "data", conflicts_with = "fixed_split")]
    pub plan: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    /// Dataset root the plan refers to.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Evaluate on the test list of a `train/` + `test/` layout.
    #[arg(long, value_name = "DIR")]
    pub fixed_split: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub cm: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Shapes,
    Gradcheck,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Random cases per operator and block.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 2)]
    pub model_seeds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Weighted,
    Macro,
}

#[derive(Debug, Args)]
pub struct FoldavgArgs {
    /// Metrics reports in JSON, one per fold.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = AggregationArg::Weighted)]
    pub aggregation: AggregationArg,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = if e.use_stderr() { write!(stderr, "{}", e.render()) } else { write!(stdout, "{}", e.render()) };
            return code;
        }
    };
    if let Ok(v) = std::env::var("CVRNET_CHECK_FINITE") {
        cvrnet_core::check::set_check_finite(!matches!(v.as_str(), "" | "0" | "false"));
    }
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e);
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match command {
        Command::Split(a) => cmd_split(&a, stdout, stderr),
        Command::Train(a) => cmd_train(&a, stdout, stderr),
        Command::Evaluate(a) => cmd_evaluate(&a, stdout),
        Command::Predict(a) => cmd_predict(&a, stdout),
        Command::Metrics(a) => cmd_metrics(&a, stdout),
        Command::Verify(a) => cmd_verify(&a, stdout),
        Command::Foldavg(a) => cmd_foldavg(&a, stdout),
        Command::Synth(a) => cmd_synth(&a, stdout),
    }
}

fn out_io(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

fn warn_skipped(data: &ScannedDataset, stderr: &mut dyn Write) {
    for (path, why) in &data.skipped {
        let _ = writeln!(stderr, "warning: skipped {}: {}", path.display(), why);
    }
}

fn scan(root: &Path, fixed: bool, stderr: &mut dyn Write) -> Result<ScannedDataset> {
    let data = if fixed { scan_fixed_split(root)? } else { scan_dataset(root)? };
    warn_skipped(&data, stderr);
    Ok(data)
}

fn sibling_manifest(out: &Path, command: &str) -> Result<OutputDir> {
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| command.into());
    OutputDir::create_named(dir, command, &format!("{}.manifest.json", stem))
}

pub fn cmd_split(a: &SplitArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let data = scan(&a.data, a.fixed_split, stderr)?;
    let plan = if a.fixed_split {
        fixed_split(&data.index, data.n_train, a.seed, a.val_frac)?
    } else {
        make_folds(&data.index, a.k, a.seed, a.val_frac)?
    };
    let mut out = sibling_manifest(&a.out, "split")?;
    let name = a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    out.write(&name, artifacts::to_json(&plan).as_bytes())?;
    out.finish()?;
    let names = data.index.class_names().join("/");
    writeln!(stdout, "{} samples, classes {} {:?}", data.index.len(), names, data.index.counts()).map_err(out_io)?;
    for (f, fold) in plan.folds.iter().enumerate() {
        let idx = &data.index;
        writeln!(
            stdout,
            "fold {}: train {:?}  val {:?}  test {:?}",
            f,
            idx.counts_of(&fold.train),
            idx.counts_of(&fold.val),
            idx.counts_of(&fold.test)
        )
        .map_err(out_io)?;
    }
    Ok(())
}

struct Progress<'a> {
    start: Instant,
    record_time: bool,
    err: &'a mut dyn Write,
}

impl FitObserver for Progress<'_> {
    fn now(&mut self) -> f64 {
        if self.record_time {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn epoch_done(&mut self, r: &EpochRecord) {
        let _ = writeln!(
            self.err,
            "epoch {:>3}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}  lr {:.1e}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr
        );
    }
}

fn resolve_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for (k, v) in a.overrides.pairs() {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn plan_fold(plan: &FoldPlan, f: usize, n: usize) -> Result<Fold> {
    plan.validate(n).map_err(|e| Error::Mismatch(format!("plan does not fit the dataset: {}", e)))?;
    if f >= plan.folds.len() {
        return Err(Error::Usage(format!("fold {} outside the plan's {} folds", f, plan.folds.len())));
    }
    Ok(plan.folds[f].clone())
}

pub fn cmd_train(a: &TrainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(a)?;
    let root = cfg.data.clone().ok_or_else(|| Error::Usage("train needs `data`".into()))?;
    let out_dir = cfg.out.clone().ok_or_else(|| Error::Usage("train needs `out`".into()))?;
    let train_cfg = cfg.train_config();
    train_cfg.validate()?;
    let data = scan(&root, cfg.fixed_split, stderr)?;
    let plan = match &cfg.plan {
        Some(p) => artifacts::read_plan(p)?,
        None if cfg.fixed_split => fixed_split(&data.index, data.n_train, cfg.seed, 0.1)?,
        None => return Err(Error::Usage("train needs `plan` unless `fixed_split` is set".into())),
    };
    let fold = plan_fold(&plan, cfg.fold, data.index.len())?;
    let mut model = Model::<f32>::build(&cfg.model_config(data.index.num_classes()), cfg.seed)?;
    let mut out = OutputDir::create(&out_dir, "train")?;
    out.write("config.txt", cfg.render().as_bytes())?;
    if let Some(init) = &cfg.init {
        let report = read_checkpoint(init)?.import_partial(&mut model);
        writeln!(stdout, "imported {} entries, rejected {}", report.imported.len(), report.rejected.len()).map_err(out_io)?;
        out.write("import.json", artifacts::to_json(&report).as_bytes())?;
    }
    let source = DiskSource::new(&data, cfg.input_h, cfg.input_w);
    let source = if cfg.preload { source.preload()? } else { source };
    let mut progress = Progress { start: Instant::now(), record_time: cfg.record_time, err: stderr };
    let result = fit(&mut model, &source, &fold, &train_cfg, &mut progress)?;
    model.params_mut().copy_values_from(&result.best)?;
    out.write("train_report.jsonl", artifacts::train_report_jsonl(&result.report).as_bytes())?;
    let bytes = checkpoint::encode(&model, cfg.seed, data.index.class_names());
    out.write("best.cvrn", &bytes)?;
    out.finish()?;
    writeln!(
        stdout,
        "best epoch {} of {}, validation loss {:.6}; wrote {}",
        result.report.best_epoch,
        result.report.epochs.len(),
        result.report.best_val_loss,
        out_dir.display()
    )
    .map_err(out_io)?;
    Ok(())
}

fn load_model(path: &Path) -> Result<(Model<f32>, Vec<String>)> {
    let ck = read_checkpoint(path)?;
    let names = ck.header.class_names.clone();
    Ok((ck.into_model()?, names))
}

/// Infer-mode predictions and ensemble probabilities over `ids`.
pub fn predict_ids(model: &Model<f32>, source: &DiskSource, ids: &[usize], batch_size: usize) -> Result<(Vec<usize>, Vec<Vec<f32>>)> {
    let fold = Fold { train: Vec::new(), val: Vec::new(), test: ids.to_vec() };
    let spec = BatchSpec { role: Role::Test, batch_size, shuffle_seed: 0, epoch: 0, augment: None };
    let k = model.config().num_classes;
    let (mut preds, mut probs) = (Vec::new(), Vec::new());
    for batch in batches(source, &fold, spec)? {
        let batch = batch?;
        let (p, labels) = model.predict(&batch.images)?;
        preds.extend(labels);
        probs.extend(p.data().chunks_exact(k).map(|row| row.to_vec()));
    }
    Ok((preds, probs))
}

pub fn cmd_evaluate(a: &EvaluateArgs, stdout: &mut dyn Write) -> Result<()> {
    let (model, ck_names) = load_model(&a.model)?;
    let mut sink = std::io::sink();
    let (data, fold) = match (&a.fixed_split, &a.plan, &a.data) {
        (Some(root), _, _) => {
            let data = scan(root, true, &mut sink)?;
            let plan = fixed_split(&data.index, data.n_train, 0, 0.0)?;
            (data, plan.folds[0].clone())
        }
        (None, Some(plan), Some(root)) => {
            let data = scan(root, false, &mut sink)?;
            let fold = plan_fold(&artifacts::read_plan(plan)?, a.fold, data.index.len())?;
            (data, fold)
        }
        _ => return Err(Error::Usage("evaluate needs --plan with --data, or --fixed-split".into())),
    };
    let names = data.index.class_names().to_vec();
    if model.config().num_classes != names.len() {
        return Err(Error::Mismatch(format!("checkpoint has {} classes, dataset {}", model.config().num_classes, names.len())));
    }
    if !ck_names.is_empty() && ck_names != names {
        return Err(Error::Mismatch(format!("checkpoint classes {:?}, dataset classes {:?}", ck_names, names)));
    }
    if fold.test.is_empty() {
        return Err(Error::Usage("the selected fold has no test samples".into()));
    }
    let cfg = model.config();
    let source = DiskSource::new(&data, cfg.input_h, cfg.input_w);
    let (preds, probs) = predict_ids(&model, &source, &fold.test, a.batch_size)?;
    let actual: Vec<usize> = fold.test.iter().map(|&i| data.index.samples()[i].class_id).collect();
    let report = MetricsReport::from_confusion(confusion(&preds, &actual, names.clone())?)?;
    if let Some(dir) = &a.out {
        let mut out = OutputDir::create(dir, "evaluate")?;
        for f in [ReportFormat::Json, ReportFormat::Text] {
            out.write(&format!("metrics.{}", f.extension()), emit_report(&report, f).as_bytes())?;
        }
        out.write("confusion.csv", emit_report(&report, ReportFormat::Csv).as_bytes())?;
        let mut csv = format!("id,path,actual,predicted,{}\n", names.iter().map(|n| format!("p_{}", n)).collect::<Vec<_>>().join(","));
        for (j, &id) in fold.test.iter().enumerate() {
            let p: Vec<String> = probs[j].iter().map(|v| format!("{:.6}", v)).collect();
            csv.push_str(&format!("{},{},{},{},{}\n", id, data.index.samples()[id].path, names[actual[j]], names[preds[j]], p.join(",")));
        }
        out.write("predictions.csv", csv.as_bytes())?;
        out.finish()?;
    }
    write!(stdout, "{}", emit_report(&report, a.format)).map_err(out_io)
}

pub fn cmd_predict(a: &PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let (model, names) = load_model(&a.model)?;
    let cfg = model.config();
    for path in &a.images {
        let img = load_and_resize(path, cfg.input_h, cfg.input_w)?;
        let (p, label) = model.predict(&img)?;
        let name = names.get(label[0]).cloned().unwrap_or_else(|| label[0].to_string());
        let probs: Vec<String> = p.data().iter().map(|v| format!("{:.6}", v.as_f64())).collect();
        writeln!(stdout, "{}\t{}\t{}", path.display(), name, probs.join(" ")).map_err(out_io)?;
    }
    Ok(())
}

pub fn metrics_from_csv(path: &Path) -> Result<MetricsReport> {
    let cm = parse_confusion_csv(&fs::read_text(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(MetricsReport::from_confusion(cm)?)
}

pub fn cmd_metrics(a: &MetricsArgs, stdout: &mut dyn Write) -> Result<()> {
    let report = metrics_from_csv(&a.cm)?;
    if let Some(dir) = &a.out {
        let mut out = OutputDir::create(dir, "metrics")?;
        for f in [ReportFormat::Json, ReportFormat::Text] {
            out.write(&format!("metrics.{}", f.extension()), emit_report(&report, f).as_bytes())?;
        }
        out.finish()?;
    }
    write!(stdout, "{}", emit_report(&report, a.format)).map_err(out_io)
}

fn print_checks(results: &[CheckResult], stdout: &mut dyn Write) -> Result<()> {
    writeln!(stdout, "{:<24} {:>6} {:>12} {:>10} {:>6}  detail", "check", "result", "max error", "tolerance", "seeds").map_err(out_io)?;
    for r in results {
        writeln!(
            stdout,
            "{:<24} {:>6} {:>12.3e} {:>10.1e} {:>6}  {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.max_error,
            r.tolerance,
            r.seeds,
            r.detail
        )
        .map_err(out_io)?;
    }
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut results = Vec::new();
    if matches!(a.suite, Suite::Shapes | Suite::All) {
        results.extend(shapes_suite());
    }
    if matches!(a.suite, Suite::Gradcheck | Suite::All) {
        results.extend(gradcheck_suite(a.seeds, a.model_seeds));
    }
    print_checks(&results, stdout)?;
    match results.iter().find(|r| !r.passed) {
        Some(r) => Err(Error::Verify(format!("{}: {}", r.name, r.detail))),
        None => Ok(()),
    }
}

pub fn cmd_foldavg(a: &FoldavgArgs, stdout: &mut dyn Write) -> Result<()> {
    let reports = a.reports.iter().map(|p| artifacts::read_report(p)).collect::<Result<Vec<_>>>()?;
    let mode = match a.aggregation {
        AggregationArg::Weighted => Aggregation::Weighted,
        AggregationArg::Macro => Aggregation::Macro,
    };
    let avg = fold_average(&reports, mode)?;
    let text = match a.format {
        ReportFormat::Json => artifacts::to_json(&avg),
        _ => render_fold_average(&avg),
    };
    if let Some(dir) = &a.out {
        let mut out = OutputDir::create(dir, "foldavg")?;
        out.write("foldavg.json", artifacts::to_json(&avg).as_bytes())?;
        out.write("foldavg.txt", render_fold_average(&avg).as_bytes())?;
        out.finish()?;
    }
    write!(stdout, "{}", text).map_err(out_io)
}

pub fn cmd_synth(a: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let src = cvrnet_core::data::synthetic_images::<f32>(a.n, a.size, a.size, 1, a.classes, a.noise, a.seed)?;
    let names: Vec<String> = (0..a.classes).map(|c| format!("class{}", c)).collect();
    let mut out = OutputDir::create(&a.out, "synth")?;
    let files = write_image_folder(&a.out, &names, &src.images, &src.labels, 1)?;
    for f in &files {
        let rel = f.strip_prefix(&a.out).unwrap_or(f).to_string_lossy().replace('\\', "/");
        out.record(&rel, &fs::read(f)?);
    }
    out.finish()?;
    writeln!(stdout, "wrote {} images in {} classes to {}", files.len(), a.classes, a.out.display()).map_err(out_io)
}
