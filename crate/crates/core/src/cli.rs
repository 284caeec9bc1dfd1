//! Command-line front end: `gen-data`, `train`, `caption`, `eval` and
//! `gradcheck`.
//!
//! Exit codes: 0 on success, 1 when a verification (gradient check) fails,
//! 2 for usage, configuration or input errors.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::autograd::gradcheck::{check_faulty_op, check_ops, CheckOutcome, REL_TOLERANCE};
use crate::dataset::{build_vocabulary, load_dataset, load_split, write_dataset, CaptionSample};
use crate::decoder::{attention_trace, beam_decode, write_attention_dump, Features, LstmInput};
use crate::features::{read_precomputed, RawFeatures};
use crate::train::{
    evaluate, gradcheck::check_decoder, load_checkpoint, prepare_examples, save_checkpoint, train, write_log_csv,
    Checkpoint, TrainConfig,
};

/// Environment variable capping the worker-thread pool.
pub const THREADS_ENV: &str = "CHA_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cha", version, about = "Cross-hierarchy attention image captioner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic captioned-scene dataset.
    GenData(GenDataArgs),
    /// Train a decoder and write the best checkpoint plus a CSV log.
    Train(TrainArgs),
    /// Caption one image with a trained checkpoint.
    Caption(CaptionArgs),
    /// Score a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Check every backward rule and the decoder loss against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Scene seed; the same seed and count give a byte-identical tree.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of images, at least 10; split 80/10/10.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

/// Training-config overrides; each one beats the config file.
#[derive(Debug, Default, Args)]
pub struct ConfigFlags {
    /// Feature and word-embedding width.
    #[arg(long)]
    pub d: Option<usize>,
    /// LSTM hidden width.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Attention hidden width.
    #[arg(long)]
    pub attention: Option<usize>,
    /// Word-prediction hidden width.
    #[arg(long)]
    pub output: Option<usize>,
    /// Object regions per image (the stack has 2n+1 rows).
    #[arg(long)]
    pub n: Option<usize>,
    /// Patch scale factor around each object box.
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
    /// Adam learning rate.
    #[arg(long, allow_negative_numbers = true)]
    pub lr: Option<f64>,
    /// Passes over the training pairs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Seed for initialization and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `context_plus_embedding` or `context_only`.
    #[arg(long, value_parser = parse_lstm_input)]
    pub lstm_input: Option<LstmInput>,
    /// Beam width used for captioning and evaluation.
    #[arg(long)]
    pub beam: Option<usize>,
    /// Most tokens a decoded caption may emit.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// How many of each image's captions to train on.
    #[arg(long)]
    pub captions_per_image: Option<usize>,
    /// Global gradient-norm clip.
    #[arg(long, allow_negative_numbers = true)]
    pub clip_norm: Option<f64>,
}

fn parse_lstm_input(s: &str) -> Result<LstmInput, String> {
    LstmInput::parse(s).ok_or_else(|| format!("expected context_plus_embedding or context_only, got `{s}`"))
}

impl ConfigFlags {
    pub fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { c.$f = v; } )*};
        }
        set!(d, hidden, attention, output, n, k, lr, epochs, seed, lstm_input, beam, max_len, captions_per_image, clip_norm);
        c
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path for the best-validation model.
    #[arg(long)]
    pub out: PathBuf,
    /// `key = value` training config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV log path (default: the checkpoint path with a `.csv` extension).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Also save the final-epoch checkpoint here.
    #[arg(long)]
    pub last: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct CaptionArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Image id, e.g. `img00012`.
    #[arg(long)]
    pub image: String,
    /// Dataset directory holding the image (any split).
    #[arg(long, required_unless_present = "features")]
    pub data: Option<PathBuf>,
    /// Precomputed-feature JSONL to read the image's feature stack from instead.
    #[arg(long, conflicts_with = "data")]
    pub features: Option<PathBuf>,
    /// Beam width (default: the checkpoint's).
    #[arg(long)]
    pub beam: Option<usize>,
    /// Write per-step attention weights as JSON.
    #[arg(long)]
    pub dump_attention: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    /// `train`, `val` or `test`.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Beam width (default: the checkpoint's).
    #[arg(long)]
    pub beam: Option<usize>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Seeded inputs per check.
    #[arg(long, default_value_t = 6)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add an op with a deliberately wrong backward rule; the run must fail.
    #[arg(long)]
    pub inject_fault: bool,
}

/// Effective settings of a `train` run: the merged training config plus the
/// paths it reads and writes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: PathBuf,
    pub out: PathBuf,
    pub log: PathBuf,
    pub last: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults, then the config file, then flags.
    pub fn resolve(args: &TrainArgs) -> Result<Self, CliError> {
        let base = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                TrainConfig::from_toml(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => TrainConfig::default(),
        };
        let train = args.flags.apply(base);
        train.validate().map_err(usage)?;
        Ok(Self {
            train,
            data: args.data.clone(),
            out: args.out.clone(),
            log: args.log.clone().unwrap_or_else(|| args.out.with_extension("csv")),
            last: args.last.clone(),
        })
    }

    /// Log header: every effective setting, one `# key = value` line each.
    pub fn echo(&self) -> String {
        let mut lines = vec![
            format!("# data = {:?}", self.data.display().to_string()),
            format!("# out = {:?}", self.out.display().to_string()),
            format!("# log = {:?}", self.log.display().to_string()),
        ];
        if let Some(last) = &self.last {
            lines.push(format!("# last = {:?}", last.display().to_string()));
        }
        lines.extend(self.train.to_toml().lines().map(|l| format!("# {l}")));
        lines.join("\n")
    }
}

/// A failed subcommand and the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Verification(_) => EXIT_VERIFICATION,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Verification(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Sizes the global worker pool from `CHA_THREADS` when it is set.
fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_ENV}={value}: expected a positive integer")))?;
    // A pool that already exists (e.g. when embedded) is left as it is.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenData(a) => cmd_gen_data(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Caption(a) => cmd_caption(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    }
}

pub fn cmd_gen_data(args: &GenDataArgs) -> Result<(), CliError> {
    let manifest = write_dataset(&args.out, args.seed, args.count, args.force).map_err(usage)?;
    let counts: Vec<String> = ["train", "val", "test"]
        .iter()
        .map(|s| format!("{s} {}", manifest.splits.get(*s).map_or(0, |e| e.count)))
        .collect();
    println!(
        "wrote {} scenes (seed {}) to {}: {}",
        manifest.count,
        manifest.seed,
        args.out.display(),
        counts.join(", ")
    );
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let run = RunConfig::resolve(args)?;
    load_dataset(&run.data).map_err(usage)?;
    let train_samples = load_split(&run.data, "train").map_err(usage)?;
    let val_samples = load_split(&run.data, "val").map_err(usage)?;
    let vocab = build_vocabulary(&train_samples);
    let train_set = prepare_examples(&train_samples, &vocab, &run.train).map_err(usage)?;
    let val_set = prepare_examples(&val_samples, &vocab, &run.train).map_err(usage)?;

    println!("{}", run.echo());
    println!(
        "# train images = {}, val images = {}, vocabulary = {}",
        train_set.len(),
        val_set.len(),
        vocab.len()
    );
    let outcome = train(&run.train, &vocab, &train_set, &val_set, |row| match row.val_bleu4 {
        Some(b) => println!("epoch {:>4}  loss {:.6}  val B-4 {:.4}", row.epoch, row.train_loss, b),
        None => println!("epoch {:>4}  loss {:.6}", row.epoch, row.train_loss),
    })
    .map_err(usage)?;

    save_checkpoint(&outcome.best, &run.out).map_err(usage)?;
    if let Some(last) = &run.last {
        save_checkpoint(&outcome.last, last).map_err(usage)?;
    }
    write_log_csv(&run.log, &outcome.log).map_err(usage)?;
    println!(
        "saved epoch {} to {}; log in {}",
        outcome.best.epoch,
        run.out.display(),
        run.log.display()
    );
    Ok(())
}

fn find_sample(data: &Path, image: &str) -> Result<CaptionSample, CliError> {
    let manifest = load_dataset(data).map_err(usage)?;
    for split in manifest.splits.keys() {
        if let Some(s) = load_split(data, split).map_err(usage)?.into_iter().find(|s| s.image_id == image) {
            return Ok(s);
        }
    }
    Err(usage(format!("image `{image}` not found in {}", data.display())))
}

/// Caption text for one image, with the attention trace when requested.
pub fn cmd_caption(args: &CaptionArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&args.ckpt).map_err(usage)?;
    let beam = args.beam.unwrap_or(ckpt.config.beam);
    let text = match (&args.data, &args.features) {
        (_, Some(path)) => {
            let records = read_precomputed(path).map_err(usage)?;
            let rec = records
                .iter()
                .find(|r| r.image_id == args.image)
                .ok_or_else(|| usage(format!("image `{}` not found in {}", args.image, path.display())))?;
            let stack = rec.to_stack().map_err(usage)?;
            caption_with(&ckpt, Features::Stack(&stack), beam, args.dump_attention.as_deref())?
        }
        (Some(data), None) => {
            let sample = find_sample(data, &args.image)?;
            let raw = RawFeatures::extract(&sample.raster, &sample.scene.boxes(), ckpt.config.n, ckpt.config.k)
                .map_err(usage)?;
            caption_with(&ckpt, Features::Raw(&raw), beam, args.dump_attention.as_deref())?
        }
        (None, None) => return Err(usage("either --data or --features is required")),
    };
    println!("{text}");
    Ok(())
}

fn caption_with(ckpt: &Checkpoint, features: Features<'_>, beam: usize, dump: Option<&Path>) -> Result<String, CliError> {
    let tokens = beam_decode(&ckpt.params, features, beam, ckpt.config.max_len).map_err(usage)?;
    if let Some(path) = dump {
        let records = attention_trace(&ckpt.params, features, &tokens, ckpt.config.max_len, &ckpt.vocab).map_err(usage)?;
        write_attention_dump(path, &records).map_err(usage)?;
    }
    Ok(ckpt.vocab.decode(&tokens))
}

/// Prints the JSON report on stdout and the score table on stderr.
pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&args.ckpt).map_err(usage)?;
    let samples = load_split(&args.data, &args.split).map_err(usage)?;
    if let Ok(train_samples) = load_split(&args.data, "train") {
        if build_vocabulary(&train_samples) != ckpt.vocab {
            eprintln!("warning: checkpoint vocabulary differs from this dataset's training vocabulary");
        }
    }
    let examples = prepare_examples(&samples, &ckpt.vocab, &ckpt.config).map_err(usage)?;
    let beam = args.beam.unwrap_or(ckpt.config.beam);
    let report = evaluate(&ckpt, &examples, beam, &args.split).map_err(usage)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = &args.report {
        std::fs::write(path, format!("{json}\n")).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    println!("{json}");
    eprint!("{}", report.table());
    Ok(())
}

/// Every op case plus both decoder modes; fails with the names of the
/// checks whose worst relative error reached the tolerance.
pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let mut outcomes: Vec<CheckOutcome> = check_ops(args.trials, args.seed).map_err(usage)?;
    outcomes.extend(check_decoder(args.trials, args.seed).map_err(usage)?);
    if args.inject_fault {
        outcomes.push(check_faulty_op(args.trials, args.seed).map_err(usage)?);
    }
    for o in &outcomes {
        println!("{}", gradcheck_line(o));
    }
    let cases: usize = outcomes.iter().map(|o| o.trials).sum();
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name.as_str()).collect();
    println!(
        "{cases} cases over {} checks, tolerance {REL_TOLERANCE:e}: {}",
        outcomes.len(),
        if failed.is_empty() { "all passed" } else { "FAILED" }
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("gradient check failed: {}", failed.join(", "))))
    }
}

pub fn gradcheck_line(o: &CheckOutcome) -> String {
    format!(
        "{:<38} trials {:>3}  max rel error {:.3e}  {}",
        o.name,
        o.trials,
        o.max_rel_error,
        if o.passed() { "PASS" } else { "FAIL" }
    )
}
