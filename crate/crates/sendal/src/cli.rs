//! Command-line interface: generate, refine, train, infer, evaluate,
//! benchmark. One binary, one subcommand per stage; every file output
//! carries a `# config: ...` header echoing the flags that produced it, and
//! all outputs are byte-identical across runs given identical inputs and
//! seeds (latency measurement, which is inherently non-deterministic, is
//! opt-in and off by default).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::error::Result;
use crate::eval::{anchored_walk_forward, latency_bench, reports_to_csv, summary_table, BenchMode};
use crate::model::CoreKind;
use crate::series::{
    load_raw_csv, load_refined_csv, make_windows, refine_pair, save_raw_csv, save_refined_csv,
    RefineConfig,
};
use crate::synth::{gen_pair, SynthConfig};
use crate::train::{train_full, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "sendal",
    about = "Low-cost sensor calibration with gated linear/deep routing",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic sensor pair and its refined dataset.
    Synth(SynthArgs),
    /// Refine two raw CSV channels into an aligned pair CSV.
    Refine(RefineArgs),
    /// Run the three-phase training pipeline and write a checkpoint.
    Train(TrainArgs),
    /// Run routed inference over a refined dataset.
    Infer(InferArgs),
    /// Anchored walk-forward evaluation against both baselines.
    Eval(EvalArgs),
    /// Latency / MAC report for a trained checkpoint.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct RefineFlags {
    /// Trailing moving-average window (samples).
    #[arg(long, default_value_t = 4)]
    pub sma_k: usize,
    /// Trend-filter smoothing strength.
    #[arg(long, default_value_t = 1600.0)]
    pub hp_lambda: f64,
    /// Output grid interval in seconds.
    #[arg(long, default_value_t = 15.0)]
    pub interval_s: f64,
}

impl RefineFlags {
    fn config(&self) -> RefineConfig {
        RefineConfig {
            sma_k: self.sma_k,
            hp_lambda: self.hp_lambda,
            interval_s: self.interval_s,
        }
    }
    fn echo(&self) -> String {
        format!(
            "sma_k={} hp_lambda={} interval_s={}",
            self.sma_k, self.hp_lambda, self.interval_s
        )
    }
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    /// Window size N (readings per model input).
    #[arg(long, default_value_t = 20)]
    pub window_n: usize,
    /// Hard-label margin (biases routing toward the linear branch).
    #[arg(long, default_value_t = 0.0)]
    pub xi: f64,
    /// Label smoothing window length.
    #[arg(long, default_value_t = 10)]
    pub lambda_smooth: usize,
    /// Instability weight in the soft label.
    #[arg(long, default_value_t = 0.25)]
    pub w: f64,
    /// Magnifier parameter.
    #[arg(long, default_value_t = 4.0)]
    pub n_mag: f64,
    /// Routing threshold.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Gate re-evaluation period for stream inference.
    #[arg(long, default_value_t = 1)]
    pub skip_period: usize,
    /// Phase-1 epochs (single-model training).
    #[arg(long = "epochs-1", default_value_t = 100)]
    pub epochs_1: usize,
    /// Phase-2 epochs (classifier training).
    #[arg(long = "epochs-2", default_value_t = 50)]
    pub epochs_2: usize,
    /// Phase-3 epochs (unified fine-tuning).
    #[arg(long = "epochs-3", default_value_t = 30)]
    pub epochs_3: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Mini-batch size.
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Linear-branch hidden width.
    #[arg(long, default_value_t = 8)]
    pub h_lin: usize,
    /// Recurrent-core input width.
    #[arg(long, default_value_t = 4)]
    pub core_in: usize,
    /// Recurrent-core hidden size.
    #[arg(long, default_value_t = 16)]
    pub core_hidden: usize,
    /// Attention model size.
    #[arg(long, default_value_t = 8)]
    pub attn_model: usize,
}

impl TrainFlags {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            xi: self.xi,
            lambda_smooth: self.lambda_smooth,
            w: self.w,
            n_mag: self.n_mag,
            theta: self.theta,
            epochs_phase1: self.epochs_1,
            epochs_phase2: self.epochs_2,
            epochs_phase3: self.epochs_3,
            lr: self.lr,
            batch_size: self.batch_size,
            seed,
            window_n: self.window_n,
            h_lin: self.h_lin,
            core_in: self.core_in,
            core_hidden: self.core_hidden,
            attn_model: self.attn_model,
            skip_period: self.skip_period,
        }
    }

    fn echo(&self, core: CoreKind, seed: u64) -> String {
        format!(
            "core={core} seed={seed} window_n={} xi={} lambda_smooth={} w={} n_mag={} theta={} \
             skip_period={} epochs={}/{}/{} lr={} batch_size={} h_lin={} core_in={} \
             core_hidden={} attn_model={}",
            self.window_n,
            self.xi,
            self.lambda_smooth,
            self.w,
            self.n_mag,
            self.theta,
            self.skip_period,
            self.epochs_1,
            self.epochs_2,
            self.epochs_3,
            self.lr,
            self.batch_size,
            self.h_lin,
            self.core_in,
            self.core_hidden,
            self.attn_model
        )
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Profile name: env-a (calm), env-b (bursty), env-c (noisy).
    #[arg(long, default_value = "env-b")]
    pub profile: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Stream duration in hours.
    #[arg(long, default_value_t = 48.0)]
    pub duration_h: f64,
    /// Output directory (raw_x.csv, raw_y.csv, refined.csv).
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub refine: RefineFlags,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Raw low-cost channel CSV.
    #[arg(long)]
    pub raw_x: PathBuf,
    /// Raw reference channel CSV.
    #[arg(long)]
    pub raw_y: PathBuf,
    /// Output refined-pair CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub refine: RefineFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Refined-pair CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Component core kind.
    #[arg(long, default_value = "lstm")]
    pub core: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional training-log CSV (phase,epoch,loss).
    #[arg(long)]
    pub train_log: Option<PathBuf>,
    /// Optional label-dump CSV (i,hard,smoothed,instability,soft).
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Refined-pair CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Output per-window CSV (i,x_hat,branch,gate,macs).
    #[arg(long)]
    pub out: PathBuf,
    /// Override the checkpoint's gate-skip period.
    #[arg(long)]
    pub skip_period: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Refined-pair CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Component core kind.
    #[arg(long, default_value = "lstm")]
    pub core: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Number of walk-forward folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Output fold-report CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also measure wall-clock latency per fold (makes the report
    /// non-deterministic across runs).
    #[arg(long, default_value_t = false)]
    pub measure_latency: bool,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Refined-pair CSV providing the benchmark windows.
    #[arg(long)]
    pub data: PathBuf,
    /// Measured passes over the window set.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Refine(args) => cmd_refine(args),
        Command::Train(args) => cmd_train(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::profile(&args.profile, args.seed)?;
    cfg.duration_s = args.duration_h * 3600.0;
    cfg.validate()?;
    let refine_cfg = args.refine.config();
    let pair = gen_pair(&cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    save_raw_csv(&pair.lowcost, args.out_dir.join("raw_x.csv"))?;
    save_raw_csv(&pair.truth, args.out_dir.join("raw_y.csv"))?;
    let ds = refine_pair(&pair.lowcost, &pair.truth, &refine_cfg)?;
    let echo = format!(
        "config: profile={} seed={} duration_h={} {}",
        args.profile,
        args.seed,
        args.duration_h,
        args.refine.echo()
    );
    save_refined_csv(&ds, args.out_dir.join("refined.csv"), &[echo])?;
    println!(
        "wrote raw_x.csv ({} pts), raw_y.csv ({} pts), refined.csv ({} samples) to {}",
        pair.lowcost.len(),
        pair.truth.len(),
        ds.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_refine(args: RefineArgs) -> Result<()> {
    let raw_x = load_raw_csv(&args.raw_x)?;
    let raw_y = load_raw_csv(&args.raw_y)?;
    let ds = refine_pair(&raw_x, &raw_y, &args.refine.config())?;
    let echo = format!(
        "config: raw_x={} raw_y={} {}",
        args.raw_x.display(),
        args.raw_y.display(),
        args.refine.echo()
    );
    save_refined_csv(&ds, &args.out, &[echo])?;
    println!("wrote {} ({} samples)", args.out.display(), ds.len());
    Ok(())
}

fn write_with_parent(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let core: CoreKind = args.core.parse()?;
    let cfg = args.train.config(args.seed);
    let ds = load_refined_csv(&args.data)?;
    let outcome = train_full(&ds, &cfg, core)?;
    save_checkpoint(&outcome.model, &args.out)?;
    let echo = args.train.echo(core, args.seed);

    if let Some(path) = &args.train_log {
        let mut log = String::new();
        let _ = writeln!(log, "# config: {echo}");
        let _ = writeln!(log, "phase,epoch,loss");
        for entry in &outcome.history {
            let _ = writeln!(log, "{},{},{}", entry.phase, entry.epoch, entry.loss);
        }
        write_with_parent(path, &log)?;
    }
    if let Some(path) = &args.labels_out {
        let mut dump = String::new();
        let _ = writeln!(dump, "# config: {echo}");
        let _ = writeln!(dump, "i,hard,smoothed,instability,soft");
        let offset = cfg.window_n - 1;
        for i in 0..outcome.labels.len() {
            let _ = writeln!(
                dump,
                "{},{},{},{},{}",
                offset + i,
                outcome.labels.hard[i] as u8,
                outcome.labels.smoothed[i] as u8,
                outcome.labels.instability[i],
                outcome.labels.soft[i]
            );
        }
        write_with_parent(path, &dump)?;
    }
    let final_loss = outcome.history.last().map(|p| p.loss).unwrap_or(f64::NAN);
    println!(
        "trained {} model on {} samples; final fine-tune loss {:.6}; checkpoint {}",
        core,
        ds.len(),
        final_loss,
        args.out.display()
    );
    Ok(())
}

fn cmd_infer(args: InferArgs) -> Result<()> {
    let model = load_checkpoint::<f64>(&args.model)?;
    let ds = load_refined_csv(&args.data)?;
    let windows = make_windows(&ds, model.window_n)?;
    let skip = args.skip_period.unwrap_or(model.skip_period);
    let results = model.infer_stream(windows.iter().map(|(w, _)| w.values), skip)?;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "# config: model={} skip_period={} window_n={} theta={}",
        args.model.display(),
        skip,
        model.window_n,
        model.theta
    );
    let _ = writeln!(out, "i,x_hat,branch,gate,macs");
    for ((w, _), (x_hat, decision)) in windows.iter().zip(results.iter()) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            w.target_index,
            x_hat,
            decision.branch,
            decision.gate_value,
            model.count_macs(decision)
        );
    }
    write_with_parent(&args.out, &out)?;
    let linear = results
        .iter()
        .filter(|(_, d)| d.branch == crate::model::Branch::Linear)
        .count();
    println!(
        "inferred {} windows ({} linear, {} component) -> {}",
        results.len(),
        linear,
        results.len() - linear,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let core: CoreKind = args.core.parse()?;
    let cfg = args.train.config(args.seed);
    let ds = load_refined_csv(&args.data)?;
    let outcome = anchored_walk_forward(&ds, &cfg, core, args.folds, args.measure_latency)?;
    let echo = format!(
        "config: folds={} measure_latency={} {}",
        args.folds,
        args.measure_latency,
        args.train.echo(core, args.seed)
    );
    write_with_parent(&args.out, &reports_to_csv(&outcome, &[echo]))?;
    print!("{}", summary_table(&outcome));
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let model = load_checkpoint::<f64>(&args.model)?.cast::<f32>();
    let ds = load_refined_csv(&args.data)?;
    let windows64 = make_windows(&ds, model.window_n)?;
    let windows: Vec<Vec<f32>> = windows64
        .iter()
        .map(|(w, _)| w.values.iter().map(|v| *v as f32).collect())
        .collect();

    let routed = model.infer_stream(
        windows.iter().map(|w| w.as_slice()),
        model.skip_period,
    )?;
    let linear = routed
        .iter()
        .filter(|(_, d)| d.branch == crate::model::Branch::Linear)
        .count();
    let mean_macs: f64 = routed
        .iter()
        .map(|(_, d)| model.count_macs(d) as f64)
        .sum::<f64>()
        / routed.len() as f64;

    println!(
        "windows={} repeats={} (32-bit inference)",
        windows.len(),
        args.repeats
    );
    println!(
        "routing: linear {}/{} ({:.1}%), component {}",
        linear,
        routed.len(),
        100.0 * linear as f64 / routed.len() as f64,
        routed.len() - linear
    );
    println!(
        "macs: routed mean {:.1}, linear-only {}, component-only {} (+gate {})",
        mean_macs,
        model.linear_macs(),
        model.component_macs(),
        model.gate_macs()
    );
    println!(
        "{:<16} {:>12} {:>12} {:>12} {:>10}",
        "mode", "median_us", "mean_us", "p95_us", "count"
    );
    for (name, mode) in [
        ("top-down", BenchMode::TopDown),
        ("linear-only", BenchMode::LinearOnly),
        ("component-only", BenchMode::ComponentOnly),
    ] {
        let stats = latency_bench(&model, &windows, args.repeats, mode)?;
        println!(
            "{:<16} {:>12.4} {:>12.4} {:>12.4} {:>10}",
            name, stats.median_us, stats.mean_us, stats.p95_us, stats.count
        );
    }
    Ok(())
}
