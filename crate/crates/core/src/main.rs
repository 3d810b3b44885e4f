use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ti_avc::data::{Dataset, NegativeMode, SynthConfig};
use ti_avc::eval::Composition;
use ti_avc::experiment::{self, Architecture, Run, TrainRequest};
use ti_avc::models::SystemKind;
use ti_avc::Result;

/// Theme-informed audio-visual correspondence experiments.
#[derive(Parser)]
#[command(name = "ti-avc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train one system into a new run directory.
    Train(TrainArgs),
    /// Score runs on the test split and write table1.csv.
    Eval(EvalArgs),
    /// First-layer contribution analysis of a ti-avc or joint run.
    Contrib(ContribArgs),
    /// Per-theme AUC of a run against a baseline-1 run.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "default")]
    preset: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "neg-mode")]
    neg_mode: Option<NegativeMode>,
    #[arg(long)]
    records: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    system: SystemKind,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long = "max-epochs", default_value_t = 200)]
    max_epochs: usize,
    /// Fusion convolution width.
    #[arg(long, default_value_t = 1, value_parser = parse_kernel)]
    kernel: usize,
    /// Weight of the match loss in joint training.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Negative mode; defaults to the dataset's own pairs.
    #[arg(long = "neg-mode")]
    neg_mode: Option<NegativeMode>,
    #[arg(long, value_enum, default_value = "desk")]
    arch: ArchArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ArchArg {
    Full,
    Desk,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Add rows for the aware and blind Bayes oracles (synthetic data only).
    #[arg(long)]
    oracle: bool,
    /// Run directories.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

#[derive(Args)]
struct ContribArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "positive")]
    composition: Composition,
    run: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Baseline-1 run providing the reference AUC.
    #[arg(long)]
    baseline: Option<PathBuf>,
    run: PathBuf,
}

fn parse_kernel(s: &str) -> std::result::Result<usize, String> {
    match s {
        "1" => Ok(1),
        "3" => Ok(3),
        _ => Err(format!("kernel must be 1 or 3, got {s}")),
    }
}

fn seed_or_default(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        log::warn!("no --seed given; using seed 0");
        0
    })
}

fn gen(args: GenArgs) -> Result<()> {
    let mut config = SynthConfig::preset(&args.preset)?;
    config.seed = seed_or_default(args.seed);
    if let Some(g) = args.gamma {
        config.gamma = g;
    }
    if let Some(m) = args.neg_mode {
        config.negative_mode = m;
    }
    if let Some(n) = args.records {
        config.records = n;
    }
    let dataset = experiment::generate_dataset(&config, &args.out)?;
    let c = dataset.manifest.counts;
    println!(
        "wrote {} records (train {}, val {}, test {}) to {}",
        c.total(),
        c.train,
        c.val,
        c.test,
        args.out.display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let dataset = Dataset::load(&args.dataset)?;
    let mut request = TrainRequest::new(args.system, seed_or_default(args.seed));
    request.train.learning_rate = args.lr;
    request.train.batch_size = args.batch;
    request.train.patience = args.patience;
    request.train.max_epochs = args.max_epochs;
    request.train.joint_lambda = args.lambda;
    request.kernel = args.kernel;
    request.negative_mode = args.neg_mode;
    request.architecture = match args.arch {
        ArchArg::Full => Architecture::Full,
        ArchArg::Desk => Architecture::Desk,
    };
    let config = request.resolve(&args.dataset, &dataset)?;
    let run = experiment::train(&args.dataset, &dataset, &config)?;
    run.save(&args.out)?;
    for (stage, log) in &run.logs {
        println!(
            "{stage}: {} epochs, best epoch {} with val loss {:.5}",
            log.epochs.len(),
            log.best_epoch,
            log.best_val_loss
        );
    }
    println!("saved {} run to {}", run.name(), args.out.display());
    Ok(())
}

fn load_runs(dataset: &Dataset, dirs: &[PathBuf]) -> Result<Vec<Run>> {
    dirs.iter()
        .map(|d| Run::load(d, &dataset.manifest))
        .collect()
}

fn eval(args: EvalArgs) -> Result<()> {
    let dataset = Dataset::load(&args.dataset)?;
    let runs = load_runs(&dataset, &args.runs)?;
    let rows = experiment::evaluate(&args.dataset, &dataset, &runs, args.oracle)?;
    let path = experiment::write_evaluation(&args.out, &rows)?;
    for r in &rows {
        let delta = r
            .delta_vs_baseline1
            .map_or(String::new(), |d| format!(" ({d:+.4})"));
        println!("{:<14} {:.4}{delta}", r.system, r.auc);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn contrib(args: ContribArgs) -> Result<()> {
    let dataset = Dataset::load(&args.dataset)?;
    let run = Run::load(&args.run, &dataset.manifest)?;
    let report = experiment::contributions(&args.dataset, &dataset, &run, args.composition)?;
    let path = experiment::write_contribution_report(&args.out, &report)?;
    for g in &report.groups {
        println!("{:<17} {:6.2}%", g.group.as_str(), 100.0 * g.proportion);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let dataset = Dataset::load(&args.dataset)?;
    let run = Run::load(&args.run, &dataset.manifest)?;
    let baseline = args
        .baseline
        .map(|b| Run::load(&b, &dataset.manifest))
        .transpose()?;
    let report = experiment::per_theme(&args.dataset, &dataset, &run, baseline.as_ref())?;
    let path = experiment::write_per_theme_report(&args.out, &report)?;
    for t in &report.themes {
        let auc = t.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
        println!("theme {:<3} {auc:>7}  ({} pairs)", t.theme, t.n_pairs);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn configure_threads() {
    let Ok(value) = std::env::var("TI_AVC_THREADS") else {
        return;
    };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("could not size the thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring TI_AVC_THREADS={value}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Contrib(a) => contrib(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
