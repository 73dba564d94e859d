use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use matrec_core::baselines::{AlsConfig, BprConfig};
use matrec_core::dataio::{write_canonical, NormScheme};
use matrec_core::persist::{read_model, write_model, SavedModel};
use matrec_core::pipeline::{
    load_dataset, DatasetKind, PreparedData, DEFAULT_SEED, DEFAULT_TEST_FRACTION,
};
use matrec_core::{compute_ranks, evaluate, sweep_learning_rate, Algorithm, Hyperparams};

/// Rank-aware matrix factorization experiments.
///
/// Every run is determined by its flags: all randomness derives from --seed.
#[derive(Debug, Parser)]
#[command(name = "matrec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a raw dataset and write it as a canonical table.
    Ingest(IngestArgs),
    /// Train the rank-aware model, save it and report test MAE.
    Train(TrainArgs),
    /// Re-split a dataset and score a saved model on its test half.
    Evaluate(EvaluateArgs),
    /// Train and evaluate once per learning rate.
    Sweep(SweepArgs),
    /// Train an ALS or BPR baseline and report test MAE.
    Baseline(BaselineArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DatasetArg {
    Lastfm,
    Movielens,
    Canonical,
}

impl From<DatasetArg> for DatasetKind {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Lastfm => DatasetKind::LastFm,
            DatasetArg::Movielens => DatasetKind::MovieLens,
            DatasetArg::Canonical => DatasetKind::Canonical,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    PerUserMax,
    GlobalMax,
}

impl From<NormArg> for NormScheme {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::PerUserMax => NormScheme::PerUserMax,
            NormArg::GlobalMax => NormScheme::GlobalMax,
        }
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    /// Input file (user_artists.dat, ratings.csv, u.data or a canonical table).
    #[arg(long)]
    path: PathBuf,
    /// Override the dataset's default rating normalization.
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Fraction of ratings held out for testing.
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    split: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Args)]
struct MatRecArgs {
    #[arg(long, default_value_t = matrec_core::matrec::DEFAULT_LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = matrec_core::matrec::DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = matrec_core::matrec::DEFAULT_LATENT_DIM)]
    dim: usize,
    /// Feature norms below this skip the update.
    #[arg(long, default_value_t = matrec_core::matrec::DEFAULT_NORM_EPSILON)]
    eps: f64,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Canonical table to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the user popularity table.
    #[arg(long)]
    user_ranks: Option<PathBuf>,
    /// Also write the item popularity table.
    #[arg(long)]
    item_ranks: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    hyper: MatRecArgs,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Evaluation report table.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-epoch training loss table.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Model file written by `train` or `baseline`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepAlgo {
    Matrec,
    Bpr,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "matrec")]
    algo: SweepAlgo,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Comma-separated, strictly increasing learning rates.
    #[arg(long, value_delimiter = ',', required = true)]
    lrs: Vec<f64>,
    /// MatRec epochs.
    #[arg(long, default_value_t = matrec_core::matrec::DEFAULT_EPOCHS)]
    epochs: usize,
    /// Latent dimension for either algorithm.
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// BPR epochs.
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// BPR L2 regularization.
    #[arg(long, default_value_t = 0.01)]
    reg: f64,
    /// Curve table to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineAlgo {
    Als,
    Bpr,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    algo: BaselineAlgo,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// ALS factor rank.
    #[arg(long, default_value_t = 10)]
    rank: usize,
    /// BPR latent dimension.
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Training iterations (default 10 for ALS, 20 for BPR).
    #[arg(long)]
    iterations: Option<usize>,
    /// ALS ridge penalty.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// BPR learning rate.
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// BPR L2 regularization.
    #[arg(long, default_value_t = 0.01)]
    reg: f64,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Write through a sibling temp file and rename over `path`.
fn write_atomic<F>(path: &Path, write: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        write(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn prepare(data: &DataArgs, split: &SplitArgs) -> anyhow::Result<PreparedData> {
    let prepared = PreparedData::load(
        data.dataset.into(),
        &data.path,
        data.norm.map(Into::into),
        split.split,
        split.seed,
    )?;
    log::info!(
        "{}: {} train / {} test ratings",
        prepared.label,
        prepared.train.len(),
        prepared.test.len()
    );
    Ok(prepared)
}

fn save_report(path: Option<&Path>, report: &matrec_core::EvalReport) -> anyhow::Result<()> {
    if let Some(p) = path {
        write_atomic(p, |w| report.write_table(w))?;
    }
    Ok(())
}

fn save_model(path: &Path, model: &SavedModel) -> anyhow::Result<()> {
    write_atomic(path, |w| write_model(model, w))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(args) => {
            let ds = load_dataset(
                args.data.dataset.into(),
                &args.data.path,
                args.data.norm.map(Into::into),
            )?;
            write_atomic(&args.out, |w| write_canonical(&ds, w))?;
            if args.user_ranks.is_some() || args.item_ranks.is_some() {
                let ranks = compute_ranks(ds.triples())?;
                if let Some(p) = &args.user_ranks {
                    write_atomic(p, |w| ranks.users.write_table(w))?;
                }
                if let Some(p) = &args.item_ranks {
                    write_atomic(p, |w| ranks.items.write_table(w))?;
                }
            }
            println!(
                "dataset={} users={} items={} ratings={}",
                args.data.dataset.to_possible_value().unwrap().get_name(),
                ds.n_users(),
                ds.n_items(),
                ds.len()
            );
        }
        Command::Train(args) => {
            let data = prepare(&args.data, &args.split)?;
            let algo = Algorithm::MatRec(Hyperparams {
                latent_dim: args.hyper.dim,
                learning_rate: args.hyper.lr,
                epochs: args.hyper.epochs,
                seed: args.split.seed,
                norm_epsilon: args.hyper.eps,
            });
            let (model, report) = algo.run(&data)?;
            if let (Some(p), matrec_core::TrainedModel::MatRec(_, trace)) = (&args.trace, &model) {
                write_atomic(p, |w| trace.write_table(w))?;
            }
            save_model(&args.out, &SavedModel::from(model))?;
            save_report(args.report.as_deref(), &report)?;
            println!("{}", report.summary());
        }
        Command::Evaluate(args) => {
            let file = File::open(&args.model)
                .with_context(|| format!("opening {}", args.model.display()))?;
            let model = read_model(BufReader::new(file))?;
            let data = prepare(&args.data, &args.split)?;
            let metadata = matrec_core::RunMetadata {
                dataset: data.label.clone(),
                algorithm: model.kind().to_string(),
                seed: args.split.seed,
                params: vec![("model".into(), file_name(&args.model))],
            };
            let report = evaluate(
                model.as_rating_model(),
                &data.test,
                &data.ranks,
                data.fallback(),
                metadata,
            )?;
            save_report(args.report.as_deref(), &report)?;
            println!("{}", report.summary());
        }
        Command::Sweep(args) => {
            let data = prepare(&args.data, &args.split)?;
            let algo = match args.algo {
                SweepAlgo::Matrec => Algorithm::MatRec(Hyperparams {
                    latent_dim: args.dim,
                    epochs: args.epochs,
                    seed: args.split.seed,
                    ..Hyperparams::default()
                }),
                SweepAlgo::Bpr => Algorithm::Bpr(BprConfig {
                    dim: args.dim,
                    iterations: args.iterations,
                    reg: args.reg,
                    seed: args.split.seed,
                    ..BprConfig::default()
                }),
            };
            let curve = sweep_learning_rate(&algo, &data, &args.lrs, threads()?)?;
            write_atomic(&args.out, |w| curve.write_table(w))?;
            let best = curve.best().expect("non-empty curve");
            println!("{} eta={}", best.report.summary(), best.eta);
        }
        Command::Baseline(args) => {
            let data = prepare(&args.data, &args.split)?;
            let algo = match args.algo {
                BaselineAlgo::Als => Algorithm::Als(AlsConfig {
                    rank: args.rank,
                    iterations: args.iterations.unwrap_or(10),
                    lambda: args.lambda,
                    seed: args.split.seed,
                }),
                BaselineAlgo::Bpr => Algorithm::Bpr(BprConfig {
                    dim: args.dim,
                    iterations: args.iterations.unwrap_or(20),
                    learning_rate: args.lr,
                    reg: args.reg,
                    seed: args.split.seed,
                }),
            };
            let (model, report) = algo.run(&data)?;
            if let matrec_core::TrainedModel::Bpr(_, stats) = &model {
                log::info!(
                    "bpr: {} saturated users skipped, {} negatives not found",
                    stats.saturated_users_skipped,
                    stats.negatives_not_found
                );
            }
            if let Some(p) = &args.out {
                save_model(p, &SavedModel::from(model))?;
            }
            save_report(args.report.as_deref(), &report)?;
            println!("{}", report.summary());
        }
    }
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn threads() -> anyhow::Result<usize> {
    match std::env::var("MATREC_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => bail!("MATREC_THREADS must be a positive integer, got {v:?}"),
        },
        Err(_) => Ok(1),
    }
}

/// Input files that must exist before any work starts.
fn inputs(cmd: &Command) -> Vec<&Path> {
    match cmd {
        Command::Ingest(a) => vec![&a.data.path],
        Command::Train(a) => vec![&a.data.path],
        Command::Evaluate(a) => vec![&a.data.path, &a.model],
        Command::Sweep(a) => vec![&a.data.path],
        Command::Baseline(a) => vec![&a.data.path],
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(missing) = inputs(&cli.command).into_iter().find(|p| !p.is_file()) {
        eprintln!("error: input file not found: {}", missing.display());
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Out-of-range parameters are usage errors, like unparseable ones.
            match e.downcast_ref::<matrec_core::Error>() {
                Some(matrec_core::Error::InvalidArgument(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
