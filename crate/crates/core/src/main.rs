use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use defake_core::data::{generate_synthetic, load_dataset, SynthConfig};
use defake_core::detect::{gradcheck_random, infer, train_epoch, LayerNorms, ModelState, TrainConfig, Variant};
use defake_core::error::{Error, Result};
use defake_core::eval::{compute_metrics, format_table, run_experiment_on, split_nodes, Metrics, Split, SplitSpec, PRESAMPLE_CACHE};
use defake_core::graph::{DualLayerGraph, Label, FAKE};
use defake_core::nn::GradCheckOptions;
use defake_core::sampler::{compute_coefficients, load_or_estimate, NormalizationCoefficients};

#[derive(Parser)]
#[command(name = "defake", version, about = "User-aware fake news detection on dual-layer news/user graphs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for synthesis, initialization, sampling and splits.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training configuration as JSON; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// defake, udefake or us-defake.
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// Random-walk roots per layer and subgraph.
    #[arg(long, global = true)]
    roots: Option<usize>,
    /// Random-walk steps.
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Hidden and embedding width.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Subgraphs drawn to estimate inclusion probabilities.
    #[arg(long, global = true)]
    presample_rounds: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset bundle.
    Synth(SynthArgs),
    /// Estimate sampling probabilities and cache them next to the dataset.
    Presample {
        #[arg(long)]
        data: PathBuf,
        /// Cache file (default: <data>/presample.cache).
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Train on one split, writing checkpoints and a JSONL loss log.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Score a checkpoint on the test part of a split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split file written by `train` (default: <checkpoint dir>/split.json).
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Repeated-split experiment with mean and spread of each metric.
    Experiment {
        #[arg(long)]
        data: PathBuf,
        /// JSON report destination.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
        /// Comma-separated variants (default: the configured one).
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
    },
    /// Finite-difference check of the joint loss in 64-bit arithmetic.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        news: usize,
        #[arg(long, default_value_t = 8)]
        users: usize,
        /// Attribute width; also the model width unless --dim is given.
        #[arg(long, default_value_t = 6)]
        attr_dim: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
        #[arg(long, default_value_t = 100)]
        coords: usize,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Generator settings as JSON; flags override its fields.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    sources: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    news_signal: Option<f64>,
    #[arg(long)]
    user_signal: Option<f64>,
    #[arg(long)]
    fidelity: Option<f64>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    test_frac: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

#[derive(Serialize, Deserialize)]
struct SplitFile {
    spec: SplitSpec,
    fold: usize,
    split: Split,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

impl Global {
    fn train_config(&self) -> Result<TrainConfig> {
        let mut c: TrainConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => TrainConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
            c.sampler.seed = s;
        }
        if let Some(v) = self.variant {
            c.variant = v;
        }
        if let Some(r) = self.roots {
            c.sampler.roots = r;
        }
        if let Some(d) = self.depth {
            c.sampler.depth = d;
        }
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        if let Some(lr) = self.lr {
            c.lr = lr;
        }
        if let Some(d) = self.dim {
            c.model.dim = d;
        }
        if let Some(r) = self.presample_rounds {
            c.sampler.presample_rounds = r;
        }
        c.validate()?;
        Ok(c)
    }
}

impl SplitArgs {
    fn spec(&self, seed: u64) -> Result<SplitSpec> {
        let spec = SplitSpec {
            train: self.train_frac,
            val: self.val_frac,
            test: self.test_frac,
            folds: self.folds,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn coefficients(graph: &DualLayerGraph, config: &TrainConfig, cache: &Path) -> Result<NormalizationCoefficients> {
    let probs = load_or_estimate(graph, &config.sampler, cache)?;
    compute_coefficients(&probs, graph)
}

fn labeled_sources(graph: &DualLayerGraph) -> (Vec<usize>, Vec<Label>) {
    let ids: Vec<usize> = graph
        .news
        .source_nodes()
        .into_iter()
        .filter(|&i| graph.news.labels[i].is_some())
        .collect();
    let labels = ids.iter().map(|&i| graph.news.labels[i].expect("filtered")).collect();
    (ids, labels)
}

fn score(graph: &DualLayerGraph, norms: &LayerNorms, state: &ModelState, nodes: &[usize]) -> Result<Metrics> {
    let inference = infer(graph, norms, &state.model, state.config.variant)?;
    let truth: Vec<Label> = nodes.iter().map(|&i| graph.news.labels[i].expect("labeled source")).collect();
    compute_metrics(&inference.labels_at(nodes), &truth, FAKE)
}

fn synth(global: &Global, args: &SynthArgs) -> Result<()> {
    let mut c: SynthConfig = match &args.params {
        Some(path) => read_json(path)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = global.seed {
        c.seed = s;
    }
    if let Some(n) = args.sources {
        c.n_source_news = n;
    }
    if let Some(n) = args.users {
        c.n_users = n;
        c.n_credible_users = n / 2;
    }
    if let Some(v) = args.news_signal {
        c.news_signal_strength = v;
    }
    if let Some(v) = args.user_signal {
        c.user_signal_strength = v;
    }
    if let Some(v) = args.fidelity {
        c.posting_fidelity = v;
    }
    fs::create_dir_all(&args.out)?;
    let g = generate_synthetic(&c, &args.out)?;
    println!(
        "wrote {}: {} news ({} sources), {} users, {} posting edges",
        args.out.display(),
        g.news.node_count(),
        g.news.source_nodes().len(),
        g.users.node_count(),
        g.inter_edges().len()
    );
    Ok(())
}

fn presample(global: &Global, data: &Path, cache: Option<&Path>) -> Result<()> {
    let config = global.train_config()?;
    let graph = load_dataset(data)?;
    let cache = cache.map_or_else(|| data.join(PRESAMPLE_CACHE), Path::to_path_buf);
    let coeffs = coefficients(&graph, &config, &cache)?;
    for (name, layer) in [("news", &coeffs.news), ("users", &coeffs.users)] {
        let unseen = layer.alpha.iter().filter(|a| a.is_none()).count();
        let (lo, hi) = layer
            .lambda
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
        println!(
            "{name}: lambda in [{lo:.4}, {hi:.4}], {unseen} of {} arcs never co-sampled",
            layer.alpha.len()
        );
    }
    println!("cache: {}", cache.display());
    Ok(())
}

fn train(global: &Global, data: &Path, out: &Path, split_args: &SplitArgs, fold: usize) -> Result<()> {
    let config = global.train_config()?;
    let graph = load_dataset(data)?;
    let coeffs = coefficients(&graph, &config, &data.join(PRESAMPLE_CACHE))?;
    let norms = LayerNorms::new(&graph);
    let spec = split_args.spec(global.seed.unwrap_or(0))?;
    let (ids, labels) = labeled_sources(&graph);
    let split = split_nodes(&ids, &labels, &spec, fold)?;
    fs::create_dir_all(out)?;
    write_json(
        &out.join("split.json"),
        &SplitFile {
            spec,
            fold,
            split: split.clone(),
        },
    )?;

    let source_of = graph.cascade_sources()?;
    let mut in_train = vec![false; graph.news.node_count()];
    split.train.iter().for_each(|&s| in_train[s] = true);
    let trainable: Vec<bool> = source_of.iter().map(|&s| in_train[s]).collect();

    let mut state = ModelState::new(config.clone(), graph.news.attr_dim(), graph.users.attr_dim())?;
    let mut log = BufWriter::new(File::create(out.join("train.jsonl"))?);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..config.epochs {
        let mut write_error = None;
        let summary = train_epoch(&graph, &norms, &coeffs, &mut state, &trainable, &mut |r| {
            if let Err(e) = serde_json::to_string(r).map(|line| writeln!(log, "{line}")) {
                write_error.get_or_insert(e.to_string());
            }
        })?;
        if let Some(e) = write_error {
            return Err(Error::InvalidInput(format!("cannot serialize loss record: {e}")));
        }
        log.flush()?;
        state.save(&out.join("last.ckpt"))?;
        let val = if split.val.is_empty() {
            None
        } else {
            Some(score(&graph, &norms, &state, &split.val)?.accuracy)
        };
        if let Some(acc) = val.filter(|&a| a > best) {
            best = acc;
            state.save(&out.join("best.ckpt"))?;
        }
        println!(
            "epoch {:>3}  L {:.5}  L_t {:.5}  L_u {:.5}  val acc {}",
            summary.epoch,
            summary.mean_loss,
            summary.mean_l_t,
            summary.mean_l_u,
            val.map_or("-".to_string(), |a| format!("{a:.4}"))
        );
    }
    if split.val.is_empty() {
        fs::copy(out.join("last.ckpt"), out.join("best.ckpt"))?;
    }
    if state.missing_alpha > 0 {
        log::warn!("{} sampled arcs used the alpha = 1 fallback", state.missing_alpha);
    }
    println!("checkpoints: {}", out.display());
    Ok(())
}

fn eval(data: &Path, checkpoint: &Path, split: Option<&Path>) -> Result<()> {
    let state = ModelState::load(checkpoint)?;
    let graph = load_dataset(data)?;
    let split_path = match split {
        Some(p) => p.to_path_buf(),
        None => checkpoint.parent().unwrap_or(Path::new(".")).join("split.json"),
    };
    let split: SplitFile = read_json(&split_path)?;
    if split.split.test.is_empty() {
        return Err(Error::Config("the split has no test nodes".into()));
    }
    if let Some(&bad) = split
        .split
        .test
        .iter()
        .find(|&&i| i >= graph.news.node_count() || graph.news.labels[i].is_none())
    {
        return Err(Error::Data(format!("split node {bad} is not a labeled news node of this dataset")));
    }
    let norms = LayerNorms::new(&graph);
    let metrics = score(&graph, &norms, &state, &split.split.test)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn experiment(global: &Global, data: &Path, out: Option<&Path>, split_args: &SplitArgs, variants: &[Variant]) -> Result<()> {
    let config = global.train_config()?;
    let spec = split_args.spec(global.seed.unwrap_or(0))?;
    let graph = load_dataset(data)?;
    let coeffs = coefficients(&graph, &config, &data.join(PRESAMPLE_CACHE))?;
    let variants = if variants.is_empty() {
        vec![config.variant]
    } else {
        variants.to_vec()
    };
    let mut reports = Vec::with_capacity(variants.len());
    for v in variants {
        let mut c = config.clone();
        c.variant = v;
        reports.push(run_experiment_on(&graph, &coeffs, &c, &spec).map_err(|e| e.context(v.name()))?);
    }
    print!("{}", format_table(&reports));
    if let Some(path) = out {
        write_json(path, &reports)?;
    }
    Ok(())
}

fn gradcheck(global: &Global, cmd: &Command) -> Result<()> {
    let Command::Gradcheck {
        news,
        users,
        attr_dim,
        layers,
        tolerance,
        coords,
    } = *cmd
    else {
        unreachable!()
    };
    if global.dim.is_some_and(|d| d != attr_dim) {
        log::info!("gradcheck uses one width for attributes and layers; --attr-dim {attr_dim} wins");
    }
    let variant = global.variant.unwrap_or(Variant::UsDeFake);
    let opts = GradCheckOptions {
        coords_per_param: coords,
        seed: global.seed.unwrap_or(0),
        ..GradCheckOptions::default()
    };
    let report = gradcheck_random(news, users, attr_dim, layers, variant, global.seed.unwrap_or(0), &opts)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.max_rel_error >= tolerance {
        return Err(Error::Numeric(format!(
            "max relative error {:.3e} is not below {tolerance:.1e}",
            report.max_rel_error
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Synth(args) => synth(g, args),
        Command::Presample { data, cache } => presample(g, data, cache.as_deref()),
        Command::Train { data, out, split, fold } => train(g, data, out, split, *fold),
        Command::Eval { data, checkpoint, split } => eval(data, checkpoint, split.as_deref()),
        Command::Experiment {
            data,
            out,
            split,
            variants,
        } => experiment(g, data, out.as_deref(), split, variants),
        cmd @ Command::Gradcheck { .. } => gradcheck(g, cmd),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
