//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::bipartite::CostVariant;
use crate::dataset::{
    generate_synthetic_sized, ground_truth, label_pairs, load_corpus, split_corpus, training_pairs, Corpus,
    DatasetError, LabelPolicy, LabelSet, Split, DEFAULT_RATIOS,
};
use crate::eval::{
    benchmark_time, rank_query, run_eval, write_matrix_csv, write_rankings_csv, write_report_csv,
    write_timing_csv, EvalConfig, EvalError, MetricsReport, MetricsRow, Scorer,
};
use crate::ged::GedError;
use crate::graph::Graph;
use crate::model::{train_on_split, Model, ModelConfig, ModelError, PreparedGraph, TrainConfig};
use crate::nn::{AdamConfig, NnError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_COMPUTE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("compute error: {0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::OracleFailure { .. } => CliError::Compute(e.to_string()),
            DatasetError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GedError> for CliError {
    fn from(e: GedError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Checkpoint(_) => CliError::Data(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Dataset(d) => d.into(),
            ModelError::Nn(n) => n.into(),
            ModelError::Graph(_) | ModelError::MissingLabel(..) | ModelError::Io(_) => CliError::Data(e.to_string()),
            ModelError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            ModelError::EmptyTrainingSet | ModelError::DivergenceDetected(_) => CliError::Compute(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Ged(g) => g.into(),
            EvalError::Model(m) => m.into(),
            EvalError::Dataset(d) => d.into(),
            EvalError::KTooLarge { .. } => CliError::Usage(e.to_string()),
            EvalError::LengthMismatch { .. } | EvalError::DegenerateInput => CliError::Compute(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "graphsim", version, about = "Graph edit distance solvers and a learned graph similarity model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled corpus (JSONL).
    Gen(GenArgs),
    /// Compute ground-truth GEDs for the training, validation and test pairs.
    Label(LabelArgs),
    /// Train a similarity model.
    Train(TrainArgs),
    /// Score test queries against the database and report metrics.
    Eval(EvalArgs),
    /// Rank the database for a single query.
    Rank(RankArgs),
    /// Time scoring methods on synthetic pairs of a fixed size.
    Bench(BenchArgs),
    /// Compare single-scale pad / resize variants with the full model.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 2)]
    pub min_nodes: usize,
    #[arg(long, default_value_t = 8)]
    pub max_nodes: usize,
    /// Number of distinct node labels.
    #[arg(long, default_value_t = 4)]
    pub labels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Corpus, labels and split shared by the data-driven commands.
#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Ground-truth cache written by `label`.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Cache file; existing entries are reused and new ones appended.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Exact)]
    pub policy: PolicyArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Exact,
    MinUpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Gsimcnn,
    Embavg,
    L1Pad,
    L1Resize,
}

impl ModelArg {
    fn config(self, input_dim: usize) -> ModelConfig {
        match self {
            ModelArg::Gsimcnn => ModelConfig::gsimcnn(input_dim),
            ModelArg::Embavg => ModelConfig::embavg(input_dim),
            ModelArg::L1Pad => ModelConfig::l1_pad(input_dim),
            ModelArg::L1Resize => ModelConfig::l1_resize(input_dim),
        }
    }
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub eval_every: usize,
    /// Seeds weight initialization and batch shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl HyperArgs {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            iterations: self.iterations,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            eval_every: self.eval_every,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = ModelArg::Gsimcnn)]
    pub model: ModelArg,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Output directory for config.json, params.json and history.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Groundtruth,
    Constant,
    Hungarian,
    Vj,
    Beam,
    Astar,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Plain,
    DegreeEnriched,
}

impl From<VariantArg> for CostVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Plain => CostVariant::Plain,
            VariantArg::DegreeEnriched => CostVariant::DegreeEnriched,
        }
    }
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    /// Non-learned methods to score with.
    #[arg(long = "method", value_enum, value_delimiter = ',')]
    pub methods: Vec<MethodArg>,
    /// Trained model directories to score with.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub beam_width: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::DegreeEnriched)]
    pub cost_variant: VariantArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub methods: MethodArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Write NA instead of wall times so reports are reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Output directory for report.csv and per-method rankings.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub methods: MethodArgs,
    #[arg(long)]
    pub query: String,
    /// Ranking CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every interaction matrix of the model as CSV here.
    #[arg(long)]
    pub dump_matrices: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 20)]
    pub pairs: usize,
    #[arg(long, default_value_t = 12)]
    pub nodes: usize,
    #[arg(long, default_value_t = 4)]
    pub labels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub methods: MethodArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Reuse an already trained full model instead of training one.
    #[arg(long)]
    pub full_model: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub no_timing: bool,
    /// Output directory for ablation.csv and the trained variants.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Label(a) => label(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Rank(a) => rank(a),
        Command::Bench(a) => bench(a),
        Command::Ablate(a) => ablate(a),
    }
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    let corpus = generate_synthetic_sized(a.count, a.min_nodes, a.max_nodes, a.labels, a.seed)?;
    corpus.save(&a.out)?;
    println!("wrote {} graphs to {}", corpus.len(), a.out.display());
    Ok(())
}

fn label(a: LabelArgs) -> Result<(), CliError> {
    let corpus = read_corpus(&a.corpus)?;
    let split = split_corpus(&corpus, DEFAULT_RATIOS, a.split_seed)?;
    let policy = match a.policy {
        PolicyArg::Exact => LabelPolicy::Exact,
        PolicyArg::MinUpperBound => LabelPolicy::MinUpperBound,
    };
    let (pairs, _) = label_pairs(&split, &corpus, |x, y| ground_truth(policy, x, y), Some(&a.out))?;
    println!("{} labeled pairs in {}", pairs.len(), a.out.display());
    Ok(())
}

struct Data {
    corpus: Corpus,
    split: Split,
    labels: LabelSet,
}

fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    load_corpus(path).map_err(|e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_data(a: &DataArgs) -> Result<Data, CliError> {
    let corpus = read_corpus(&a.corpus)?;
    let split = split_corpus(&corpus, DEFAULT_RATIOS, a.split_seed)?;
    if !a.labels.exists() {
        return Err(CliError::Data(format!("label file {} not found", a.labels.display())));
    }
    let labels = LabelSet::load_cache(&a.labels)?;
    Ok(Data { corpus, split, labels })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn write_history(path: &Path, outcome: &crate::model::TrainOutcome) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(e.to_string()))?;
    let mut write = |rec: [String; 3]| w.write_record(rec).map_err(|e| CliError::Data(e.to_string()));
    write(["iteration".into(), "train_loss".into(), "val_loss".into()])?;
    for h in &outcome.history {
        write([h.iteration.to_string(), h.train_loss.to_string(), h.val_loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn train_and_save(data: &Data, config: ModelConfig, hyper: &HyperArgs, out: &Path) -> Result<Model, CliError> {
    let name = config.method_name();
    let outcome = train_on_split(config, &data.corpus, &data.split, &data.labels, &hyper.train_config())?;
    create_dir(out)?;
    outcome.model.save(out)?;
    write_history(&out.join("history.csv"), &outcome)?;
    if let (Some(best), Some(last)) = (outcome.best_iteration, outcome.history.last()) {
        let best_val = outcome
            .history
            .iter()
            .find(|h| h.iteration == best)
            .map_or(last.val_loss, |h| h.val_loss);
        eprintln!("{name}: best validation loss {best_val:.6} at iteration {best}");
    }
    Ok(outcome.model)
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let data = load_data(&a.data)?;
    let config = a
        .model
        .config(data.corpus.vocab().feature_dim())
        .with_seed(a.hyper.seed);
    train_and_save(&data, config, &a.hyper, &a.out)?;
    println!("saved model to {}", a.out.display());
    Ok(())
}

/// Mean ground-truth similarity over the labeled training pairs.
fn training_mean(data: &Data) -> Result<f64, CliError> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (x, y) in training_pairs(&data.split) {
        if let Some(p) = data.labels.labeled(&data.corpus, &x, &y)? {
            total += p.sim;
            n += 1;
        }
    }
    if n == 0 {
        return Err(CliError::Data("no labeled training pairs".into()));
    }
    Ok(total / n as f64)
}

fn load_models(dirs: &[PathBuf]) -> Result<Vec<Model>, CliError> {
    dirs.iter().map(|d| Model::load(d).map_err(CliError::from)).collect()
}

/// Scorers for the requested methods followed by the loaded models.
fn scorers<'a>(
    m: &MethodArgs,
    data: Option<&'a Data>,
    models: &'a [Model],
    vocab: &'a crate::graph::Vocab,
) -> Result<Vec<Scorer<'a>>, CliError> {
    let variant = CostVariant::from(m.cost_variant);
    let mut out = Vec::new();
    for method in &m.methods {
        out.push(match method {
            MethodArg::Groundtruth => Scorer::GroundTruth(
                &data
                    .ok_or_else(|| CliError::Usage("groundtruth needs a labeled corpus".into()))?
                    .labels,
            ),
            MethodArg::Constant => Scorer::Constant(training_mean(
                data.ok_or_else(|| CliError::Usage("constant needs a labeled corpus".into()))?,
            )?),
            MethodArg::Hungarian => Scorer::Hungarian(variant),
            MethodArg::Vj => Scorer::JonkerVolgenant(variant),
            MethodArg::Beam => Scorer::Beam(m.beam_width),
            MethodArg::Astar => Scorer::Astar,
        });
    }
    for model in models {
        if model.config.input_dim != vocab.feature_dim() {
            return Err(CliError::Data(format!(
                "model expects {} input features, corpus vocabulary has {}",
                model.config.input_dim,
                vocab.feature_dim()
            )));
        }
        out.push(Scorer::Model(model, vocab));
    }
    if out.is_empty() {
        return Err(CliError::Usage("give at least one --method or --model".into()));
    }
    Ok(out)
}

fn evaluate_all(
    data: &Data,
    scorers: &[Scorer<'_>],
    config: &EvalConfig,
    out: &Path,
) -> Result<MetricsReport, CliError> {
    create_dir(out)?;
    let mut rows = Vec::new();
    for scorer in scorers {
        let (row, rankings) = run_eval(&data.corpus, &data.split, &data.labels, scorer, config)?;
        write_rankings_csv(&rankings, &out.join(format!("rankings_{}.csv", row.method)))?;
        rows.push(row);
    }
    Ok(MetricsReport { k: config.k, rows })
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let data = load_data(&a.data)?;
    let models = load_models(&a.methods.models)?;
    let scorers = scorers(&a.methods, Some(&data), &models, data.corpus.vocab())?;
    let config = EvalConfig {
        k: a.k,
        record_time: !a.no_timing,
    };
    let report = evaluate_all(&data, &scorers, &config, &a.out)?;
    write_report_csv(&report, &a.out.join("report.csv"))?;
    print!("{report}");
    Ok(())
}

fn rank(a: RankArgs) -> Result<(), CliError> {
    let data = load_data(&a.data)?;
    data.corpus.get(&a.query)?;
    let models = load_models(&a.methods.models)?;
    let scorers = scorers(&a.methods, Some(&data), &models, data.corpus.vocab())?;
    if scorers.len() != 1 {
        return Err(CliError::Usage("rank takes exactly one --method or --model".into()));
    }
    let database: Vec<String> = data
        .split
        .database()
        .into_iter()
        .filter(|id| *id != a.query)
        .collect();
    let result = rank_query(&data.corpus, &a.query, &database, &data.labels, &scorers[0])?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_rankings_csv(std::slice::from_ref(&result), &a.out)?;
    for (i, id) in result.db_ids.iter().take(10).enumerate() {
        println!("{:>3} {id} pred {:.4} true {:.4}", i + 1, result.pred[i], result.truth[i]);
    }
    if let Some(dir) = &a.dump_matrices {
        let Some(model) = models.first() else {
            return Err(CliError::Usage("--dump-matrices needs a --model".into()));
        };
        create_dir(dir)?;
        let vocab = data.corpus.vocab();
        let query = PreparedGraph::new(data.corpus.get(&a.query)?, vocab)?;
        for db in &result.db_ids {
            let other = PreparedGraph::new(data.corpus.get(db)?, vocab)?;
            for (scale, matrix) in model.interaction_matrices(&query, &other)? {
                write_matrix_csv(&matrix, &dir.join(format!("{}__{db}__s{scale}.csv", a.query)))?;
            }
        }
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), CliError> {
    if a.pairs == 0 {
        return Err(CliError::Usage("--pairs must be positive".into()));
    }
    let corpus = generate_synthetic_sized(2 * a.pairs, a.nodes, a.nodes, a.labels, a.seed)?;
    let graphs: &[Graph] = corpus.graphs();
    let pairs: Vec<(&Graph, &Graph)> = graphs.chunks_exact(2).map(|c| (&c[0], &c[1])).collect();
    let models = load_models(&a.methods.models)?;
    if a.methods.methods.contains(&MethodArg::Groundtruth) || a.methods.methods.contains(&MethodArg::Constant) {
        return Err(CliError::Usage("bench times solver methods and models only".into()));
    }
    let scorers = scorers(&a.methods, None, &models, corpus.vocab())?;
    let rows = benchmark_time(&scorers, &pairs)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_timing_csv(&rows, &a.out)?;
    for r in &rows {
        println!("{:<12} mean {:>10.4} ms  median {:>10.4} ms", r.method, r.mean_ms, r.median_ms);
    }
    Ok(())
}

/// Row names of the ablation table.
pub const ABLATION_ROWS: [&str; 3] = ["GSimCNN-L1-Pad", "GSimCNN-L1-Resize", "GSimCNN"];

fn ablate(a: AblateArgs) -> Result<(), CliError> {
    let data = load_data(&a.data)?;
    let dim = data.corpus.vocab().feature_dim();
    let config = EvalConfig {
        k: a.k,
        record_time: !a.no_timing,
    };
    create_dir(&a.out)?;
    let variants = [ModelArg::L1Pad, ModelArg::L1Resize, ModelArg::Gsimcnn];
    let mut rows = Vec::new();
    for (name, variant) in ABLATION_ROWS.iter().zip(variants) {
        let model = match (&a.full_model, variant) {
            (Some(dir), ModelArg::Gsimcnn) => Model::load(dir)?,
            _ => {
                let cfg = variant.config(dim).with_seed(a.hyper.seed);
                train_and_save(&data, cfg, &a.hyper, &a.out.join(name.to_lowercase()))?
            }
        };
        let scorer = Scorer::Model(&model, data.corpus.vocab());
        let (row, _) = run_eval(&data.corpus, &data.split, &data.labels, &scorer, &config)?;
        rows.push(MetricsRow {
            method: name.to_string(),
            ..row
        });
    }
    let report = MetricsReport { k: a.k, rows };
    write_report_csv(&report, &a.out.join("ablation.csv"))?;
    print!("{report}");
    Ok(())
}
