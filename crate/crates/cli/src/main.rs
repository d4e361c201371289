//! `neural`: the attention-pruning and graph-fusion pipeline as subcommands.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 when an input cannot be
//! read or fails validation. Diagnostics go to stderr; results go to the file
//! named by `--out` or to stdout.

mod corpus;

use std::fmt::Debug;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use neural_core::attention::{aggregate_salience, SalienceVector};
use neural_core::fixtures::{generate_corpus, CorpusConfig};
use neural_core::graphs::{KnowledgeGraph, UnifiedGraphDoc};
use neural_core::metrics::{ablation_sweep, auc, split_ranges, sweep_csv, ScoredLabels, SweepConfig, TextMode};
use neural_core::mpnn::{fit, forward, Architecture, TrainConfig};
use neural_core::patch_grid::{tile_image, VISUAL_FEATURE_DIM};
use neural_core::pipeline::{study_graph, PipelineConfig, DEFAULT_KG_DIM};
use neural_core::pruning::{prune_threshold, prune_topk};
use neural_core::serialization::{decode, encode, size_report};
use neural_core::{MpnnModel, PruningPolicy, UnifiedGraph};
use serde::{Deserialize, Serialize};

use corpus::LabelRow;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (formats: ATTN=1, NRLG=1, NRLM=1)");

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    pub fn data(msg: impl Into<String>) -> Self {
        Failure::Data(msg.into())
    }

    /// A module error about `path`, tagged with its variant path, e.g.
    /// `[Serialization::BadMagic]`.
    pub fn typed(path: &Path, err: impl std::error::Error) -> Self {
        Failure::Data(format!("{}: {err} [{}]", path.display(), variant_path(&format!("{err:?}"))))
    }
}

fn variant_path(debug: &str) -> String {
    let mut parts = Vec::new();
    let mut rest = debug;
    loop {
        let end = rest.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(rest.len());
        let ident = &rest[..end];
        if ident.is_empty() || !ident.starts_with(|c: char| c.is_ascii_uppercase()) {
            break;
        }
        parts.push(ident);
        match rest[end..].strip_prefix('(') {
            Some(inner) => rest = inner,
            None => break,
        }
    }
    parts.join("::")
}

fn core_error(err: neural_core::Error) -> Failure {
    Failure::Data(format!("{err} [{}]", variant_path(&format!("{err:?}"))))
}

pub fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

/// Write to `out`, or to stdout when no file is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => write(path, bytes),
        None => match std::io::stdout().write_all(bytes) {
            // a closed pipe (e.g. `| head`) is the reader's choice, not a failure
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            other => other.map_err(|e| Failure::data(format!("stdout: {e}"))),
        },
    }
}

fn distinct(input: &Path, output: Option<&Path>) -> Result<(), Failure> {
    if output.is_some_and(|o| o == input) {
        return Err(Failure::Usage(format!("--out must differ from the input {}", input.display())));
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Failure::data(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

#[derive(Parser, Debug)]
#[command(name = "neural", version = VERSION, about = "Attention-guided patch pruning, graph fusion and graph classification")]
struct Cli {
    /// Seed for all randomness
    #[arg(long, global = true, env = "NEURAL_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for per-study work
    #[arg(long, global = true, default_value_t = 1, value_parser = parse_jobs)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

fn parse_jobs(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tile a PGM image into patches and print their features as JSON
    Tile {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 8)]
        patch_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sum an attention matrix over tokens into per-patch salience (JSON)
    Salience {
        #[arg(long)]
        attention: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select patches from a salience file
    Prune {
        #[arg(long)]
        salience: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the fused graph of one study, or of every study in a corpus
    Fuse(FuseArgs),
    /// Convert a JSON graph to NRLG
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an NRLG graph to JSON
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print node and edge counts of an NRLG graph
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
    /// Train a classifier on a graph directory
    Train(TrainArgs),
    /// Print the positive probability of each NRLG graph
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Score one split of a graph directory and report its AUC
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        /// Per-study predictions CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic corpus
    Synth(SynthArgs),
    /// Sweep the retained fraction on a corpus and report test AUC per fraction
    Ablation(AblationArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct PolicyArgs {
    /// Keep patches whose salience is strictly above this value
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    /// Keep this fraction of the most salient patches
    #[arg(long = "top-k")]
    top_k: Option<f64>,
}

impl PolicyArgs {
    fn policy(&self) -> Result<PruningPolicy, Failure> {
        match (self.tau, self.top_k) {
            (Some(tau), None) => Ok(PruningPolicy::Threshold { tau }),
            (None, Some(k)) if k > 0.0 && k <= 1.0 => Ok(PruningPolicy::TopK { fraction: k }),
            (None, Some(k)) => Err(Failure::Usage(format!("--top-k must lie in (0, 1], got {k}"))),
            _ => Err(Failure::Usage("exactly one of --tau and --top-k is required".into())),
        }
    }
}

#[derive(Args, Debug)]
struct FuseArgs {
    #[arg(long, required_unless_present = "corpus", requires_all = ["attention", "kg", "out"])]
    image: Option<PathBuf>,
    #[arg(long)]
    attention: Option<PathBuf>,
    #[arg(long)]
    kg: Option<PathBuf>,
    /// Output NRLG file (single study)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Synthetic corpus directory (batch mode)
    #[arg(long, conflicts_with_all = ["image", "attention", "kg", "out"], requires = "out_dir")]
    corpus: Option<PathBuf>,
    /// Output graph directory (batch mode)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 8)]
    patch_size: usize,
    #[arg(long, default_value_t = DEFAULT_KG_DIM)]
    kg_dim: usize,
    #[arg(long, default_value_t = VISUAL_FEATURE_DIM)]
    dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Split {
    All,
    Train,
    Val,
    Test,
}

impl Split {
    fn range(self, count: usize) -> std::ops::Range<usize> {
        let [train, val, test] = split_ranges(count);
        match self {
            Split::All => 0..count,
            Split::Train => train,
            Split::Val => val,
            Split::Test => test,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    graphs: PathBuf,
    /// Output NRLM checkpoint
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 0.03)]
    lr: f64,
    #[arg(long, default_value_t = Architecture::DEFAULT_LAYERS)]
    layers: usize,
    #[arg(long, default_value_t = Architecture::DEFAULT_HIDDEN)]
    hidden: usize,
    #[arg(long, value_enum, default_value_t = Split::Train)]
    split: Split,
    /// Per-epoch mean loss CSV
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 128)]
    image_size: usize,
    #[arg(long, default_value_t = 8)]
    patch_size: usize,
    #[arg(long, default_value_t = neural_core::fixtures::DEFAULT_POSITIVE_RATE)]
    positive_rate: f64,
    #[arg(long, default_value_t = neural_core::fixtures::DEFAULT_TOKENS)]
    tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Text {
    Report,
    Dummy,
}

#[derive(Args, Debug)]
struct AblationArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    fractions: Vec<f64>,
    /// Fuse each study's report graph, or one uninformative node
    #[arg(long, value_enum, default_value_t = Text::Report)]
    text: Text,
    #[arg(long, default_value_t = 8)]
    patch_size: usize,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 0.03)]
    lr: f64,
    #[arg(long, default_value_t = Architecture::DEFAULT_LAYERS)]
    layers: usize,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct SalienceFile {
    scores: Vec<f64>,
}

#[derive(Serialize)]
struct PruneOutput<'a> {
    retained: &'a [usize],
    total: usize,
    policy: PruningPolicy,
    compression: f64,
}

#[derive(Serialize)]
struct GraphStats {
    nodes: usize,
    edges: usize,
    dim: usize,
    visual_nodes: usize,
    text_nodes: usize,
    bridge: (usize, usize),
    bytes: usize,
}

/// Map `f` over `items` on `jobs` threads, keeping input order.
fn par_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> Result<R, Failure> + Sync,
) -> Result<Vec<R>, Failure> {
    if jobs <= 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let f = &f;
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Result<Vec<R>, Failure>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker thread panicked")?);
        }
        Ok(out)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // --help and --version are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (seed, jobs) = (cli.seed, cli.jobs);
    match cli.command {
        Command::Tile { image, patch_size, out } => {
            distinct(&image, out.as_deref())?;
            let img = corpus::read_image(&image)?;
            let grid = tile_image(&img, patch_size).map_err(|e| Failure::typed(&image, e))?;
            let patches: Vec<_> = grid
                .patches()
                .iter()
                .map(|p| serde_json::json!({"index": p.index, "row": p.grid_row, "col": p.grid_col, "feature": p.feature}))
                .collect();
            let doc = serde_json::json!({
                "rows": grid.rows(), "cols": grid.cols(), "patch_size": grid.patch_size(), "patches": patches,
            });
            emit(out.as_deref(), &json(&doc)?)
        }
        Command::Salience { attention, out } => {
            distinct(&attention, out.as_deref())?;
            let a = corpus::read_attention(&attention)?;
            emit(out.as_deref(), &json(&SalienceFile { scores: aggregate_salience(&a).scores().to_vec() })?)
        }
        Command::Prune { salience, policy, out } => {
            distinct(&salience, out.as_deref())?;
            let policy = policy.policy()?;
            let file: SalienceFile = serde_json::from_slice(&read(&salience)?)
                .map_err(|e| Failure::data(format!("{}: {e}", salience.display())))?;
            if let Some(i) = file.scores.iter().position(|s| !s.is_finite()) {
                return Err(Failure::data(format!("{}: score {i} is not finite", salience.display())));
            }
            let s = SalienceVector::new(file.scores);
            let pruned = match policy {
                PruningPolicy::Threshold { tau } => prune_threshold(&s, tau),
                PruningPolicy::TopK { fraction } => {
                    prune_topk(&s, fraction).map_err(|e| Failure::typed(&salience, e))?
                }
            };
            eprintln!("retained {} of {} patches", pruned.len(), pruned.total());
            let doc = PruneOutput {
                retained: pruned.retained(),
                total: pruned.total(),
                policy,
                compression: pruned.compression_ratio(),
            };
            emit(out.as_deref(), &json(&doc)?)
        }
        Command::Fuse(args) => fuse(args, jobs),
        Command::Encode { input, out } => {
            distinct(&input, Some(&out))?;
            let doc: UnifiedGraphDoc<f64> = serde_json::from_slice(&read(&input)?)
                .map_err(|e| Failure::data(format!("{}: {e}", input.display())))?;
            let g = UnifiedGraph::from_doc(doc).map_err(|e| Failure::typed(&input, e))?;
            write(&out, encode(&g).as_bytes())
        }
        Command::Decode { input, out } => {
            distinct(&input, out.as_deref())?;
            let g = corpus::read_graph(&input)?;
            emit(out.as_deref(), &json(&g.to_doc())?)
        }
        Command::Stats { input } => {
            let bytes = read(&input)?;
            let g: UnifiedGraph = decode(&bytes).map_err(|e| Failure::typed(&input, e))?;
            let stats = GraphStats {
                nodes: g.node_count(),
                edges: g.edge_count(),
                dim: g.dim(),
                visual_nodes: g.count_modality(neural_core::graphs::Modality::Visual),
                text_nodes: g.count_modality(neural_core::graphs::Modality::Text),
                bridge: g.bridge(),
                bytes: bytes.len(),
            };
            emit(None, &json(&stats)?)
        }
        Command::Train(args) => train(args, seed),
        Command::Classify { model, inputs } => {
            let m = read_model(&model)?;
            let mut out = String::new();
            for path in &inputs {
                let g = corpus::read_graph(path)?;
                let p = forward(&m, &g).map_err(|e| Failure::typed(path, e))?;
                out.push_str(&format!("{},{p}\n", path.display()));
            }
            emit(None, out.as_bytes())
        }
        Command::Eval { model, graphs, split, out } => {
            let m = read_model(&model)?;
            let all = corpus::load_graphs(&graphs)?;
            let range = split.range(all.len());
            let mut predictions = String::from("id,label,probability\n");
            let mut scored = Vec::with_capacity(range.len());
            for (id, g, label) in &all[range] {
                let p = forward(&m, g).map_err(|e| Failure::data(format!("{id}: {e}")))?;
                predictions.push_str(&format!("{id},{},{p}\n", u8::from(*label)));
                scored.push((p, *label));
            }
            let positives = scored.iter().filter(|s| s.1).count();
            let count = scored.len();
            let value = auc(&scored.into_iter().collect::<ScoredLabels<f64>>())
                .map_err(|e| Failure::data(format!("{split:?} split: {e}")))?;
            if let Some(path) = &out {
                write(path, predictions.as_bytes())?;
            }
            let split = format!("{split:?}").to_lowercase();
            emit(None, format!("split,count,positives,auc\n{split},{count},{positives},{value:.6}\n").as_bytes())
        }
        Command::Synth(args) => synth(args, seed, jobs),
        Command::Ablation(args) => ablation(args, seed),
    }
}

fn read_model(path: &Path) -> Result<MpnnModel, Failure> {
    MpnnModel::from_bytes(&read(path)?).map_err(|e| Failure::typed(path, e))
}

fn pipeline_config(args: &FuseArgs) -> Result<PipelineConfig, Failure> {
    if args.dim == 0 || args.kg_dim == 0 {
        return Err(Failure::Usage("--dim and --kg-dim must be positive".into()));
    }
    Ok(PipelineConfig {
        patch_size: args.patch_size,
        policy: args.policy.policy()?,
        kg_dim: args.kg_dim,
        dim: args.dim,
    })
}

fn fuse(args: FuseArgs, jobs: usize) -> Result<(), Failure> {
    let config = pipeline_config(&args)?;
    if let Some(dir) = &args.corpus {
        let out_dir = args.out_dir.as_ref().expect("clap requires --out-dir with --corpus");
        if out_dir == dir {
            return Err(Failure::Usage("--out-dir must differ from --corpus".into()));
        }
        let studies = corpus::load_corpus(dir)?;
        corpus::ensure_dir(out_dir)?;
        let sizes = par_map(&studies, jobs, |s| {
            let kg = KnowledgeGraph::from_document(&s.kg, config.kg_dim)
                .map_err(|e| Failure::data(format!("{}: {e}", s.id)))?;
            let (g, _) = study_graph(&s.image, &s.attention, &kg, &config)
                .map_err(|e| Failure::data(format!("{}: {e}", s.id)))?;
            let bytes = encode(&g);
            write(&corpus::graph_path(out_dir, &s.id), bytes.as_bytes())?;
            Ok(bytes.len())
        })?;
        let rows: Vec<LabelRow> = studies.iter().map(corpus::study_row).collect();
        corpus::write_labels(out_dir, &rows)?;
        eprintln!("wrote {} graphs, {} bytes", sizes.len(), sizes.iter().sum::<usize>());
        return Ok(());
    }

    let (image, attention, kg, out) = (
        args.image.as_ref().expect("clap enforces"),
        args.attention.as_ref().expect("clap enforces"),
        args.kg.as_ref().expect("clap enforces"),
        args.out.as_ref().expect("clap enforces"),
    );
    for input in [image, attention, kg] {
        distinct(input, Some(out))?;
    }
    let original = read(image)?.len();
    let img = corpus::read_image(image)?;
    let att = corpus::read_attention(attention)?;
    let kg = KnowledgeGraph::from_document(&corpus::read_kg(kg)?, config.kg_dim).map_err(|e| Failure::typed(kg, e))?;
    let (g, pruned) = study_graph(&img, &att, &kg, &config).map_err(core_error)?;
    let encoded = encode(&g);
    write(out, encoded.as_bytes())?;
    emit(None, &json(&size_report(original, &encoded, &pruned))?)
}

fn train(args: TrainArgs, seed: u64) -> Result<(), Failure> {
    distinct(&args.graphs, Some(&args.out))?;
    let all = corpus::load_graphs(&args.graphs)?;
    let range = args.split.range(all.len());
    let data: Vec<(UnifiedGraph, bool)> = all[range].iter().map(|(_, g, l)| (g.clone(), *l)).collect();
    let dim = data.first().map(|d| d.0.dim()).ok_or_else(|| Failure::data("no graphs in the selected split"))?;
    let arch = Architecture::new(args.layers, args.hidden, dim).map_err(|e| Failure::Usage(e.to_string()))?;
    let config = TrainConfig { epochs: args.epochs, learning_rate: args.lr, seed };
    let (model, report) = fit(arch, &data, &config).map_err(|e| match e {
        neural_core::mpnn::MpnnError::InvalidConfig(m) => Failure::Usage(m),
        other => Failure::data(other.to_string()),
    })?;
    write(&args.out, &model.to_bytes())?;
    if let Some(path) = &args.loss_csv {
        let mut csv = String::from("epoch,loss\n");
        for (i, l) in report.epoch_losses.iter().enumerate() {
            csv.push_str(&format!("{},{l}\n", i + 1));
        }
        write(path, csv.as_bytes())?;
    }
    eprintln!(
        "trained on {} graphs; final epoch loss {:.6}",
        data.len(),
        report.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn synth(args: SynthArgs, seed: u64, jobs: usize) -> Result<(), Failure> {
    let config = CorpusConfig {
        seed,
        count: args.count,
        image_size: args.image_size,
        patch_size: args.patch_size,
        positive_rate: args.positive_rate,
        tokens: args.tokens,
    };
    if config.tokens == 0 {
        return Err(Failure::Usage("--tokens must be positive".into()));
    }
    let studies = generate_corpus::<f64>(&config).map_err(|e| Failure::Usage(e.to_string()))?;
    corpus::ensure_dir(&args.out)?;
    par_map(&studies, jobs, |s| corpus::write_study(&args.out, s))?;
    let rows: Vec<LabelRow> = studies.iter().map(corpus::study_row).collect();
    corpus::write_labels(&args.out, &rows)?;
    eprintln!("wrote {} studies ({} positive)", rows.len(), rows.iter().filter(|r| r.label == 1).count());
    Ok(())
}

fn ablation(args: AblationArgs, seed: u64) -> Result<(), Failure> {
    if let Some(k) = args.fractions.iter().find(|&&k| !(k > 0.0 && k <= 1.0)) {
        return Err(Failure::Usage(format!("fractions must lie in (0, 1], got {k}")));
    }
    let studies = corpus::load_corpus(&args.corpus)?;
    let config = SweepConfig {
        patch_size: args.patch_size,
        layers: args.layers,
        hidden: args.hidden,
        train: TrainConfig { epochs: args.epochs, learning_rate: args.lr, seed },
        text: match args.text {
            Text::Report => TextMode::Report,
            Text::Dummy => TextMode::DummyNode,
        },
        ..SweepConfig::default()
    };
    let rows = ablation_sweep(&studies, &args.fractions, &config).map_err(core_error)?;
    emit(args.out.as_deref(), sweep_csv(&rows).as_bytes())
}
