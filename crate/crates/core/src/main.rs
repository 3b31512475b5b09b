//! Batch CLI: build dictionaries, evaluate them against labeled types,
//! query nearest neighbors, and generate synthetic labeled corpora.
//!
//! Exit codes: 0 success, 1 runtime/data error, 2 usage error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eigenwords::corpus::{build_vocabulary, encode, tokenize};
use eigenwords::dictionary::{export_tsv, import_tsv, nearest_neighbors, normalize_rows};
use eigenwords::eval::{evaluate, synth_hmm_corpus, EvalProtocol, LabeledTypes};
use eigenwords::pipeline::{build_dictionary, Method, PipelineConfig};

#[derive(Parser)]
#[command(name = "eigenwords", version, about = "Spectral eigenword dictionaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a dictionary from a plain-text corpus (one sentence per line)
    BuildDict(BuildDictArgs),
    /// Evaluate a dictionary on labeled word types
    Eval(EvalArgs),
    /// Print nearest neighbors of a word by cosine similarity
    Neighbors(NeighborsArgs),
    /// Generate a synthetic HMM corpus with ground-truth type labels
    Synth(SynthArgs),
}

#[derive(Args)]
struct BuildDictArgs {
    /// Corpus file, UTF-8, one sentence per line
    corpus: PathBuf,
    /// Dictionary method: oscca, tscca, or pca (default tscca)
    #[arg(long)]
    method: Option<String>,
    /// Dictionary dimension (default 50)
    #[arg(long)]
    k: Option<usize>,
    /// First-step dimension for tscca (default 2k)
    #[arg(long)]
    k1: Option<usize>,
    /// Context width per side (default 1)
    #[arg(long)]
    h: Option<usize>,
    /// Ridge coefficient; each whitened view gets ridge * trace/dim (default 1e-3)
    #[arg(long)]
    ridge: Option<f64>,
    /// Step-1 ridge coefficient for tscca (default: same as --ridge)
    #[arg(long)]
    ridge1: Option<f64>,
    /// Count scaling: raw or sqrt (default sqrt)
    #[arg(long)]
    scaling: Option<String>,
    /// Minimum token count for a word type
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    /// Maximum vocabulary size
    #[arg(long, default_value_t = 50_000)]
    max_vocab: usize,
    /// Random seed (required; all randomness funnels through it)
    #[arg(long)]
    seed: u64,
    /// Output dictionary TSV path
    #[arg(long)]
    out: PathBuf,
    /// Also write a unit-l2-row-normalized variant next to --out
    #[arg(long, default_value_t = false)]
    normalize: bool,
    /// Flat key=value config file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dictionary TSV produced by build-dict
    dict: PathBuf,
    /// Labels TSV: word<TAB>label
    labels: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output report CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NeighborsArgs {
    dict: PathBuf,
    word: String,
    /// Number of neighbors
    #[arg(long, default_value_t = 10)]
    m: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    states: usize,
    #[arg(long, default_value_t = 300)]
    vocab: usize,
    #[arg(long, default_value_t = 50_000)]
    tokens: usize,
    /// Dirichlet concentration for emission rows
    #[arg(long, default_value_t = 0.3)]
    emission_conc: f64,
    /// Dirichlet concentration for transition rows
    #[arg(long, default_value_t = 1.0)]
    transition_conc: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_corpus: PathBuf,
    #[arg(long)]
    out_labels: PathBuf,
}

enum CmdError {
    Usage(String),
    Runtime(String),
}

impl From<eigenwords::Error> for CmdError {
    fn from(e: eigenwords::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildDict(args) => cmd_build_dict(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Neighbors(args) => cmd_neighbors(&args),
        Command::Synth(args) => cmd_synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CmdError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn normalized_path(out: &Path) -> PathBuf {
    match (out.file_stem(), out.extension()) {
        (Some(stem), Some(ext)) => out.with_file_name(format!(
            "{}.normalized.{}",
            stem.to_string_lossy(),
            ext.to_string_lossy()
        )),
        _ => {
            let mut p = out.as_os_str().to_owned();
            p.push(".normalized");
            PathBuf::from(p)
        }
    }
}

fn cmd_build_dict(args: &BuildDictArgs) -> Result<(), CmdError> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::from_kv_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = &args.method {
        cfg.method = m
            .parse()
            .map_err(|e: eigenwords::Error| CmdError::Usage(e.to_string()))?;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if args.k1.is_some() {
        cfg.k1 = args.k1;
    }
    if let Some(h) = args.h {
        cfg.h = h;
    }
    if args.ridge.is_some() {
        cfg.ridge = args.ridge;
    }
    if args.ridge1.is_some() {
        cfg.ridge1 = args.ridge1;
    }
    if let Some(s) = &args.scaling {
        cfg.scaling = s
            .parse()
            .map_err(|e: eigenwords::Error| CmdError::Usage(e.to_string()))?;
    }
    cfg.seed = args.seed;
    cfg.validate()
        .map_err(|e| CmdError::Usage(e.to_string()))?;
    if args.min_count < 1 || args.max_vocab < 1 {
        return Err(CmdError::Usage(
            "min-count and max-vocab must be >= 1".into(),
        ));
    }

    let text = std::fs::read_to_string(&args.corpus)?;
    let sentences = tokenize(&text);
    let vocab = build_vocabulary(&sentences, args.min_count, args.max_vocab)?;
    let stream = encode(&sentences, &vocab);
    let dict = build_dictionary(&stream, &vocab, &cfg)?;

    export_tsv(&dict, &args.out)?;
    if args.normalize {
        export_tsv(&normalize_rows(&dict), &normalized_path(&args.out))?;
    }
    write_manifest(args, &cfg, &dict, vocab.size(), stream.n)?;
    println!(
        "wrote {} ({} words x {} dims)",
        args.out.display(),
        dict.v(),
        dict.k()
    );
    Ok(())
}

fn write_manifest(
    args: &BuildDictArgs,
    cfg: &PipelineConfig,
    dict: &eigenwords::dictionary::EigenwordDictionary,
    v: usize,
    n: usize,
) -> Result<(), CmdError> {
    let mut manifest = String::new();
    let _ = writeln!(manifest, "corpus={}", args.corpus.display());
    let _ = writeln!(manifest, "method={}", cfg.method);
    let _ = writeln!(manifest, "k={}", cfg.k);
    if cfg.method == Method::Tscca {
        let _ = writeln!(manifest, "k1={}", cfg.effective_k1());
    }
    let _ = writeln!(manifest, "h={}", cfg.h);
    let _ = writeln!(manifest, "ridge={:.16e}", dict.meta.ridge);
    if let Some(r1) = cfg.ridge1 {
        let _ = writeln!(manifest, "ridge1={r1:.16e}");
    }
    let _ = writeln!(manifest, "scaling={}", cfg.scaling);
    let _ = writeln!(manifest, "min_count={}", args.min_count);
    let _ = writeln!(manifest, "max_vocab={}", args.max_vocab);
    let _ = writeln!(manifest, "seed={}", cfg.seed);
    let _ = writeln!(manifest, "normalize={}", args.normalize);
    let _ = writeln!(manifest, "v={v}");
    let _ = writeln!(manifest, "n={n}");
    let rho: Vec<String> = dict.meta.rho.iter().map(|r| format!("{r:.16e}")).collect();
    let _ = writeln!(manifest, "rho={}", rho.join(","));
    if let Some(rho1) = &dict.meta.rho_step1 {
        let r1: Vec<String> = rho1.iter().map(|r| format!("{r:.16e}")).collect();
        let _ = writeln!(manifest, "rho_step1={}", r1.join(","));
    }
    let mut path = args.out.as_os_str().to_owned();
    path.push(".manifest");
    std::fs::write(PathBuf::from(path), manifest)?;
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CmdError> {
    if !(args.train_frac > 0.0 && args.train_frac < 1.0) {
        return Err(CmdError::Usage("train-frac must be in (0,1)".into()));
    }
    if args.repeats < 1 || args.cv_folds < 2 {
        return Err(CmdError::Usage(
            "repeats must be >= 1 and cv-folds >= 2".into(),
        ));
    }
    let dict = import_tsv(&args.dict)?;
    let labels = LabeledTypes::load_tsv(&args.labels)?;
    let protocol = EvalProtocol {
        train_fraction: args.train_frac,
        repeats: args.repeats,
        cv_folds: args.cv_folds,
        seed: args.seed,
        ..Default::default()
    };
    let report = evaluate(&dict, &labels, &protocol)?;
    std::fs::write(&args.out, report.to_csv())?;
    println!(
        "accuracy {:.4} +/- {:.4} over {} repeats ({} labeled types dropped)",
        report.mean, report.std, report.repeats, report.dropped
    );
    Ok(())
}

fn cmd_neighbors(args: &NeighborsArgs) -> Result<(), CmdError> {
    if args.m < 1 {
        return Err(CmdError::Usage("m must be >= 1".into()));
    }
    let dict = import_tsv(&args.dict)?;
    let nn = nearest_neighbors(&dict, &args.word, args.m)?;
    for (word, sim) in nn {
        println!("{word}\t{sim:.6}");
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CmdError> {
    let (corpus, labels, _) = synth_hmm_corpus(
        args.states,
        args.vocab,
        args.tokens,
        args.emission_conc,
        args.transition_conc,
        args.seed,
    )?;
    std::fs::write(&args.out_corpus, corpus)?;
    labels.save_tsv(&args.out_labels)?;
    println!(
        "wrote {} ({} tokens) and {} ({} types, {} states)",
        args.out_corpus.display(),
        args.tokens,
        args.out_labels.display(),
        args.vocab,
        args.states
    );
    Ok(())
}
