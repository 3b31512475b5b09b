use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no word type survives min_count={min_count}, max_size={max_size}")]
    EmptyVocabulary { min_count: usize, max_size: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix not symmetric: max |A - A^T| entry = {0:.3e}")]
    Asymmetric(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("tscca requires k1 >= k (got k1={k1}, k={k})")]
    RankOrder { k1: usize, k: usize },
    #[error("word not in vocabulary: {0:?}")]
    UnknownWord(String),
    #[error("word {0:?} has an all-zero vector")]
    ZeroVector(String),
    #[error("only {present} of {total} labeled types are covered by the dictionary (need >= 50%)")]
    LowCoverage { present: usize, total: usize },
    #[error("too few word types to split: {0}")]
    TooFewTypes(usize),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("bad cache file: {0}")]
    BadCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
