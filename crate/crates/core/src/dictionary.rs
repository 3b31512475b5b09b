//! Eigenword dictionary storage, row normalization, TSV persistence and
//! cosine nearest-neighbor queries.
//!
//! TSV format, versioned by its header line:
//!
//! ```text
//! #eigenwords v=<v> k=<k> method=<m> h=<h> k1=<k1|-> ridge=<r> scaling=<s> seed=<s> n=<n> normalized=<0|1>
//! word<TAB>v1<TAB>...<TAB>vk
//! ```
//!
//! Values are printed with 17 significant digits so the matrix round-trips
//! bitwise.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryMetadata {
    pub method: String,
    pub h: usize,
    pub k1: Option<usize>,
    pub ridge: f64,
    pub scaling: String,
    pub seed: u64,
    /// Corpus token count the dictionary was trained on.
    pub n: usize,
    pub normalized: bool,
    /// Canonical correlations of the defining decomposition (singular values
    /// for the PCA baseline). Not persisted in the TSV; see the run manifest.
    pub rho: Vec<f64>,
    /// First-step correlations for the two-step method.
    pub rho_step1: Option<Vec<f64>>,
}

/// v×k matrix of word-type vectors, row-aligned with `words`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenwordDictionary {
    pub words: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub meta: DictionaryMetadata,
}

impl EigenwordDictionary {
    pub fn v(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.words.iter().position(|w| w == word)
    }

    pub fn row(&self, id: usize) -> Vec<f64> {
        self.matrix.row(id).iter().copied().collect()
    }
}

/// Divide each nonzero row by its l2 norm; zero rows pass through unchanged.
/// Idempotent.
pub fn normalize_rows(d: &EigenwordDictionary) -> EigenwordDictionary {
    let mut m = d.matrix.clone();
    for i in 0..m.nrows() {
        let norm: f64 = m.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for j in 0..m.ncols() {
                m[(i, j)] /= norm;
            }
        }
    }
    let mut meta = d.meta.clone();
    meta.normalized = true;
    EigenwordDictionary {
        words: d.words.clone(),
        matrix: m,
        meta,
    }
}

pub fn export_tsv(d: &EigenwordDictionary, path: &Path) -> Result<()> {
    std::fs::write(path, to_tsv_string(d))?;
    Ok(())
}

pub fn to_tsv_string(d: &EigenwordDictionary) -> String {
    let mut out = String::new();
    let k1 = d
        .meta
        .k1
        .map(|x| x.to_string())
        .unwrap_or_else(|| "-".into());
    let _ = writeln!(
        out,
        "#eigenwords v={} k={} method={} h={} k1={} ridge={:.16e} scaling={} seed={} n={} normalized={}",
        d.v(),
        d.k(),
        d.meta.method,
        d.meta.h,
        k1,
        d.meta.ridge,
        d.meta.scaling,
        d.meta.seed,
        d.meta.n,
        if d.meta.normalized { 1 } else { 0 },
    );
    for (i, w) in d.words.iter().enumerate() {
        out.push_str(w);
        for j in 0..d.k() {
            let _ = write!(out, "\t{:.16e}", d.matrix[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn import_tsv(path: &Path) -> Result<EigenwordDictionary> {
    let text = std::fs::read_to_string(path)?;
    let p = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: p.clone(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let meta = parse_header(header, &p)?;
    let mut words = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut k: Option<usize> = None;
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let word = fields.next().unwrap().to_string();
        if seen.insert(word.clone(), idx).is_some() {
            return Err(Error::Parse {
                path: p.clone(),
                line: idx + 1,
                msg: format!("duplicate word {word:?}"),
            });
        }
        let vals: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    path: p.clone(),
                    line: idx + 1,
                    msg: format!("unparseable float {f:?}"),
                })
            })
            .collect::<Result<_>>()?;
        match k {
            None => k = Some(vals.len()),
            Some(kk) if kk != vals.len() => {
                return Err(Error::Parse {
                    path: p.clone(),
                    line: idx + 1,
                    msg: format!("row has {} values, expected {}", vals.len(), kk),
                })
            }
            _ => {}
        }
        words.push(word);
        rows.push(vals);
    }
    let k = k.unwrap_or(0);
    let v = words.len();
    let matrix = DMatrix::from_fn(v, k, |i, j| rows[i][j]);
    Ok(EigenwordDictionary {
        words,
        matrix,
        meta,
    })
}

fn parse_header(header: &str, path: &str) -> Result<DictionaryMetadata> {
    let err = |msg: String| Error::Parse {
        path: path.to_string(),
        line: 1,
        msg,
    };
    let rest = header
        .strip_prefix("#eigenwords ")
        .ok_or_else(|| err("missing #eigenwords header".into()))?;
    let mut kv: HashMap<&str, &str> = HashMap::new();
    for field in rest.split_whitespace() {
        let (key, val) = field
            .split_once('=')
            .ok_or_else(|| err(format!("bad header field {field:?}")))?;
        kv.insert(key, val);
    }
    let get = |key: &str| {
        kv.get(key)
            .copied()
            .ok_or_else(|| err(format!("header missing {key}")))
    };
    let k1 = match get("k1")? {
        "-" => None,
        s => Some(
            s.parse::<usize>()
                .map_err(|_| err(format!("bad k1 {s:?}")))?,
        ),
    };
    Ok(DictionaryMetadata {
        method: get("method")?.to_string(),
        h: get("h")?
            .parse()
            .map_err(|_| err("bad h".into()))?,
        k1,
        ridge: get("ridge")?
            .parse()
            .map_err(|_| err("bad ridge".into()))?,
        scaling: get("scaling")?.to_string(),
        seed: get("seed")?
            .parse()
            .map_err(|_| err("bad seed".into()))?,
        n: get("n")?
            .parse()
            .map_err(|_| err("bad n".into()))?,
        normalized: get("normalized")? == "1",
        rho: Vec::new(),
        rho_step1: None,
    })
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Top-m other words by cosine similarity to `word`, descending, ties broken
/// by vocabulary id. Zero-row candidates are skipped.
pub fn nearest_neighbors(
    d: &EigenwordDictionary,
    word: &str,
    m: usize,
) -> Result<Vec<(String, f64)>> {
    if m < 1 {
        return Err(Error::InvalidParam("m must be >= 1".into()));
    }
    let id = d
        .word_id(word)
        .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
    let query = d.row(id);
    if query.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector(word.to_string()));
    }
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for i in 0..d.v() {
        if i == id {
            continue;
        }
        let row = d.row(i);
        if row.iter().all(|&x| x == 0.0) {
            continue;
        }
        scored.push((i, cosine(&query, &row)));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(m);
    Ok(scored
        .into_iter()
        .map(|(i, s)| (d.words[i].clone(), s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict(words: &[&str], rows: &[&[f64]]) -> EigenwordDictionary {
        let v = words.len();
        let k = rows[0].len();
        EigenwordDictionary {
            words: words.iter().map(|s| s.to_string()).collect(),
            matrix: DMatrix::from_fn(v, k, |i, j| rows[i][j]),
            meta: DictionaryMetadata {
                method: "oscca".into(),
                h: 1,
                k1: None,
                ridge: 1e-3,
                scaling: "sqrt".into(),
                seed: 42,
                n: 100,
                normalized: false,
                rho: vec![0.9, 0.5],
                rho_step1: None,
            },
        }
    }

    #[test]
    fn normalize_three_four_five() {
        let d = dict(&["a", "b"], &[&[3.0, 4.0], &[0.0, 0.0]]);
        let n = normalize_rows(&d);
        assert_eq!(n.matrix[(0, 0)], 0.6);
        assert_eq!(n.matrix[(0, 1)], 0.8);
        assert_eq!(n.matrix[(1, 0)], 0.0);
        assert_eq!(n.matrix[(1, 1)], 0.0);
        assert!(n.meta.normalized);
    }

    #[test]
    fn normalize_idempotent() {
        let d = dict(&["a", "b"], &[&[3.0, 4.0], &[1.0, -1.0]]);
        let once = normalize_rows(&d);
        let twice = normalize_rows(&once);
        assert!((&once.matrix - &twice.matrix).abs().max() < 1e-15);
    }

    #[test]
    fn normalized_rows_unit_norm() {
        let d = dict(&["a", "b"], &[&[0.3, -7.1], &[2.0, 5.0]]);
        let n = normalize_rows(&d);
        for i in 0..2 {
            let norm: f64 = n.matrix.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tsv_roundtrip_bitwise() {
        let d = dict(
            &["alpha", "beta", "gamma"],
            &[
                &[0.1234567890123456, -1.5e-300],
                &[std::f64::consts::PI, 1.0 / 3.0],
                &[0.0, -0.0],
            ],
        );
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("dict.tsv");
        export_tsv(&d, &path).unwrap();
        let back = import_tsv(&path).unwrap();
        assert_eq!(d.words, back.words);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(
                    d.matrix[(i, j)].to_bits(),
                    back.matrix[(i, j)].to_bits(),
                    "entry ({i},{j})"
                );
            }
        }
        assert_eq!(back.meta.method, "oscca");
        assert_eq!(back.meta.h, 1);
        assert_eq!(back.meta.seed, 42);
    }

    #[test]
    fn import_handwritten_file() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.tsv");
        std::fs::write(
            &path,
            "#eigenwords v=2 k=2 method=pca h=1 k1=- ridge=1e-3 scaling=raw seed=0 n=10 normalized=0\n\
             x\t1.5\t-2.0\n\
             y\t0.25\t3.0\n",
        )
        .unwrap();
        let d = import_tsv(&path).unwrap();
        assert_eq!(d.words, vec!["x", "y"]);
        assert_eq!(d.matrix[(0, 0)], 1.5);
        assert_eq!(d.matrix[(1, 1)], 3.0);
    }

    #[test]
    fn import_rejects_ragged_rows() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.tsv");
        std::fs::write(
            &path,
            "#eigenwords v=2 k=2 method=pca h=1 k1=- ridge=1e-3 scaling=raw seed=0 n=10 normalized=0\n\
             x\t1.0\t2.0\n\
             y\t1.0\n",
        )
        .unwrap();
        let err = import_tsv(&path).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn import_rejects_duplicates() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.tsv");
        std::fs::write(
            &path,
            "#eigenwords v=2 k=1 method=pca h=1 k1=- ridge=1e-3 scaling=raw seed=0 n=10 normalized=0\n\
             x\t1.0\nx\t2.0\n",
        )
        .unwrap();
        assert!(import_tsv(&path).is_err());
    }

    #[test]
    fn neighbors_identical_rows_mutual() {
        let d = dict(
            &["a", "b", "c"],
            &[&[1.0, 2.0], &[2.0, 4.0], &[-1.0, 0.5]],
        );
        let nn = nearest_neighbors(&d, "a", 2).unwrap();
        assert_eq!(nn[0].0, "b");
        assert!((nn[0].1 - 1.0).abs() < 1e-12);
        let nn_b = nearest_neighbors(&d, "b", 1).unwrap();
        assert_eq!(nn_b[0].0, "a");
    }

    #[test]
    fn neighbors_excludes_self_and_errors() {
        let d = dict(&["a", "b"], &[&[1.0, 0.0], &[0.0, 0.0]]);
        let nn = nearest_neighbors(&d, "a", 5);
        // only candidate "b" has a zero row, so result is empty
        assert!(nn.unwrap().is_empty());
        assert!(matches!(
            nearest_neighbors(&d, "zzz", 1),
            Err(Error::UnknownWord(_))
        ));
        assert!(matches!(
            nearest_neighbors(&d, "b", 1),
            Err(Error::ZeroVector(_))
        ));
    }

    #[test]
    fn neighbors_tie_break_by_id() {
        let d = dict(
            &["q", "t1", "t2"],
            &[&[1.0, 0.0], &[3.0, 0.0], &[2.0, 0.0]],
        );
        let nn = nearest_neighbors(&d, "q", 2).unwrap();
        assert_eq!(nn[0].0, "t1");
        assert_eq!(nn[1].0, "t2");
    }

    #[test]
    fn cosine_in_range() {
        let d = dict(
            &["a", "b", "c"],
            &[&[1.0, 1.0], &[-1.0, -1.0], &[5.0, -0.1]],
        );
        for w in ["a", "b", "c"] {
            for (_, s) in nearest_neighbors(&d, w, 10).unwrap() {
                assert!((-1.0..=1.0 + 1e-12).contains(&s));
            }
        }
    }
}
