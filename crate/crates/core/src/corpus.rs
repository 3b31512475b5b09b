//! Corpus ingestion: tokenization, vocabulary construction, integer encoding.
//!
//! Input corpora are UTF-8 plain text, one sentence per line with
//! space-separated tokens. Vocabulary files are TSV `word<TAB>count`,
//! one row per type, in descending count order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Token id reserved for out-of-vocabulary words. Always outside `[0, v)`.
pub const OOV_ID: u32 = u32::MAX;

/// Fixed word-type inventory with frequency counts.
///
/// Ids are assigned in descending count order, ties broken lexicographically,
/// so construction is fully deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(|s| s.as_str())
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (w, c) in self.words.iter().zip(&self.counts) {
            let _ = writeln!(out, "{w}\t{c}");
        }
        out
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load_tsv(path: &Path) -> Result<Vocabulary> {
        let text = std::fs::read_to_string(path)?;
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (w, c) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: "expected word<TAB>count".into(),
            })?;
            let count: u64 = c.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("bad count {c:?}"),
            })?;
            words.push(w.to_string());
            counts.push(count);
        }
        Vocabulary::from_parts(words, counts)
    }

    fn from_parts(words: Vec<String>, counts: Vec<u64>) -> Result<Vocabulary> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::InvalidParam(format!("duplicate word {w:?}")));
            }
        }
        Ok(Vocabulary {
            words,
            counts,
            index,
        })
    }
}

/// Sentence-segmented corpus encoded against a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStream {
    pub sentences: Vec<Vec<u32>>,
    pub n: usize,
}

/// Split on newlines into sentences and whitespace into tokens, lowercased.
/// Empty sentences are dropped.
pub fn tokenize(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|line| {
            line.split_whitespace()
                .map(|t| t.to_lowercase())
                .collect::<Vec<_>>()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Keep the `max_size` most frequent types with count >= `min_count`.
pub fn build_vocabulary(
    sentences: &[Vec<String>],
    min_count: usize,
    max_size: usize,
) -> Result<Vocabulary> {
    if min_count < 1 || max_size < 1 {
        return Err(Error::InvalidParam(
            "min_count and max_size must be >= 1".into(),
        ));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for sent in sentences {
        for tok in sent {
            *freq.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut pairs: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= min_count as u64)
        .collect();
    // descending count, ties lexicographic
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    pairs.truncate(max_size);
    if pairs.is_empty() {
        return Err(Error::EmptyVocabulary {
            min_count,
            max_size,
        });
    }
    let words = pairs.iter().map(|&(w, _)| w.to_string()).collect();
    let counts = pairs.iter().map(|&(_, c)| c).collect();
    Vocabulary::from_parts(words, counts)
}

/// Map each token to its id; unknown words become [`OOV_ID`].
pub fn encode(sentences: &[Vec<String>], vocab: &Vocabulary) -> TokenStream {
    let mut out = Vec::with_capacity(sentences.len());
    let mut n = 0;
    for sent in sentences {
        if sent.is_empty() {
            continue;
        }
        let ids: Vec<u32> = sent
            .iter()
            .map(|t| vocab.id(t).unwrap_or(OOV_ID))
            .collect();
        n += ids.len();
        out.push(ids);
    }
    TokenStream { sentences: out, n }
}

/// Map ids back to word strings; OOV ids decode to `"<oov>"`.
pub fn decode(stream: &TokenStream, vocab: &Vocabulary) -> Vec<Vec<String>> {
    stream
        .sentences
        .iter()
        .map(|sent| {
            sent.iter()
                .map(|&id| {
                    vocab
                        .word(id)
                        .map(|w| w.to_string())
                        .unwrap_or_else(|| "<oov>".to_string())
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_example_sentence() {
        let got = tokenize("I ate green apples yesterday .");
        assert_eq!(
            got,
            vec![vec!["i", "ate", "green", "apples", "yesterday", "."]]
        );
    }

    #[test]
    fn tokenize_empty_input() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_drops_blank_lines_and_folds_case() {
        let got = tokenize("A b\n\nc");
        assert_eq!(got, vec![vec!["a", "b"], vec!["c"]]);
    }

    #[test]
    fn vocabulary_counting() {
        let sents = tokenize("a b a");
        let v = build_vocabulary(&sents, 1, 100).unwrap();
        assert_eq!(v.words(), &["a".to_string(), "b".to_string()]);
        assert_eq!(v.counts(), &[2, 1]);
    }

    #[test]
    fn vocabulary_min_count_threshold() {
        let sents = tokenize("a b a");
        let v = build_vocabulary(&sents, 2, 100).unwrap();
        assert_eq!(v.words(), &["a".to_string()]);
    }

    #[test]
    fn vocabulary_empty_errors() {
        let sents = tokenize("a b a");
        assert!(build_vocabulary(&sents, 10, 100).is_err());
    }

    #[test]
    fn vocabulary_tie_break_lexicographic() {
        let sents = tokenize("z y z y x");
        let v = build_vocabulary(&sents, 1, 100).unwrap();
        assert_eq!(
            v.words(),
            &["y".to_string(), "z".to_string(), "x".to_string()]
        );
    }

    #[test]
    fn encode_basic_and_oov() {
        let sents = tokenize("a b");
        let v = build_vocabulary(&sents, 1, 100).unwrap();
        let s = encode(&sents, &v);
        assert_eq!(s.sentences, vec![vec![0, 1]]);
        assert_eq!(s.n, 2);

        let s2 = encode(&tokenize("a z"), &v);
        assert_eq!(s2.sentences, vec![vec![0, OOV_ID]]);
        assert_eq!(s2.n, 2);
    }

    #[test]
    fn encode_decode_roundtrip_in_vocab() {
        let sents = tokenize("the cat sat\nthe dog ran");
        let v = build_vocabulary(&sents, 1, 100).unwrap();
        let s = encode(&sents, &v);
        let back = decode(&s, &v);
        assert_eq!(back, sents);
        // re-encoding the decoded stream is idempotent
        assert_eq!(encode(&back, &v), s);
    }

    #[test]
    fn counts_plus_oov_equals_n() {
        let sents = tokenize("a b c a q r q");
        let v = build_vocabulary(&sents, 2, 100).unwrap();
        let s = encode(&sents, &v);
        let oov = s
            .sentences
            .iter()
            .flatten()
            .filter(|&&id| id == OOV_ID)
            .count() as u64;
        let in_vocab: u64 = v.counts().iter().sum();
        assert_eq!(in_vocab + oov, s.n as u64);
    }

    #[test]
    fn vocab_tsv_roundtrip() {
        let sents = tokenize("a b a c c c");
        let v = build_vocabulary(&sents, 1, 100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        v.save_tsv(&path).unwrap();
        let v2 = Vocabulary::load_tsv(&path).unwrap();
        assert_eq!(v, v2);
    }
}
