//! Type-level supervised evaluation: random 80/20 splits over word types,
//! a deterministic one-vs-rest linear classifier with cross-validated cost,
//! and a synthetic HMM corpus generator with ground-truth type labels.
//!
//! Labels files are TSV `word<TAB>label`. Reports serialize to CSV with one
//! row per repeat followed by a `mean` summary row.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::dictionary::EigenwordDictionary;
use crate::error::{Error, Result};

/// One label per word type (non-disambiguating).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTypes {
    pairs: Vec<(String, String)>,
    classes: Vec<String>,
}

impl LabeledTypes {
    pub fn new(pairs: Vec<(String, String)>) -> Result<LabeledTypes> {
        let mut seen = HashMap::new();
        for (w, _) in &pairs {
            if seen.insert(w.clone(), ()).is_some() {
                return Err(Error::InvalidParam(format!(
                    "word type {w:?} labeled more than once"
                )));
            }
        }
        let mut classes: Vec<String> = pairs.iter().map(|(_, l)| l.clone()).collect();
        classes.sort();
        classes.dedup();
        Ok(LabeledTypes { pairs, classes })
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_id(&self, label: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).ok()
    }

    pub fn load_tsv(path: &Path) -> Result<LabeledTypes> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (w, l) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: "expected word<TAB>label".into(),
            })?;
            pairs.push((w.to_string(), l.to_string()));
        }
        LabeledTypes::new(pairs)
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (w, l) in &self.pairs {
            let _ = writeln!(out, "{w}\t{l}");
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvalProtocol {
    pub train_fraction: f64,
    pub repeats: usize,
    /// Cost grid for the classifier, searched by cross-validation.
    pub reg_grid: Vec<f64>,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            train_fraction: 0.8,
            repeats: 10,
            reg_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            cv_folds: 5,
            seed: 0,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParam("train_fraction must be in (0,1)".into()));
        }
        if self.repeats < 1 || self.cv_folds < 2 || self.reg_grid.is_empty() {
            return Err(Error::InvalidParam("bad eval protocol".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub accuracies: Vec<f64>,
    pub chosen_reg: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Labeled types absent from the dictionary, dropped before splitting.
    pub dropped: usize,
    pub train_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("repeat,accuracy,chosen_reg\n");
        for (i, (a, r)) in self.accuracies.iter().zip(&self.chosen_reg).enumerate() {
            let _ = writeln!(out, "{i},{a:.6},{r}");
        }
        let _ = writeln!(
            out,
            "mean,{:.6},std={:.6} dropped={} train_fraction={} repeats={} seed={}",
            self.mean, self.std, self.dropped, self.train_fraction, self.repeats, self.seed
        );
        out
    }
}

/// splitmix64, used to derive independent per-repeat seeds.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Disjoint train/test partition of type indices, deterministic per
/// (protocol seed, repeat index).
pub fn split_types(
    num_types: usize,
    protocol: &EvalProtocol,
    repeat_index: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = (protocol.train_fraction * num_types as f64).floor() as usize;
    let n_test = num_types - n_train;
    if n_train < 2 || n_test < 2 {
        return Err(Error::TooFewTypes(num_types));
    }
    let mut order: Vec<usize> = (0..num_types).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(protocol.seed, repeat_index as u64));
    order.shuffle(&mut rng);
    let test = order.split_off(n_train);
    Ok((order, test))
}

/// One-vs-rest linear classifier: weights plus bias per class, prediction by
/// argmax of scores with ties to the lowest class id.
#[derive(Debug, Clone)]
pub struct LinearModel {
    /// One row per class, last column is the bias weight.
    pub weights: DMatrix<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..self.weights.nrows() {
            let mut score = self.weights[(c, x.len())];
            for (j, &v) in x.iter().enumerate() {
                score += self.weights[(c, j)] * v;
            }
            if score > best_score {
                best_score = score;
                best = c;
            }
        }
        best
    }
}

/// Dual coordinate descent for the l2-regularized hinge loss, one binary
/// problem per class. Fixed sample order and iteration cap, so training is
/// deterministic.
pub fn train_linear_classifier(
    x: &DMatrix<f64>,
    y: &[usize],
    num_classes: usize,
    reg: f64,
) -> Result<LinearModel> {
    let m = x.nrows();
    let d = x.ncols();
    if m != y.len() {
        return Err(Error::DimensionMismatch(
            "feature rows and labels differ in length".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("non-finite feature value".into()));
    }
    let distinct: std::collections::HashSet<usize> = y.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::SingleClass);
    }
    // squared norms with the implicit bias feature (constant 1)
    let q: Vec<f64> = (0..m)
        .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>() + 1.0)
        .collect();
    let max_epochs = 200;
    let mut weights = DMatrix::zeros(num_classes, d + 1);
    for c in 0..num_classes {
        let sign: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
        let mut alpha = vec![0.0f64; m];
        let mut w = vec![0.0f64; d + 1];
        for _ in 0..max_epochs {
            let mut max_delta = 0.0f64;
            for i in 0..m {
                let mut score = w[d];
                for j in 0..d {
                    score += w[j] * x[(i, j)];
                }
                let g = sign[i] * score - 1.0;
                let a_old = alpha[i];
                let a_new = (a_old - g / q[i]).clamp(0.0, reg);
                let delta = a_new - a_old;
                if delta != 0.0 {
                    alpha[i] = a_new;
                    let step = delta * sign[i];
                    for j in 0..d {
                        w[j] += step * x[(i, j)];
                    }
                    w[d] += step;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta < 1e-8 {
                break;
            }
        }
        for j in 0..=d {
            weights[(c, j)] = w[j];
        }
    }
    Ok(LinearModel { weights })
}

fn accuracy(model: &LinearModel, x: &DMatrix<f64>, y: &[usize]) -> f64 {
    let mut correct = 0;
    for (i, &yi) in y.iter().enumerate() {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        if model.predict(&row) == yi {
            correct += 1;
        }
    }
    correct as f64 / x.nrows().max(1) as f64
}

fn subset(x: &DMatrix<f64>, y: &[usize], idx: &[usize]) -> (DMatrix<f64>, Vec<usize>) {
    let xs = DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)]);
    let ys = idx.iter().map(|&i| y[i]).collect();
    (xs, ys)
}

/// Pick the cost from the grid by k-fold cross-validation on the training
/// types only; ties go to the smaller cost.
fn select_reg(
    x: &DMatrix<f64>,
    y: &[usize],
    num_classes: usize,
    protocol: &EvalProtocol,
    fold_seed: u64,
) -> f64 {
    let m = x.nrows();
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(fold_seed);
    order.shuffle(&mut rng);
    let folds = protocol.cv_folds.min(m);
    let mut grid = protocol.reg_grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best_reg = grid[0];
    let mut best_acc = -1.0;
    for &reg in &grid {
        let mut acc_sum = 0.0;
        let mut folds_used = 0;
        for f in 0..folds {
            let val: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|(i, _)| i % folds == f)
                .map(|(_, &t)| t)
                .collect();
            let tr: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|(i, _)| i % folds != f)
                .map(|(_, &t)| t)
                .collect();
            if val.is_empty() || tr.is_empty() {
                continue;
            }
            let (xt, yt) = subset(x, y, &tr);
            let (xv, yv) = subset(x, y, &val);
            match train_linear_classifier(&xt, &yt, num_classes, reg) {
                Ok(model) => {
                    acc_sum += accuracy(&model, &xv, &yv);
                    folds_used += 1;
                }
                Err(_) => continue, // degenerate fold (single class)
            }
        }
        if folds_used > 0 {
            let mean = acc_sum / folds_used as f64;
            if mean > best_acc {
                best_acc = mean;
                best_reg = reg;
            }
        }
    }
    best_reg
}

/// Run the full protocol: repeated type-disjoint splits, per-split cost
/// selection by cross-validation, accuracy on held-out types.
pub fn evaluate(
    dict: &EigenwordDictionary,
    labels: &LabeledTypes,
    protocol: &EvalProtocol,
) -> Result<EvalReport> {
    protocol.validate()?;
    let word_index: HashMap<&str, usize> = dict
        .words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i))
        .collect();
    let mut rows: Vec<usize> = Vec::new();
    let mut ys: Vec<usize> = Vec::new();
    for (w, l) in labels.pairs() {
        if let Some(&row) = word_index.get(w.as_str()) {
            rows.push(row);
            ys.push(labels.class_id(l).expect("label in class set"));
        }
    }
    let total = labels.pairs().len();
    let present = rows.len();
    let dropped = total - present;
    if present * 2 < total {
        return Err(Error::LowCoverage { present, total });
    }
    let num_classes = labels.num_classes();
    let x = DMatrix::from_fn(present, dict.k(), |i, j| dict.matrix[(rows[i], j)]);

    let mut accuracies = Vec::with_capacity(protocol.repeats);
    let mut chosen = Vec::with_capacity(protocol.repeats);
    for rep in 0..protocol.repeats {
        let (train, test) = split_types(present, protocol, rep)?;
        debug_assert!(train.iter().all(|t| !test.contains(t)));
        let (xt, yt) = subset(&x, &ys, &train);
        let (xe, ye) = subset(&x, &ys, &test);
        let fold_seed = mix_seed(protocol.seed, 0x1000_0000 + rep as u64);
        let reg = select_reg(&xt, &yt, num_classes, protocol, fold_seed);
        let model = train_linear_classifier(&xt, &yt, num_classes, reg)?;
        accuracies.push(accuracy(&model, &xe, &ye));
        chosen.push(reg);
    }
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let std = if accuracies.len() > 1 {
        (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
            / (accuracies.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    Ok(EvalReport {
        accuracies,
        chosen_reg: chosen,
        mean,
        std,
        dropped,
        train_fraction: protocol.train_fraction,
        repeats: protocol.repeats,
        seed: protocol.seed,
    })
}

fn dirichlet(conc: f64, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gamma = Gamma::new(conc.max(1e-8), 1.0).expect("valid gamma");
    let mut out: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = out.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        // concentration so small that every draw underflowed: degenerate to
        // a one-hot distribution
        let hot = rng.random_range(0..dim);
        out = vec![0.0; dim];
        out[hot] = 1.0;
        return out;
    }
    for v in &mut out {
        *v /= sum;
    }
    out
}

fn categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Stationary distribution of a row-stochastic matrix by power iteration.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Vec<f64> {
    let s = transition.len();
    let mut pi = vec![1.0 / s as f64; s];
    for _ in 0..500 {
        let mut next = vec![0.0; s];
        for (i, p) in pi.iter().enumerate() {
            for j in 0..s {
                next[j] += p * transition[i][j];
            }
        }
        pi = next;
    }
    pi
}

/// Parameters of a sampled HMM, exposed so tests can compare empirical
/// statistics against the generating model.
#[derive(Debug, Clone)]
pub struct SynthHmm {
    pub transition: Vec<Vec<f64>>,
    /// Per-state distribution over that state's word block.
    pub emission: Vec<Vec<f64>>,
    /// Global word id ranges per state: state s owns [starts[s], starts[s+1]).
    pub starts: Vec<usize>,
}

/// Sample an HMM with Dirichlet rows, partition the vocabulary so each word
/// type is emitted by exactly one state, and emit a corpus of exactly n
/// tokens in geometric-length sentences (mean length 20). Deterministic per
/// seed.
pub fn synth_hmm_corpus(
    num_states: usize,
    v: usize,
    n: usize,
    emission_conc: f64,
    transition_conc: f64,
    seed: u64,
) -> Result<(String, LabeledTypes, SynthHmm)> {
    synth_hmm_corpus_with_sentence_param(num_states, v, n, emission_conc, transition_conc, 0.05, seed)
}

/// As [`synth_hmm_corpus`] but with an explicit geometric sentence-length
/// parameter; mean sentence length is 1/geom_p.
pub fn synth_hmm_corpus_with_sentence_param(
    num_states: usize,
    v: usize,
    n: usize,
    emission_conc: f64,
    transition_conc: f64,
    geom_p: f64,
    seed: u64,
) -> Result<(String, LabeledTypes, SynthHmm)> {
    if !(geom_p > 0.0 && geom_p < 1.0) {
        return Err(Error::InvalidParam("geom_p must be in (0,1)".into()));
    }
    if num_states < 2 {
        return Err(Error::InvalidParam("num_states must be >= 2".into()));
    }
    if v < num_states {
        return Err(Error::InvalidParam("v must be >= num_states".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(num_states + 1);
    for s in 0..=num_states {
        starts.push(s * v / num_states);
    }
    let transition: Vec<Vec<f64>> = (0..num_states)
        .map(|_| dirichlet(transition_conc, num_states, &mut rng))
        .collect();
    let emission: Vec<Vec<f64>> = (0..num_states)
        .map(|s| dirichlet(emission_conc, starts[s + 1] - starts[s], &mut rng))
        .collect();
    let pi = stationary_distribution(&transition);

    let width = (v as f64).log10().ceil().max(1.0) as usize;
    let mut corpus = String::new();
    let mut emitted = 0usize;
    while emitted < n {
        let u: f64 = rng.random();
        let len = ((1.0 - u).ln() / (1.0 - geom_p).ln()).floor() as usize + 1;
        let len = len.min(n - emitted);
        let mut state = categorical(&pi, &mut rng);
        for t in 0..len {
            let w = starts[state] + categorical(&emission[state], &mut rng);
            if t > 0 {
                corpus.push(' ');
            }
            let _ = write!(corpus, "w{:0width$}", w);
            state = categorical(&transition[state], &mut rng);
        }
        corpus.push('\n');
        emitted += len;
    }
    let mut pairs = Vec::with_capacity(v);
    for s in 0..num_states {
        for w in starts[s]..starts[s + 1] {
            pairs.push((format!("w{:0width$}", w), format!("s{s}")));
        }
    }
    let labels = LabeledTypes::new(pairs)?;
    Ok((
        corpus,
        labels,
        SynthHmm {
            transition,
            emission,
            starts,
        },
    ))
}
