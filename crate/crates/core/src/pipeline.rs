//! End-to-end dictionary construction: one-step CCA between contexts and
//! words, the two-step variant (contexts against each other first, then the
//! combined token state against the words), and a PCA baseline on the
//! context-word count matrix.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::context::{
    accumulate_covariances, build_context_matrices_with_vocab_size, ContextConfig,
    ContextMatrices, CovarianceSet, Scaling,
};
use crate::corpus::{TokenStream, Vocabulary};
use crate::dictionary::{DictionaryMetadata, EigenwordDictionary};
use crate::error::{Error, Result};
use crate::spectral::{cca_with_view_ridges, randomized_svd, CcaResult, SvdParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Oscca,
    Tscca,
    Pca,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Oscca => write!(f, "oscca"),
            Method::Tscca => write!(f, "tscca"),
            Method::Pca => write!(f, "pca"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s {
            "oscca" => Ok(Method::Oscca),
            "tscca" => Ok(Method::Tscca),
            "pca" => Ok(Method::Pca),
            other => Err(Error::InvalidParam(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub method: Method,
    /// Dictionary dimension.
    pub k: usize,
    /// First-step dimension for the two-step method; defaults to 2k.
    pub k1: Option<usize>,
    pub h: usize,
    /// Relative ridge coefficient: each whitened view gets
    /// `ridge * trace(Cxx)/d`, so one setting keeps its meaning across views
    /// and steps that live on different count scales. None selects 1e-3.
    pub ridge: Option<f64>,
    /// Separate coefficient for the two-step method's first step; None ties
    /// it to `ridge`. The two steps prefer very different regularization:
    /// the first estimates a subspace, the second a regression-like map.
    pub ridge1: Option<f64>,
    pub scaling: Scaling,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: Method::Tscca,
            k: 50,
            k1: None,
            h: 1,
            ridge: None,
            ridge1: None,
            scaling: Scaling::Sqrt,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn effective_k1(&self) -> usize {
        self.k1.unwrap_or(2 * self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        if self.h < 1 {
            return Err(Error::InvalidParam("h must be >= 1".into()));
        }
        if self.method == Method::Tscca && self.effective_k1() < self.k {
            return Err(Error::RankOrder {
                k1: self.effective_k1(),
                k: self.k,
            });
        }
        Ok(())
    }

    /// Load from a flat `key=value` file; keys mirror the CLI flags
    /// (method, k, k1, h, ridge, scaling, seed). Lines starting with `#`
    /// are comments.
    pub fn from_kv_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = PipelineConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: "expected key=value".into(),
            })?;
            let bad = |msg: String| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg,
            };
            match key.trim() {
                "method" => cfg.method = val.trim().parse()?,
                "k" => cfg.k = val.trim().parse().map_err(|_| bad("bad k".into()))?,
                "k1" => cfg.k1 = Some(val.trim().parse().map_err(|_| bad("bad k1".into()))?),
                "h" => cfg.h = val.trim().parse().map_err(|_| bad("bad h".into()))?,
                "ridge" => {
                    cfg.ridge = Some(val.trim().parse().map_err(|_| bad("bad ridge".into()))?)
                }
                "ridge1" => {
                    cfg.ridge1 = Some(val.trim().parse().map_err(|_| bad("bad ridge1".into()))?)
                }
                "scaling" => cfg.scaling = val.trim().parse()?,
                "seed" => cfg.seed = val.trim().parse().map_err(|_| bad("bad seed".into()))?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub const DEFAULT_RIDGE_COEFF: f64 = 1e-3;

/// Effective absolute ridge for one view: coefficient times the mean
/// diagonal mass, floored at the coefficient itself for zero matrices.
pub fn view_ridge(coeff: Option<f64>, cxx: &DMatrix<f64>) -> f64 {
    let c = coeff.unwrap_or(DEFAULT_RIDGE_COEFF);
    let scale = cxx.trace() / cxx.nrows() as f64;
    if scale > 0.0 {
        c * scale
    } else {
        c
    }
}

fn zero_unseen_rows(matrix: &mut DMatrix<f64>, a_ww: &DVector<f64>) {
    for i in 0..matrix.nrows() {
        if a_ww[i] == 0.0 {
            for j in 0..matrix.ncols() {
                matrix[(i, j)] = 0.0;
            }
        }
    }
}

fn meta(
    method: Method,
    cov: &CovarianceSet,
    k1: Option<usize>,
    ridge: f64,
    seed: u64,
    rho: Vec<f64>,
    rho_step1: Option<Vec<f64>>,
) -> DictionaryMetadata {
    DictionaryMetadata {
        method: method.to_string(),
        h: cov.h,
        k1,
        ridge,
        scaling: cov.scaling.to_string(),
        seed,
        n: cov.n,
        normalized: false,
        rho,
        rho_step1,
    }
}

/// One-step CCA between the combined context C = [L R] and the words.
/// Returns the word-side projection as the dictionary together with the full
/// CCA result (whose context-side projection drives state estimation).
pub fn oscca_with_projection(
    cov: &CovarianceSet,
    words: &[String],
    k: usize,
    ridge: Option<f64>,
    seed: u64,
) -> Result<(EigenwordDictionary, CcaResult)> {
    if k > cov.v {
        return Err(Error::InvalidParam(format!(
            "k={k} exceeds vocabulary size {}",
            cov.v
        )));
    }
    let a_cc = cov.a_cc();
    let a_ww = DMatrix::from_diagonal(&cov.a_ww);
    let coeff = ridge.unwrap_or(DEFAULT_RIDGE_COEFF);
    let params = SvdParams::new(seed);
    let result = cca_with_view_ridges(
        &a_cc,
        &cov.a_cw,
        &a_ww,
        k,
        view_ridge(ridge, &a_cc),
        view_ridge(ridge, &a_ww),
        &params,
    )?;
    let mut matrix = result.phi_y.clone();
    zero_unseen_rows(&mut matrix, &cov.a_ww);
    let rho: Vec<f64> = result.rho.iter().copied().collect();
    let dict = EigenwordDictionary {
        words: words.to_vec(),
        matrix,
        meta: meta(Method::Oscca, cov, None, coeff, seed, rho, None),
    };
    Ok((dict, result))
}

pub fn oscca(
    cov: &CovarianceSet,
    words: &[String],
    k: usize,
    ridge: Option<f64>,
    seed: u64,
) -> Result<EigenwordDictionary> {
    oscca_with_projection(cov, words, k, ridge, seed).map(|(d, _)| d)
}

/// Second moments of the token-state matrix S = [L Phi_L, R Phi_R] against
/// itself and against W, computed by projecting the cached sparse moments
/// instead of materializing the n-row S.
pub fn tscca_projected_moments(
    cov: &CovarianceSet,
    phi_l: &DMatrix<f64>,
    phi_r: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let k1 = phi_l.ncols();
    let ll = phi_l.transpose() * &cov.c_ll * phi_l;
    let rr = phi_r.transpose() * &cov.c_rr * phi_r;
    let lr = phi_l.transpose() * &cov.c_lr * phi_r;
    let mut sts = DMatrix::zeros(2 * k1, 2 * k1);
    sts.view_mut((0, 0), (k1, k1)).copy_from(&ll);
    sts.view_mut((0, k1), (k1, k1)).copy_from(&lr);
    sts.view_mut((k1, 0), (k1, k1)).copy_from(&lr.transpose());
    sts.view_mut((k1, k1), (k1, k1)).copy_from(&rr);

    let lw = phi_l.transpose() * cov.l_w();
    let rw = phi_r.transpose() * cov.r_w();
    let mut stw = DMatrix::zeros(2 * k1, cov.v);
    stw.view_mut((0, 0), (k1, cov.v)).copy_from(&lw);
    stw.view_mut((k1, 0), (k1, cov.v)).copy_from(&rw);
    (sts, stw)
}

/// Two-step CCA: contexts against each other first, then the combined state
/// against the words.
pub fn tscca(
    cov: &CovarianceSet,
    words: &[String],
    k1: usize,
    k: usize,
    ridge: Option<f64>,
    seed: u64,
) -> Result<EigenwordDictionary> {
    tscca_with_step_ridges(cov, words, k1, k, ridge, ridge, seed)
}

/// Two-step CCA with independent per-step ridge coefficients.
pub fn tscca_with_step_ridges(
    cov: &CovarianceSet,
    words: &[String],
    k1: usize,
    k: usize,
    ridge1: Option<f64>,
    ridge: Option<f64>,
    seed: u64,
) -> Result<EigenwordDictionary> {
    if k1 < k {
        return Err(Error::RankOrder { k1, k });
    }
    let d = cov.side_cols();
    if k1 > d {
        return Err(Error::InvalidParam(format!(
            "k1={k1} exceeds context dimension {d}"
        )));
    }
    let coeff = ridge.unwrap_or(DEFAULT_RIDGE_COEFF);
    let step1 = cca_with_view_ridges(
        &cov.c_ll,
        &cov.c_lr,
        &cov.c_rr,
        k1,
        view_ridge(ridge1, &cov.c_ll),
        view_ridge(ridge1, &cov.c_rr),
        &SvdParams::new(seed),
    )?;
    let (sts, stw) = tscca_projected_moments(cov, &step1.phi_x, &step1.phi_y);
    let a_ww = DMatrix::from_diagonal(&cov.a_ww);
    let step2 = cca_with_view_ridges(
        &sts,
        &stw,
        &a_ww,
        k,
        view_ridge(ridge, &sts),
        view_ridge(ridge, &a_ww),
        &SvdParams::new(seed.wrapping_add(1)),
    )?;
    let mut matrix = step2.phi_y.clone();
    zero_unseen_rows(&mut matrix, &cov.a_ww);
    let rho: Vec<f64> = step2.rho.iter().copied().collect();
    let rho1: Vec<f64> = step1.rho.iter().copied().collect();
    Ok(EigenwordDictionary {
        words: words.to_vec(),
        matrix,
        meta: meta(
            Method::Tscca,
            cov,
            Some(k1),
            coeff,
            seed,
            rho,
            Some(rho1),
        ),
    })
}

/// PCA baseline: truncated SVD of the (scaled) context-word count matrix;
/// dictionary rows are the right singular vectors scaled by singular values.
pub fn pca_baseline(
    cov: &CovarianceSet,
    words: &[String],
    k: usize,
    seed: u64,
) -> Result<EigenwordDictionary> {
    if k > cov.v {
        return Err(Error::InvalidParam(format!(
            "k={k} exceeds vocabulary size {}",
            cov.v
        )));
    }
    let svd = randomized_svd(&cov.a_cw, k, &SvdParams::new(seed))?;
    let mut matrix = svd.v.clone();
    for j in 0..k {
        let s = svd.s[j];
        for i in 0..matrix.nrows() {
            matrix[(i, j)] *= s;
        }
    }
    zero_unseen_rows(&mut matrix, &cov.a_ww);
    let rho: Vec<f64> = svd.s.iter().copied().collect();
    Ok(EigenwordDictionary {
        words: words.to_vec(),
        matrix,
        meta: meta(Method::Pca, cov, None, 0.0, seed, rho, None),
    })
}

/// Per-token state estimates from the first-step CCA.
#[derive(Debug, Clone)]
pub struct StateEstimate {
    /// n x (2*k1) matrix, one row per token.
    pub s: DMatrix<f64>,
}

/// Project every token through `proj`. A projection with 2*v'h rows is
/// applied to the combined context C = [L R]; one with v rows is applied to
/// the word indicators W (OOV tokens get zero rows).
pub fn estimate_states(m: &ContextMatrices, proj: &DMatrix<f64>) -> Result<StateEstimate> {
    let d = m.side_cols();
    let n = m.n();
    let k = proj.ncols();
    let mut s = DMatrix::zeros(n, k);
    if proj.nrows() == 2 * d {
        for i in 0..n {
            for &a in &m.l_rows[i] {
                for j in 0..k {
                    s[(i, j)] += proj[(a as usize, j)];
                }
            }
            for &b in &m.r_rows[i] {
                for j in 0..k {
                    s[(i, j)] += proj[(d + b as usize, j)];
                }
            }
        }
    } else if proj.nrows() == m.v {
        for i in 0..n {
            if let Some(w) = m.w_rows[i] {
                for j in 0..k {
                    s[(i, j)] = proj[(w as usize, j)];
                }
            }
        }
    } else {
        return Err(Error::DimensionMismatch(format!(
            "projection has {} rows; expected {} (context) or {} (word)",
            proj.nrows(),
            2 * d,
            m.v
        )));
    }
    Ok(StateEstimate { s })
}

/// Ratio of the hidden-state dimension the two-step method must estimate to
/// the one-step method's: (h + k) / (h * v).
pub fn sample_complexity_ratio(v: usize, h: usize, k: usize) -> f64 {
    (h + k) as f64 / (h as f64 * v as f64)
}

/// Build a dictionary from an encoded corpus according to `cfg`.
pub fn build_dictionary(
    stream: &TokenStream,
    vocab: &Vocabulary,
    cfg: &PipelineConfig,
) -> Result<EigenwordDictionary> {
    cfg.validate()?;
    let ctx_cfg = ContextConfig::new(cfg.h, cfg.scaling)?;
    let m = build_context_matrices_with_vocab_size(stream, &ctx_cfg, vocab.size());
    let cov = accumulate_covariances(&m, &ctx_cfg);
    let words = vocab.words();
    match cfg.method {
        Method::Oscca => oscca(&cov, words, cfg.k, cfg.ridge, cfg.seed),
        Method::Tscca => tscca_with_step_ridges(
            &cov,
            words,
            cfg.effective_k1(),
            cfg.k,
            cfg.ridge1.or(cfg.ridge),
            cfg.ridge,
            cfg.seed,
        ),
        Method::Pca => pca_baseline(&cov, words, cfg.k, cfg.seed),
    }
}
