//! Numerical core: randomized truncated SVD, regularized whitening, and the
//! paired-view CCA solver.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Truncated SVD with orthonormal `u`/`v` columns and non-increasing `s`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SvdParams {
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl SvdParams {
    /// Defaults tuned for count matrices with heavy spectral tails.
    pub fn new(seed: u64) -> SvdParams {
        SvdParams {
            oversample: 20,
            power_iters: 3,
            seed,
        }
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn ortho(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Flip each (u, v) column pair so the largest-magnitude entry of the u
/// column is positive; keeps the reconstruction intact and makes the
/// factorization reproducible.
fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for j in 0..u.ncols() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..u.nrows() {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.nrows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
}

/// Range-finder randomized SVD (Gaussian sketch, QR power iterations).
/// Deterministic for a fixed seed.
pub fn randomized_svd(a: &DMatrix<f64>, k: usize, params: &SvdParams) -> Result<SvdResult> {
    let (d1, d2) = (a.nrows(), a.ncols());
    let min_dim = d1.min(d2);
    if k < 1 || k > min_dim {
        return Err(Error::InvalidParam(format!(
            "svd rank k={k} must be in [1, {min_dim}]"
        )));
    }
    let p = (k + params.oversample).min(min_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let sketch = gaussian(d2, p, &mut rng);
    let mut q = ortho(&(a * &sketch));
    for _ in 0..params.power_iters {
        let z = ortho(&(a.transpose() * &q));
        q = ortho(&(a * &z));
    }
    let b = q.transpose() * a; // p x d2
    let svd = b.svd(true, true);
    let ub = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut u = (&q * ub).columns(0, k).into_owned();
    let mut v = vt.rows(0, k).transpose().into_owned();
    let s = DVector::from_fn(k, |i, _| svd.singular_values[i]);
    fix_signs(&mut u, &mut v);
    Ok(SvdResult { u, s, v })
}

fn check_symmetric(c: &DMatrix<f64>) -> Result<()> {
    let scale = c.abs().max().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..c.nrows() {
        for j in (i + 1)..c.ncols() {
            worst = worst.max((c[(i, j)] - c[(j, i)]).abs());
        }
    }
    if worst > 1e-9 * scale {
        return Err(Error::Asymmetric(worst));
    }
    Ok(())
}

fn is_diagonal(c: &DMatrix<f64>) -> bool {
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            if i != j && c[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Inverse square root of `Cxx + ridge*I` via symmetric eigendecomposition,
/// with eigenvalues clamped at zero before the shift. Diagonal inputs take a
/// closed-form O(d) path.
pub fn whiten(cxx: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    if cxx.nrows() != cxx.ncols() {
        return Err(Error::DimensionMismatch("whiten expects a square matrix".into()));
    }
    if ridge < 0.0 {
        return Err(Error::InvalidParam("ridge must be non-negative".into()));
    }
    check_symmetric(cxx)?;
    let d = cxx.nrows();
    if is_diagonal(cxx) {
        let mut k = DMatrix::zeros(d, d);
        for i in 0..d {
            let lam = cxx[(i, i)].max(0.0) + ridge;
            if lam <= 0.0 {
                return Err(Error::InvalidParam(
                    "zero diagonal entry with ridge=0; matrix is singular".into(),
                ));
            }
            k[(i, i)] = 1.0 / lam.sqrt();
        }
        return Ok(k);
    }
    let sym = (cxx + cxx.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut inv_sqrt = DVector::zeros(d);
    for i in 0..d {
        let lam = eig.eigenvalues[i].max(0.0) + ridge;
        if lam <= 0.0 {
            return Err(Error::InvalidParam(
                "covariance is singular and ridge is zero".into(),
            ));
        }
        inv_sqrt[i] = 1.0 / lam.sqrt();
    }
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..d {
        let f = inv_sqrt[j];
        for i in 0..d {
            scaled[(i, j)] *= f;
        }
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

/// Paired projections solving the two-view correlation problem on
/// second-moment matrices.
#[derive(Debug, Clone)]
pub struct CcaResult {
    pub phi_x: DMatrix<f64>,
    pub phi_y: DMatrix<f64>,
    /// Canonical correlations, non-increasing.
    pub rho: DVector<f64>,
    /// Ridge applied to the first view's whitening.
    pub ridge: f64,
    /// Ridge applied to the second view's whitening.
    pub ridge_y: f64,
    /// Number of correlations above the rank tolerance; components beyond
    /// this are a deterministic basis of the (near-)null directions.
    pub attained_rank: usize,
}

/// Default ridge for a given second-moment matrix.
pub fn default_ridge(cxx: &DMatrix<f64>) -> f64 {
    1e-3 * cxx.trace() / cxx.nrows() as f64
}

/// CCA via whitening + SVD: decompose Kx^T Cxy Ky and map the singular
/// vectors back through the whitening transforms. Applies the same ridge to
/// both views; see [`cca_with_view_ridges`] when the views live on different
/// count scales.
pub fn cca(
    cxx: &DMatrix<f64>,
    cxy: &DMatrix<f64>,
    cyy: &DMatrix<f64>,
    k: usize,
    ridge: f64,
    params: &SvdParams,
) -> Result<CcaResult> {
    cca_with_view_ridges(cxx, cxy, cyy, k, ridge, ridge, params)
}

pub fn cca_with_view_ridges(
    cxx: &DMatrix<f64>,
    cxy: &DMatrix<f64>,
    cyy: &DMatrix<f64>,
    k: usize,
    ridge_x: f64,
    ridge_y: f64,
    params: &SvdParams,
) -> Result<CcaResult> {
    let dx = cxx.nrows();
    let dy = cyy.nrows();
    if cxy.nrows() != dx || cxy.ncols() != dy {
        return Err(Error::DimensionMismatch(format!(
            "Cxy is {}x{}, expected {}x{}",
            cxy.nrows(),
            cxy.ncols(),
            dx,
            dy
        )));
    }
    if k < 1 || k > dx.min(dy) {
        return Err(Error::InvalidParam(format!(
            "cca k={k} must be in [1, {}]",
            dx.min(dy)
        )));
    }
    if ridge_x <= 0.0 || ridge_y <= 0.0 {
        return Err(Error::InvalidParam("cca requires ridge > 0".into()));
    }
    let kx = whiten(cxx, ridge_x)?;
    let ky = whiten(cyy, ridge_y)?;
    let m = &kx * cxy * &ky;
    let svd = randomized_svd(&m, k, params)?;
    let s0 = svd.s[0];
    let rank_tol = s0 * 1e-9;
    let attained_rank = svd.s.iter().filter(|&&s| s > rank_tol && s > 0.0).count();
    let phi_x = &kx * &svd.u;
    let phi_y = &ky * &svd.v;
    Ok(CcaResult {
        phi_x,
        phi_y,
        rho: svd.s,
        ridge: ridge_x,
        ridge_y,
        attained_rank,
    })
}
