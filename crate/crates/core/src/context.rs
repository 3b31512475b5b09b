//! Left/right context indicator matrices and their second-moment matrices.
//!
//! For a stream of n tokens over a vocabulary of v types, each context side
//! gets h slots of v' = v + 2 columns: one per word type, one for OOV tokens
//! and one for positions beyond a sentence boundary. The word matrix W has a
//! single indicator per in-vocabulary token and an all-zero row for OOV.
//!
//! Second moments are uncentered throughout.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};

use crate::corpus::{TokenStream, OOV_ID};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    Raw,
    Sqrt,
}

impl std::fmt::Display for Scaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scaling::Raw => write!(f, "raw"),
            Scaling::Sqrt => write!(f, "sqrt"),
        }
    }
}

impl std::str::FromStr for Scaling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Scaling> {
        match s {
            "raw" => Ok(Scaling::Raw),
            "sqrt" => Ok(Scaling::Sqrt),
            other => Err(Error::InvalidParam(format!("unknown scaling {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContextConfig {
    /// Context width in words per side.
    pub h: usize,
    pub scaling: Scaling,
}

impl ContextConfig {
    pub fn new(h: usize, scaling: Scaling) -> Result<ContextConfig> {
        if h < 1 {
            return Err(Error::InvalidParam("context width h must be >= 1".into()));
        }
        Ok(ContextConfig { h, scaling })
    }
}

/// Sparse row-wise representation of L, R and W.
///
/// Row i of L holds exactly h column indices (slot d = 1..=h pointing at the
/// word d positions to the left, or at the boundary column); R mirrors it to
/// the right. `w_rows[i]` is the token's type id, or `None` for OOV.
#[derive(Debug, Clone)]
pub struct ContextMatrices {
    pub l_rows: Vec<Vec<u32>>,
    pub r_rows: Vec<Vec<u32>>,
    pub w_rows: Vec<Option<u32>>,
    /// Vocabulary size v.
    pub v: usize,
    pub h: usize,
}

impl ContextMatrices {
    /// Columns per context slot: v word columns + OOV + boundary.
    pub fn v_prime(&self) -> usize {
        self.v + 2
    }

    /// Columns of L (and of R): v' * h.
    pub fn side_cols(&self) -> usize {
        self.v_prime() * self.h
    }

    pub fn n(&self) -> usize {
        self.w_rows.len()
    }

    pub fn nnz_w(&self) -> usize {
        self.w_rows.iter().filter(|w| w.is_some()).count()
    }
}

/// Column index within one side for (slot, token id at that offset).
/// `id` is `None` when the position falls outside the sentence.
fn side_col(v: usize, slot: usize, id: Option<u32>) -> u32 {
    let vp = v + 2;
    let base = (slot - 1) * vp;
    let col = match id {
        Some(OOV_ID) => v,
        Some(w) => w as usize,
        None => v + 1,
    };
    (base + col) as u32
}

pub fn build_context_matrices(stream: &TokenStream, config: &ContextConfig) -> ContextMatrices {
    let v = stream
        .sentences
        .iter()
        .flatten()
        .filter(|&&id| id != OOV_ID)
        .map(|&id| id as usize + 1)
        .max()
        .unwrap_or(0);
    build_context_matrices_with_vocab_size(stream, config, v)
}

/// Same as [`build_context_matrices`] but with the vocabulary size given
/// explicitly, so types absent from the stream still get columns.
pub fn build_context_matrices_with_vocab_size(
    stream: &TokenStream,
    config: &ContextConfig,
    v: usize,
) -> ContextMatrices {
    let h = config.h;
    let n = stream.n;
    let mut l_rows = Vec::with_capacity(n);
    let mut r_rows = Vec::with_capacity(n);
    let mut w_rows = Vec::with_capacity(n);
    for sent in &stream.sentences {
        let len = sent.len();
        for i in 0..len {
            let mut l = Vec::with_capacity(h);
            let mut r = Vec::with_capacity(h);
            for d in 1..=h {
                let left = if i >= d { Some(sent[i - d]) } else { None };
                let right = sent.get(i + d).copied();
                l.push(side_col(v, d, left));
                r.push(side_col(v, d, right));
            }
            l_rows.push(l);
            r_rows.push(r);
            w_rows.push(match sent[i] {
                OOV_ID => None,
                id => Some(id),
            });
        }
    }
    ContextMatrices {
        l_rows,
        r_rows,
        w_rows,
        v,
        h,
    }
}

/// Second-moment matrices of the context/word views.
///
/// `c_ll`, `c_rr`, `c_lr` are d×d with d = v'h; `a_cw` is 2d×v with the
/// L^T W block on top of the R^T W block; `a_ww` holds the diagonal of W^T W.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub c_ll: DMatrix<f64>,
    pub c_rr: DMatrix<f64>,
    pub c_lr: DMatrix<f64>,
    pub a_cw: DMatrix<f64>,
    pub a_ww: DVector<f64>,
    pub n: usize,
    pub v: usize,
    pub h: usize,
    pub scaling: Scaling,
}

impl CovarianceSet {
    pub fn side_cols(&self) -> usize {
        (self.v + 2) * self.h
    }

    /// Assemble A_cc = C^T C from its blocks.
    pub fn a_cc(&self) -> DMatrix<f64> {
        let d = self.side_cols();
        let mut out = DMatrix::zeros(2 * d, 2 * d);
        out.view_mut((0, 0), (d, d)).copy_from(&self.c_ll);
        out.view_mut((0, d), (d, d)).copy_from(&self.c_lr);
        out.view_mut((d, 0), (d, d)).copy_from(&self.c_lr.transpose());
        out.view_mut((d, d), (d, d)).copy_from(&self.c_rr);
        out
    }

    /// L^T W block of A_cw.
    pub fn l_w(&self) -> DMatrix<f64> {
        let d = self.side_cols();
        self.a_cw.view((0, 0), (d, self.v)).into_owned()
    }

    /// R^T W block of A_cw.
    pub fn r_w(&self) -> DMatrix<f64> {
        let d = self.side_cols();
        self.a_cw.view((d, 0), (d, self.v)).into_owned()
    }

    /// Sum another raw-mode accumulation into this one (shard merge).
    pub fn merge(&mut self, other: &CovarianceSet) -> Result<()> {
        if self.scaling != Scaling::Raw || other.scaling != Scaling::Raw {
            return Err(Error::InvalidParam(
                "shard merge is only defined for raw-mode covariances".into(),
            ));
        }
        if self.v != other.v || self.h != other.h {
            return Err(Error::DimensionMismatch(
                "covariance shards have different v or h".into(),
            ));
        }
        self.c_ll += &other.c_ll;
        self.c_rr += &other.c_rr;
        self.c_lr += &other.c_lr;
        self.a_cw += &other.a_cw;
        self.a_ww += &other.a_ww;
        self.n += other.n;
        Ok(())
    }

    /// Entrywise square root of every second-moment matrix.
    pub fn apply_sqrt_scaling(&mut self) {
        for m in [&mut self.c_ll, &mut self.c_rr, &mut self.c_lr, &mut self.a_cw] {
            m.apply(|x| *x = x.sqrt());
        }
        self.a_ww.apply(|x| *x = x.sqrt());
        self.scaling = Scaling::Sqrt;
    }

    /// Rescale a single raw context-count column (index into the 2d columns
    /// of C) by `factor`, as if every raw count touching that column had been
    /// multiplied. Used for scale-sensitivity experiments.
    pub fn scale_context_column(&mut self, col: usize, factor: f64) {
        let d = self.side_cols();
        assert!(col < 2 * d, "context column out of range");
        if col < d {
            let c = col;
            for j in 0..d {
                self.c_ll[(c, j)] *= factor;
            }
            for i in 0..d {
                self.c_ll[(i, c)] *= factor;
            }
            for j in 0..d {
                self.c_lr[(c, j)] *= factor;
            }
        } else {
            let c = col - d;
            for j in 0..d {
                self.c_rr[(c, j)] *= factor;
            }
            for i in 0..d {
                self.c_rr[(i, c)] *= factor;
            }
            for i in 0..d {
                self.c_lr[(i, c)] *= factor;
            }
        }
        for j in 0..self.v {
            self.a_cw[(col, j)] *= factor;
        }
    }
}

/// Exact sparse products L^T L, R^T R, L^T R, C^T W, W^T W, followed by the
/// configured count scaling.
pub fn accumulate_covariances(m: &ContextMatrices, config: &ContextConfig) -> CovarianceSet {
    let mut cov = accumulate_raw(m);
    if config.scaling == Scaling::Sqrt {
        cov.apply_sqrt_scaling();
    }
    cov
}

/// Raw-mode accumulation (no scaling); shards accumulated this way can be
/// summed with [`CovarianceSet::merge`].
pub fn accumulate_raw(m: &ContextMatrices) -> CovarianceSet {
    let d = m.side_cols();
    let v = m.v;
    let mut c_ll = DMatrix::zeros(d, d);
    let mut c_rr = DMatrix::zeros(d, d);
    let mut c_lr = DMatrix::zeros(d, d);
    let mut a_cw = DMatrix::zeros(2 * d, v);
    let mut a_ww = DVector::zeros(v);
    for i in 0..m.n() {
        let l = &m.l_rows[i];
        let r = &m.r_rows[i];
        for &a in l {
            for &b in l {
                c_ll[(a as usize, b as usize)] += 1.0;
            }
            for &b in r {
                c_lr[(a as usize, b as usize)] += 1.0;
            }
        }
        for &a in r {
            for &b in r {
                c_rr[(a as usize, b as usize)] += 1.0;
            }
        }
        if let Some(w) = m.w_rows[i] {
            let w = w as usize;
            for &a in l {
                a_cw[(a as usize, w)] += 1.0;
            }
            for &b in r {
                a_cw[(d + b as usize, w)] += 1.0;
            }
            a_ww[w] += 1.0;
        }
    }
    CovarianceSet {
        c_ll,
        c_rr,
        c_lr,
        a_cw,
        a_ww,
        n: m.n(),
        v,
        h: m.h,
        scaling: Scaling::Raw,
    }
}

const CACHE_MAGIC: &[u8; 5] = b"EWCOV";
const CACHE_VERSION: u32 = 1;

fn write_triplets<W: Write>(w: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(m.nrows() as u32)?;
    w.write_u32::<LittleEndian>(m.ncols() as u32)?;
    let nnz = m.iter().filter(|&&x| x != 0.0).count() as u64;
    w.write_u64::<LittleEndian>(nnz)?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let x = m[(i, j)];
            if x != 0.0 {
                w.write_u32::<LittleEndian>(i as u32)?;
                w.write_u32::<LittleEndian>(j as u32)?;
                w.write_f64::<LittleEndian>(x)?;
            }
        }
    }
    Ok(())
}

fn read_triplets<R: Read>(r: &mut R) -> Result<DMatrix<f64>> {
    let rows = r.read_u32::<LittleEndian>()? as usize;
    let cols = r.read_u32::<LittleEndian>()? as usize;
    let nnz = r.read_u64::<LittleEndian>()?;
    let mut m = DMatrix::zeros(rows, cols);
    for _ in 0..nnz {
        let i = r.read_u32::<LittleEndian>()? as usize;
        let j = r.read_u32::<LittleEndian>()? as usize;
        let x = r.read_f64::<LittleEndian>()?;
        if i >= rows || j >= cols {
            return Err(Error::BadCache("triplet index out of bounds".into()));
        }
        m[(i, j)] = x;
    }
    Ok(m)
}

impl CovarianceSet {
    /// Binary cache format, little-endian throughout:
    /// magic `EWCOV`, version u32, scaling u8 (0 raw, 1 sqrt), h u32, v u32,
    /// n u64, then C_ll, C_rr, C_lr, A_cw each as
    /// `rows u32, cols u32, nnz u64, nnz * (row u32, col u32, value f64)`
    /// in column-major order, then the v diagonal entries of A_ww as f64.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_u32::<LittleEndian>(CACHE_VERSION)?;
        w.write_u8(match self.scaling {
            Scaling::Raw => 0,
            Scaling::Sqrt => 1,
        })?;
        w.write_u32::<LittleEndian>(self.h as u32)?;
        w.write_u32::<LittleEndian>(self.v as u32)?;
        w.write_u64::<LittleEndian>(self.n as u64)?;
        write_triplets(&mut w, &self.c_ll)?;
        write_triplets(&mut w, &self.c_rr)?;
        write_triplets(&mut w, &self.c_lr)?;
        write_triplets(&mut w, &self.a_cw)?;
        for i in 0..self.v {
            w.write_f64::<LittleEndian>(self.a_ww[i])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CovarianceSet> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::BadCache("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CACHE_VERSION {
            return Err(Error::BadCache(format!("unsupported version {version}")));
        }
        let scaling = match r.read_u8()? {
            0 => Scaling::Raw,
            1 => Scaling::Sqrt,
            x => return Err(Error::BadCache(format!("bad scaling tag {x}"))),
        };
        let h = r.read_u32::<LittleEndian>()? as usize;
        let v = r.read_u32::<LittleEndian>()? as usize;
        let n = r.read_u64::<LittleEndian>()? as usize;
        let c_ll = read_triplets(&mut r)?;
        let c_rr = read_triplets(&mut r)?;
        let c_lr = read_triplets(&mut r)?;
        let a_cw = read_triplets(&mut r)?;
        let mut a_ww = DVector::zeros(v);
        for i in 0..v {
            a_ww[i] = r.read_f64::<LittleEndian>()?;
        }
        let d = (v + 2) * h;
        if c_ll.nrows() != d || c_rr.nrows() != d || c_lr.nrows() != d || a_cw.nrows() != 2 * d {
            return Err(Error::BadCache("dimensions inconsistent with header".into()));
        }
        Ok(CovarianceSet {
            c_ll,
            c_rr,
            c_lr,
            a_cw,
            a_ww,
            n,
            v,
            h,
            scaling,
        })
    }
}
