//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Real 2x embedding of a complex matrix: `[[Re, -Im], [Im, Re]]`.
pub fn real_embedding(a: &CMatrix) -> RMatrix {
    let (m, n) = a.shape();
    let mut out = RMatrix::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + m, j)] = z.im;
            out[(i + m, j + n)] = z.re;
        }
    }
    out
}

pub fn stack_complex(v: &CVector) -> RVector {
    let n = v.len();
    RVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn unstack_complex(v: &RVector) -> CVector {
    let n = v.len() / 2;
    CVector::from_fn(n, |i, _| c(v[i], v[i + n]))
}

/// `M ⊗ I_p` for a real matrix `M`.
pub fn kron_identity(m: &RMatrix, p: usize) -> RMatrix {
    let (r, cols) = m.shape();
    let mut out = RMatrix::zeros(r * p, cols * p);
    for i in 0..r {
        for j in 0..cols {
            let v = m[(i, j)];
            if v != 0.0 {
                for k in 0..p {
                    out[(i * p + k, j * p + k)] = v;
                }
            }
        }
    }
    out
}

pub fn block_diag(blocks: &[RMatrix]) -> RMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = RMatrix::zeros(n, m);
    let (mut r, mut col) = (0, 0);
    for b in blocks {
        out.view_mut((r, col), b.shape()).copy_from(b);
        r += b.nrows();
        col += b.ncols();
    }
    out
}

pub fn complex_inverse(m: &CMatrix, what: &str) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{what}: matrix is not square")));
    }
    m.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise difference divided by the largest entry magnitude of `reference`.
pub fn rel_diff(a: &CMatrix, reference: &CMatrix) -> f64 {
    let scale = max_abs(reference).max(f64::MIN_POSITIVE);
    max_abs(&(a - reference)) / scale
}

/// Serde adapter: a complex matrix as rows of `[re, im]` pairs.
pub mod complex_block {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMatrix, String> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err("ragged complex block".into());
        }
        Ok(CMatrix::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
    }
}

pub mod complex_block_opt {
    use super::*;

    pub fn serialize<S: Serializer>(
        m: &Option<CMatrix>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match m {
            Some(m) => complex_block::serialize(m, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<CMatrix>, D::Error> {
        let rows: Option<Vec<Vec<[f64; 2]>>> = Option::deserialize(d)?;
        rows.map(|r| complex_block::from_rows(&r).map_err(serde::de::Error::custom))
            .transpose()
    }
}
