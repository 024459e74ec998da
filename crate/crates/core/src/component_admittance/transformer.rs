//! Three-phase transformers in the unitary-voltage-network form.
//!
//! The winding connection enters through a 3×3 connection matrix: `Γ` for a
//! delta primary, the identity for wye. The scalar turns ratio `a` multiplies
//! the identity wherever it is combined with a matrix.

use super::EdgeAdmittance;
use crate::circuit_model::{Connection, PhaseSet};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

use super::TwoPortAdmittance;

/// Delta connection matrix; each column sums to zero.
pub fn gamma() -> CMatrix {
    CMatrix::from_row_slice(
        3,
        3,
        &[
            c(1.0, 0.0),
            c(-1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(1.0, 0.0),
            c(-1.0, 0.0),
            c(-1.0, 0.0),
            c(0.0, 0.0),
            c(1.0, 0.0),
        ],
    )
}

fn check(a: f64, y_l: &CMatrix, y_m: &CMatrix) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "turns ratio must be positive, got {a}"
        )));
    }
    if y_l.shape() != (3, 3) || y_m.shape() != (3, 3) {
        return Err(Error::Dimension("transformer blocks must be 3×3".into()));
    }
    Ok(())
}

/// Two-port matrix of a Delta–Wye transformer, built directly:
///
/// ```text
/// [ Γᵀ y^l Γ      -Γᵀ a y^l      ]
/// [ -a y^l Γ      a² (y^l + y^m) ]
/// ```
pub fn delta_wye_admittance(a: f64, y_l: &CMatrix, y_m: &CMatrix) -> Result<TwoPortAdmittance> {
    check(a, y_l, y_m)?;
    let g = gamma();
    let gt = g.transpose();
    let ac = c(a, 0.0);
    let mut y = CMatrix::zeros(6, 6);
    y.view_mut((0, 0), (3, 3)).copy_from(&(&gt * y_l * &g));
    y.view_mut((0, 3), (3, 3)).copy_from(&(-(&gt * y_l) * ac));
    y.view_mut((3, 0), (3, 3)).copy_from(&(-(y_l * &g) * ac));
    y.view_mut((3, 3), (3, 3))
        .copy_from(&((y_l + y_m) * c(a * a, 0.0)));
    Ok(TwoPortAdmittance { y })
}

/// Four parameters for a transformer with connection matrix `m`:
/// `y_s_jk = mᵀ a y^l`, `y_s_kj = a y^l m`, `y_m_jk = mᵀ y^l (m - aI)`,
/// `y_m_kj = a y^l (aI - m) + a² y^m`.
fn uvn_four_params(m: &CMatrix, a: f64, y_l: &CMatrix, y_m: &CMatrix) -> Result<EdgeAdmittance> {
    check(a, y_l, y_m)?;
    let mt = m.transpose();
    let ac = c(a, 0.0);
    let a_eye = CMatrix::identity(3, 3) * ac;
    EdgeAdmittance::new(
        PhaseSet::ABC,
        &mt * y_l * ac,
        y_l * m * ac,
        &mt * y_l * (m - &a_eye),
        y_l * (&a_eye - m) * ac + y_m * c(a * a, 0.0),
    )
}

pub fn delta_wye_four_params(a: f64, y_l: &CMatrix, y_m: &CMatrix) -> Result<EdgeAdmittance> {
    uvn_four_params(&gamma(), a, y_l, y_m)
}

pub fn wye_wye_four_params(a: f64, y_l: &CMatrix, y_m: &CMatrix) -> Result<EdgeAdmittance> {
    uvn_four_params(&CMatrix::identity(3, 3), a, y_l, y_m)
}

pub fn transformer_four_params(
    connection: Connection,
    a: f64,
    y_l: &CMatrix,
    y_m: &CMatrix,
) -> Result<EdgeAdmittance> {
    match connection {
        Connection::DeltaWye => delta_wye_four_params(a, y_l, y_m),
        Connection::WyeWye => wye_wye_four_params(a, y_l, y_m),
    }
}
