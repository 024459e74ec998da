//! Line constants from conductor geometry: modified Carson's equations for
//! the series impedance, Maxwell potential coefficients for the shunt
//! capacitance, and Kron reduction of grounded neutrals.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::RLLineParams;
use crate::circuit_model::{CircuitGraph, ConductorRole, LineGeometry};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, RMatrix};

/// μ0 / (4π), H/m.
const MU0_OVER_4PI: f64 = 1e-7;
const EPSILON0: f64 = 8.854_187_812_8e-12;
/// Carson's `k = K · S · sqrt(f/ρ)` with `S` in meters (8.565e-4 per foot).
const CARSON_K_PER_M: f64 = 8.565e-4 / 0.3048;
/// Leading constant of the truncated `Q` series.
const CARSON_Q0: f64 = -0.0386;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarsonSettings {
    /// Hz.
    pub frequency: f64,
    /// Ω·m.
    pub earth_resistivity: f64,
}

impl Default for CarsonSettings {
    fn default() -> Self {
        CarsonSettings {
            frequency: 60.0,
            earth_resistivity: 100.0,
        }
    }
}

impl CarsonSettings {
    pub fn from_graph(g: &CircuitGraph) -> Self {
        CarsonSettings {
            frequency: g.frequency,
            earth_resistivity: g.earth_resistivity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineParameters {
    /// Total phase impedance, Ω.
    pub series_impedance: CMatrix,
    /// Total shunt admittance, S (zero when conductor radii are not given).
    pub shunt_admittance: CMatrix,
    pub rl: RLLineParams,
}

/// Phase-frame line constants, scaled by `length` (m).
///
/// Phase conductors come first in a < b < c order; every neutral is
/// assumed grounded and is eliminated by Kron reduction.
pub fn carson_line_params(
    line_id: &str,
    geometry: &LineGeometry,
    length: f64,
    settings: CarsonSettings,
) -> Result<LineParameters> {
    let err = |message: String| Error::LineGeometry {
        line: line_id.to_string(),
        message,
    };
    let CarsonSettings {
        frequency: f,
        earth_resistivity: rho,
    } = settings;
    if !(f > 0.0) || !(rho > 0.0) {
        return Err(err("frequency and earth resistivity must be positive".into()));
    }

    let mut order: Vec<usize> = (0..geometry.conductors.len()).collect();
    order.sort_by_key(|&i| match geometry.conductors[i].role {
        ConductorRole::Phase(p) => p as usize,
        ConductorRole::Neutral => 3,
    });
    let conds: Vec<_> = order.iter().map(|&i| &geometry.conductors[i]).collect();
    let n_phase = conds
        .iter()
        .filter(|c| matches!(c.role, ConductorRole::Phase(_)))
        .count();
    if n_phase == 0 {
        return Err(err("no phase conductors".into()));
    }
    for w in conds.windows(2) {
        if let (ConductorRole::Phase(a), ConductorRole::Phase(b)) = (w[0].role, w[1].role) {
            if a == b {
                return Err(err(format!("phase {} appears twice", a.label())));
            }
        }
    }
    for (i, cd) in conds.iter().enumerate() {
        if !(cd.gmr > 0.0) {
            return Err(err(format!("conductor {i}: GMR must be positive")));
        }
        if !(cd.resistance >= 0.0) {
            return Err(err(format!("conductor {i}: resistance must be non-negative")));
        }
    }
    let n = conds.len();
    let dist = |i: usize, j: usize| (conds[i].x - conds[j].x).hypot(conds[i].y - conds[j].y);
    for i in 0..n {
        for j in i + 1..n {
            if dist(i, j) <= 0.0 {
                return Err(err(format!("conductors {i} and {j} are coincident")));
            }
        }
    }

    let w = 2.0 * PI * f;
    // Modified Carson: the image distance cancels between the ln(S/·) term
    // and the first two terms of Q, leaving an earth-return constant.
    let earth = 2.0 * CARSON_Q0 + (2.0 / (CARSON_K_PER_M * (f / rho).sqrt())).ln();
    let real_earth = w * MU0_OVER_4PI * PI / 2.0;
    let x_coeff = 2.0 * w * MU0_OVER_4PI;
    let primitive = CMatrix::from_fn(n, n, |i, j| {
        let (r, d) = if i == j {
            (conds[i].resistance, conds[i].gmr)
        } else {
            (0.0, dist(i, j))
        };
        c(r + real_earth, x_coeff * ((1.0 / d).ln() + earth))
    });
    let z_phase = kron_reduce(&primitive, n_phase)
        .ok_or_else(|| err("singular neutral impedance block".into()))?;

    let shunt_per_m = match conds.iter().filter(|c| c.radius.is_some()).count() {
        0 => CMatrix::zeros(n_phase, n_phase),
        k if k == n => shunt_admittance_per_m(&conds, w, &err)?,
        _ => return Err(err("radius must be given for all conductors or none".into())),
    };

    let series = z_phase * c(length, 0.0);
    let rl = RLLineParams::new(series.map(|z| z.re), series.map(|z| z.im / w))?;
    Ok(LineParameters {
        series_impedance: series,
        shunt_admittance: shunt_per_m * c(length, 0.0),
        rl,
    })
}

fn shunt_admittance_per_m(
    conds: &[&crate::circuit_model::Conductor],
    w: f64,
    err: &dyn Fn(String) -> Error,
) -> Result<CMatrix> {
    let n = conds.len();
    for (i, cd) in conds.iter().enumerate() {
        if !(cd.y > 0.0) || !(cd.radius.unwrap_or(0.0) > 0.0) {
            return Err(err(format!(
                "conductor {i}: height and radius must be positive for capacitance"
            )));
        }
    }
    let k = 1.0 / (2.0 * PI * EPSILON0);
    let p = RMatrix::from_fn(n, n, |i, j| {
        let image = (conds[i].x - conds[j].x).hypot(conds[i].y + conds[j].y);
        let direct = if i == j {
            conds[i].radius.unwrap()
        } else {
            (conds[i].x - conds[j].x).hypot(conds[i].y - conds[j].y)
        };
        k * (image / direct).ln()
    });
    let n_phase = conds
        .iter()
        .filter(|c| matches!(c.role, ConductorRole::Phase(_)))
        .count();
    let pc = kron_reduce(&p.map(|v| c(v, 0.0)), n_phase)
        .ok_or_else(|| err("singular potential coefficient block".into()))?;
    let cap = pc
        .try_inverse()
        .ok_or_else(|| err("singular potential coefficient matrix".into()))?;
    Ok(cap * c(0.0, w))
}

/// Eliminates trailing rows/columns `keep..` assuming zero voltage there:
/// `Z_pp - Z_pn Z_nn⁻¹ Z_np`.
pub(crate) fn kron_reduce(z: &DMatrix<Complex64>, keep: usize) -> Option<CMatrix> {
    let n = z.nrows();
    if keep == n {
        return Some(z.clone());
    }
    let zpp = z.view((0, 0), (keep, keep));
    let zpn = z.view((0, keep), (keep, n - keep));
    let znp = z.view((keep, 0), (n - keep, keep));
    let znn_inv = z.view((keep, keep), (n - keep, n - keep)).into_owned().try_inverse()?;
    Some(zpp - zpn * znn_inv * znp)
}
