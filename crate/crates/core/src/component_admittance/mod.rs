//! Per-edge admittance models.
//!
//! Every edge is reduced to four `p×p` blocks `(y_s_jk, y_s_kj, y_m_jk, y_m_kj)`:
//! series admittance in each direction plus sending/receiving shunts. The
//! two-port form relating `[I_jk; I_kj]` to `[V_j; V_k]` is
//!
//! ```text
//! [ y_s_jk + y_m_jk      -y_s_jk       ]
//! [    -y_s_kj       y_s_kj + y_m_kj   ]
//! ```

mod carson;
mod transformer;

use std::collections::BTreeMap;

use crate::circuit_model::{CircuitGraph, Edge, EdgeKind, LineImpedance, PhaseSet, TransformerSpec};
use crate::error::{Error, Result};
use crate::linalg::{complex_inverse, CMatrix, CVector, RMatrix};

pub use carson::{carson_line_params, CarsonSettings, LineParameters};
pub use transformer::{
    delta_wye_admittance, delta_wye_four_params, gamma, transformer_four_params,
    wye_wye_four_params,
};

/// The unified four-parameter edge description.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAdmittance {
    pub phases: PhaseSet,
    pub y_s_jk: CMatrix,
    pub y_s_kj: CMatrix,
    pub y_m_jk: CMatrix,
    pub y_m_kj: CMatrix,
}

impl EdgeAdmittance {
    pub fn new(
        phases: PhaseSet,
        y_s_jk: CMatrix,
        y_s_kj: CMatrix,
        y_m_jk: CMatrix,
        y_m_kj: CMatrix,
    ) -> Result<EdgeAdmittance> {
        let p = phases.len();
        for (name, m) in [
            ("y_s_jk", &y_s_jk),
            ("y_s_kj", &y_s_kj),
            ("y_m_jk", &y_m_jk),
            ("y_m_kj", &y_m_kj),
        ] {
            if m.shape() != (p, p) {
                return Err(Error::Dimension(format!(
                    "{name} is {:?}, expected {p}×{p}",
                    m.shape()
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
        }
        Ok(EdgeAdmittance {
            phases,
            y_s_jk,
            y_s_kj,
            y_m_jk,
            y_m_kj,
        })
    }

    pub fn dim(&self) -> usize {
        self.y_s_jk.nrows()
    }

    /// Reassembles the `2p×2p` two-port matrix.
    pub fn two_port(&self) -> TwoPortAdmittance {
        let p = self.dim();
        let mut y = CMatrix::zeros(2 * p, 2 * p);
        y.view_mut((0, 0), (p, p))
            .copy_from(&(&self.y_s_jk + &self.y_m_jk));
        y.view_mut((0, p), (p, p)).copy_from(&(-&self.y_s_jk));
        y.view_mut((p, 0), (p, p)).copy_from(&(-&self.y_s_kj));
        y.view_mut((p, p), (p, p))
            .copy_from(&(&self.y_s_kj + &self.y_m_kj));
        TwoPortAdmittance { y }
    }
}

/// `[I_jk; I_kj] = Y_jk [V_j; V_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortAdmittance {
    pub y: CMatrix,
}

impl TwoPortAdmittance {
    pub fn dim(&self) -> usize {
        self.y.nrows() / 2
    }

    /// Currents injected into the edge at its two terminals.
    pub fn currents(&self, v_j: &CVector, v_k: &CVector) -> (CVector, CVector) {
        let p = self.dim();
        let mut v = CVector::zeros(2 * p);
        v.rows_mut(0, p).copy_from(v_j);
        v.rows_mut(p, p).copy_from(v_k);
        let i = &self.y * v;
        (i.rows(0, p).into_owned(), i.rows(p, p).into_owned())
    }
}

/// Series resistance and inductance of a line (time-domain model).
#[derive(Debug, Clone, PartialEq)]
pub struct RLLineParams {
    /// Ω.
    pub r: RMatrix,
    /// H.
    pub l: RMatrix,
}

impl RLLineParams {
    pub fn new(r: RMatrix, l: RMatrix) -> Result<RLLineParams> {
        if !r.is_square() || r.shape() != l.shape() {
            return Err(Error::Dimension("R and L must be square and equal size".into()));
        }
        let sym = |m: &RMatrix| {
            let scale = m.amax().max(f64::MIN_POSITIVE);
            (m - m.transpose()).amax() <= 1e-12 * scale
        };
        if !sym(&r) || !sym(&l) {
            return Err(Error::InvalidParameter("R and L must be symmetric".into()));
        }
        if r.diagonal().iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParameter("R has a negative diagonal entry".into()));
        }
        Ok(RLLineParams { r, l })
    }

    /// Series impedance `R + jωL`.
    pub fn impedance(&self, frequency: f64) -> CMatrix {
        let w = 2.0 * std::f64::consts::PI * frequency;
        CMatrix::from_fn(self.r.nrows(), self.r.ncols(), |i, j| {
            num_complex::Complex64::new(self.r[(i, j)], w * self.l[(i, j)])
        })
    }
}

/// Π-model two-port: `y_s_jk = y_s_kj = y_s`.
pub fn pi_line_admittance(
    y_s: &CMatrix,
    y_m_send: &CMatrix,
    y_m_recv: &CMatrix,
) -> Result<TwoPortAdmittance> {
    let p = y_s.nrows();
    let phases = default_phases(p)?;
    Ok(pi_line_params(phases, y_s, y_m_send, y_m_recv)?.two_port())
}

pub fn pi_line_params(
    phases: PhaseSet,
    y_s: &CMatrix,
    y_m_send: &CMatrix,
    y_m_recv: &CMatrix,
) -> Result<EdgeAdmittance> {
    if !y_s.is_square() || y_m_send.shape() != y_s.shape() || y_m_recv.shape() != y_s.shape() {
        return Err(Error::Dimension(format!(
            "Π blocks must be square and equal: {:?}, {:?}, {:?}",
            y_s.shape(),
            y_m_send.shape(),
            y_m_recv.shape()
        )));
    }
    EdgeAdmittance::new(
        phases,
        y_s.clone(),
        y_s.clone(),
        y_m_send.clone(),
        y_m_recv.clone(),
    )
}

fn default_phases(p: usize) -> Result<PhaseSet> {
    match p {
        1 => Ok(PhaseSet::parse("a").unwrap()),
        2 => Ok(PhaseSet::parse("ab").unwrap()),
        3 => Ok(PhaseSet::ABC),
        _ => Err(Error::Dimension(format!("unsupported phase count {p}"))),
    }
}

/// Four-parameter admittance of a line or transformer edge at the graph's
/// system frequency. Switches and zero-length lines have no finite
/// admittance and must be removed by reduction first.
pub fn edge_admittance(edge: &Edge, settings: CarsonSettings) -> Result<EdgeAdmittance> {
    match &edge.kind {
        EdgeKind::Line(line) => {
            if line.length == 0.0 {
                return Err(Error::Integrity(format!(
                    "line {:?} has zero impedance; reduce the graph first",
                    edge.id
                )));
            }
            match &line.impedance {
                LineImpedance::Geometry(geom) => {
                    let params = carson_line_params(&edge.id, geom, line.length, settings)?;
                    let y_s = complex_inverse(
                        &params.series_impedance,
                        &format!("series impedance of line {}", edge.id),
                    )?;
                    let half = &params.shunt_admittance * num_complex::Complex64::new(0.5, 0.0);
                    pi_line_params(line.phases, &y_s, &half, &half)
                }
                LineImpedance::Direct { series, shunt } => {
                    let p = line.phases.len();
                    let half = shunt
                        .as_ref()
                        .map(|s| s * num_complex::Complex64::new(0.5, 0.0))
                        .unwrap_or_else(|| CMatrix::zeros(p, p));
                    pi_line_params(line.phases, series, &half, &half)
                }
            }
        }
        EdgeKind::Transformer(t) => transformer_edge(t),
        EdgeKind::Switch(_) => Err(Error::Integrity(format!(
            "switch {:?} has no admittance; it is contracted or deleted by reduction",
            edge.id
        ))),
    }
}

fn transformer_edge(t: &TransformerSpec) -> Result<EdgeAdmittance> {
    transformer_four_params(
        t.connection,
        t.turns_ratio,
        &t.series_admittance,
        &t.shunt_admittance,
    )
}

/// Series R/L of a line edge for the time-domain model.
pub fn line_rl_params(edge: &Edge, settings: CarsonSettings) -> Result<RLLineParams> {
    let EdgeKind::Line(line) = &edge.kind else {
        return Err(Error::Integrity(format!(
            "{} {:?} has no R/L line model",
            edge.kind.name(),
            edge.id
        )));
    };
    match &line.impedance {
        LineImpedance::Geometry(geom) => {
            Ok(carson_line_params(&edge.id, geom, line.length, settings)?.rl)
        }
        LineImpedance::Direct { series, .. } => {
            let z = complex_inverse(series, &format!("series admittance of line {}", edge.id))?;
            let w = 2.0 * std::f64::consts::PI * settings.frequency;
            let r = z.map(|v| v.re);
            let l = z.map(|v| v.im / w);
            // Symmetrize away inversion round-off.
            RLLineParams::new((&r + r.transpose()) * 0.5, (&l + l.transpose()) * 0.5)
        }
    }
}

/// Four-parameter admittances for every edge of a reduced graph.
pub fn edge_admittances(g: &CircuitGraph) -> Result<BTreeMap<String, EdgeAdmittance>> {
    let settings = CarsonSettings::from_graph(g);
    g.edges()
        .iter()
        .map(|e| Ok((e.id.clone(), edge_admittance(e, settings)?)))
        .collect()
}

pub fn line_rl_map(g: &CircuitGraph) -> Result<BTreeMap<String, RLLineParams>> {
    let settings = CarsonSettings::from_graph(g);
    g.edges()
        .iter()
        .map(|e| Ok((e.id.clone(), line_rl_params(e, settings)?)))
        .collect()
}
