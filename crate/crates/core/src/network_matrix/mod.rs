//! System-level operators: the phasor-domain admittance matrix `Y` and the
//! incidence-based operators of the inductive-line time-domain model.

mod dump;
mod time_domain;

use std::collections::BTreeMap;

use crate::circuit_model::{CircuitGraph, EdgeKind, Phase, PhaseSet};
use crate::component_admittance::EdgeAdmittance;
use crate::error::{Error, Result};
use crate::linalg::{kron_identity, CMatrix, RMatrix};

pub use dump::{read_matrix_dump, write_matrix_dump, MatrixDump};
pub use time_domain::{build_time_domain, zoh_discretize, Discretized, TimeDomainNetwork};

/// Phase-expanded bus ordering: buses sorted by id, phases a < b < c.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BusIndex {
    buses: Vec<String>,
    phases: Vec<PhaseSet>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BusIndex {
    pub fn from_graph(g: &CircuitGraph) -> BusIndex {
        Self::new(g.buses().map(|b| (b.id.clone(), b.phases)))
    }

    pub fn new(buses: impl IntoIterator<Item = (String, PhaseSet)>) -> BusIndex {
        let mut entries: Vec<(String, PhaseSet)> = buses.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut offsets = Vec::with_capacity(entries.len());
        let mut dim = 0;
        for (_, p) in &entries {
            offsets.push(dim);
            dim += p.len();
        }
        let (buses, phases) = entries.into_iter().unzip();
        BusIndex {
            buses,
            phases,
            offsets,
            dim,
        }
    }

    /// Total number of phase-expanded entries.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn buses(&self) -> &[String] {
        &self.buses
    }

    pub fn position(&self, bus: &str) -> Option<usize> {
        self.buses.binary_search_by(|b| b.as_str().cmp(bus)).ok()
    }

    pub fn phases_of(&self, bus: &str) -> Option<PhaseSet> {
        self.position(bus).map(|i| self.phases[i])
    }

    pub fn index(&self, bus: &str, phase: Phase) -> Option<usize> {
        let i = self.position(bus)?;
        Some(self.offsets[i] + self.phases[i].position(phase)?)
    }

    /// Phase-expanded indices of a bus, in phase order.
    pub fn range(&self, bus: &str) -> Option<std::ops::Range<usize>> {
        let i = self.position(bus)?;
        Some(self.offsets[i]..self.offsets[i] + self.phases[i].len())
    }

    /// `(bus, phase)` for every expanded index.
    pub fn labels(&self) -> Vec<(String, Phase)> {
        self.buses
            .iter()
            .zip(&self.phases)
            .flat_map(|(b, p)| p.iter().map(move |ph| (b.clone(), ph)))
            .collect()
    }

    pub fn label_strings(&self) -> Vec<String> {
        self.labels()
            .into_iter()
            .map(|(b, p)| format!("{b}.{}", p.label()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkAdmittance {
    pub y: CMatrix,
    pub index: BusIndex,
}

fn ensure_reduced(g: &CircuitGraph) -> Result<()> {
    for e in g.edges() {
        match &e.kind {
            EdgeKind::Switch(_) => {
                return Err(Error::Integrity(format!(
                    "switch {:?} present; reduce the graph first",
                    e.id
                )))
            }
            EdgeKind::Line(l) if l.length == 0.0 => {
                return Err(Error::Integrity(format!(
                    "zero-length line {:?} present; reduce the graph first",
                    e.id
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Assembles the phase-expanded network admittance matrix.
///
/// Off-diagonal block `(j,k)` collects `-y_s_jk` of every edge between `j`
/// and `k`; diagonal block `j` collects `y_s_jl + y_m_jl` over incident edges.
pub fn assemble_y(
    g: &CircuitGraph,
    params: &BTreeMap<String, EdgeAdmittance>,
) -> Result<NetworkAdmittance> {
    ensure_reduced(g)?;
    let index = BusIndex::from_graph(g);
    let mut y = CMatrix::zeros(index.dim(), index.dim());
    for edge in g.edges() {
        let p = params
            .get(&edge.id)
            .ok_or_else(|| Error::Integrity(format!("no admittance for edge {:?}", edge.id)))?;
        if p.phases != edge.kind.phases() || p.dim() != p.phases.len() {
            return Err(Error::Dimension(format!(
                "edge {:?}: admittance phases {} do not match edge phases {}",
                edge.id,
                p.phases,
                edge.kind.phases()
            )));
        }
        let rows = |bus: &str| -> Result<Vec<usize>> {
            p.phases
                .iter()
                .map(|ph| {
                    index.index(bus, ph).ok_or_else(|| Error::PhaseMismatch {
                        edge: edge.id.clone(),
                        message: format!("bus {bus} lacks phase {}", ph.label()),
                    })
                })
                .collect()
        };
        let (j, k) = (rows(&edge.from_bus)?, rows(&edge.to_bus)?);
        let self_j = &p.y_s_jk + &p.y_m_jk;
        let self_k = &p.y_s_kj + &p.y_m_kj;
        for a in 0..p.dim() {
            for b in 0..p.dim() {
                y[(j[a], j[b])] += self_j[(a, b)];
                y[(k[a], k[b])] += self_k[(a, b)];
                y[(j[a], k[b])] -= p.y_s_jk[(a, b)];
                y[(k[a], j[b])] -= p.y_s_kj[(a, b)];
            }
        }
    }
    Ok(NetworkAdmittance { y, index })
}

/// Node-by-edge incidence matrix; column `e` has `+1` at the sending bus
/// and `-1` at the receiving bus.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    pub c: RMatrix,
    pub buses: Vec<String>,
    pub edges: Vec<String>,
}

impl IncidenceMatrix {
    /// `Ĉ = Cᵀ ⊗ I₃`: maps bus voltages to line voltage drops.
    pub fn kvl_operator(&self) -> RMatrix {
        kron_identity(&self.c.transpose(), 3)
    }

    /// `C ⊗ I₃`: maps line currents to bus injections.
    pub fn kcl_operator(&self) -> RMatrix {
        kron_identity(&self.c, 3)
    }
}

pub fn incidence(g: &CircuitGraph) -> Result<IncidenceMatrix> {
    ensure_reduced(g)?;
    let buses = g.bus_ids();
    let pos = |id: &str| buses.binary_search_by(|b| b.as_str().cmp(id)).unwrap();
    let mut c = RMatrix::zeros(buses.len(), g.n_edges());
    for (e, edge) in g.edges().iter().enumerate() {
        c[(pos(&edge.from_bus), e)] = 1.0;
        c[(pos(&edge.to_bus), e)] = -1.0;
    }
    Ok(IncidenceMatrix {
        c,
        buses,
        edges: g.edges().iter().map(|e| e.id.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_model::{Bus, Edge, LineImpedance, LineSpec};
    use crate::component_admittance::{edge_admittances, pi_line_params};
    use crate::linalg::{c, CVector};

    fn bus(id: &str) -> Bus {
        Bus {
            id: id.into(),
            phases: PhaseSet::ABC,
            nominal_voltage: 480.0,
            is_injection: true,
        }
    }

    fn line(id: &str, from: &str, to: &str, y: CMatrix) -> Edge {
        Edge {
            id: id.into(),
            from_bus: from.into(),
            to_bus: to.into(),
            kind: EdgeKind::Line(LineSpec {
                length: 1.0,
                phases: PhaseSet::ABC,
                impedance: LineImpedance::Direct {
                    series: y,
                    shunt: None,
                },
                transposed: false,
            }),
        }
    }

    fn sample_y() -> CMatrix {
        CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c(3.0, -6.0)
            } else {
                c(-0.5, 1.0 + 0.1 * (i + j) as f64)
            }
        })
    }

    #[test]
    fn two_bus_block_structure() {
        let y = sample_y();
        let g = CircuitGraph::new("t", vec![bus("1"), bus("2")], vec![line("L", "1", "2", y.clone())])
            .unwrap();
        let net = assemble_y(&g, &edge_admittances(&g).unwrap()).unwrap();
        assert_eq!(net.y.shape(), (6, 6));
        assert_eq!(net.y.view((0, 0), (3, 3)), y);
        assert_eq!(net.y.view((0, 3), (3, 3)), -&y);
        assert_eq!(net.y.view((3, 0), (3, 3)), -&y);
        let v = CVector::from_vec(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0)]);
        let mut full = CVector::zeros(6);
        full.rows_mut(0, 3).copy_from(&v);
        full.rows_mut(3, 3).copy_from(&v);
        assert!((&net.y * full).norm() < 1e-13);
        assert_eq!(net.y, net.y.transpose());
    }

    #[test]
    fn no_edges_gives_zero() {
        let g = CircuitGraph::new("t", vec![bus("1"), bus("2")], vec![]).unwrap();
        let net = assemble_y(&g, &BTreeMap::new()).unwrap();
        assert!(net.y.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn missing_parameters_error() {
        let g = CircuitGraph::new("t", vec![bus("1"), bus("2")], vec![line("L", "1", "2", sample_y())])
            .unwrap();
        assert!(matches!(assemble_y(&g, &BTreeMap::new()), Err(Error::Integrity(_))));
    }

    #[test]
    fn phase_dimension_mismatch_error() {
        let g = CircuitGraph::new("t", vec![bus("1"), bus("2")], vec![line("L", "1", "2", sample_y())])
            .unwrap();
        let mut params = BTreeMap::new();
        let z = CMatrix::zeros(2, 2);
        params.insert(
            "L".to_string(),
            pi_line_params(PhaseSet::parse("ab").unwrap(), &z, &z, &z).unwrap(),
        );
        assert!(matches!(assemble_y(&g, &params), Err(Error::Dimension(_))));
    }

    #[test]
    fn single_phase_lateral_indexes_correctly() {
        let mut lat = bus("3");
        lat.phases = PhaseSet::parse("b").unwrap();
        let y1 = CMatrix::from_element(1, 1, c(2.0, -4.0));
        let mut lateral = line("L2", "2", "3", y1);
        if let EdgeKind::Line(l) = &mut lateral.kind {
            l.phases = PhaseSet::parse("b").unwrap();
        }
        let g = CircuitGraph::new(
            "t",
            vec![bus("1"), bus("2"), lat],
            vec![line("L1", "1", "2", sample_y()), lateral],
        )
        .unwrap();
        let net = assemble_y(&g, &edge_admittances(&g).unwrap()).unwrap();
        assert_eq!(net.index.dim(), 7);
        let (b2, b3) = (
            net.index.index("2", Phase::B).unwrap(),
            net.index.index("3", Phase::B).unwrap(),
        );
        assert_eq!(b3, 6);
        assert_eq!(net.y[(b2, b3)], c(-2.0, 4.0));
        assert_eq!(net.y[(b3, b3)], c(2.0, -4.0));
    }

    #[test]
    fn path_incidence() {
        let g = CircuitGraph::new(
            "p",
            vec![bus("1"), bus("2"), bus("3")],
            vec![line("a", "1", "2", sample_y()), line("b", "2", "3", sample_y())],
        )
        .unwrap();
        let inc = incidence(&g).unwrap();
        assert_eq!(
            inc.c,
            RMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 1.0, 0.0, -1.0])
        );
        for col in inc.c.column_iter() {
            assert_eq!(col.sum(), 0.0);
        }
        assert_eq!(inc.kcl_operator(), inc.kvl_operator().transpose());
    }
}
