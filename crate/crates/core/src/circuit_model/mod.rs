//! Typed single-line-diagram graph and its reduction to the electrical network.
//!
//! A [`CircuitGraph`] loaded from a circuit document is the physical asset
//! network: it still contains switches and zero-length lines.
//! [`CircuitGraph::electrical_reduction`] contracts zero-impedance edges and
//! deletes open switches for one instant in time.

mod reduction;
mod schema;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub use reduction::connected_components;
pub use schema::{
    BusDoc, CircuitDocument, ConductorDoc, GeometryDoc, LineDoc, NameplateDoc, SwitchDoc,
    SwitchIntervalDoc, TransformerDoc,
};

pub const DEFAULT_FREQUENCY: f64 = 60.0;
pub const DEFAULT_EARTH_RESISTIVITY: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn label(self) -> char {
        match self {
            Phase::A => 'a',
            Phase::B => 'b',
            Phase::C => 'c',
        }
    }

    pub fn from_char(ch: char) -> Option<Phase> {
        match ch.to_ascii_lowercase() {
            'a' => Some(Phase::A),
            'b' => Some(Phase::B),
            'c' => Some(Phase::C),
            _ => None,
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// A subset of {a, b, c}, iterated in a < b < c order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn parse(s: &str) -> Option<PhaseSet> {
        let mut bits = 0u8;
        for ch in s.chars() {
            let p = Phase::from_char(ch)?;
            if bits & p.bit() != 0 {
                return None;
            }
            bits |= p.bit();
        }
        Some(PhaseSet(bits))
    }

    pub fn from_phases(phases: impl IntoIterator<Item = Phase>) -> PhaseSet {
        PhaseSet(phases.into_iter().fold(0, |acc, p| acc | p.bit()))
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: PhaseSet) -> PhaseSet {
        PhaseSet(self.0 | other.0)
    }

    /// Position of `p` within this set, if present.
    pub fn position(self, p: Phase) -> Option<usize> {
        self.iter().position(|q| q == p)
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.iter().try_for_each(|p| write!(f, "{}", p.label()))
    }
}

impl fmt::Debug for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseSet({self})")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Line-to-line, volts.
    pub nominal_voltage: f64,
    /// Whether a non-zero current injection is expected at this bus.
    pub is_injection: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConductorRole {
    Phase(Phase),
    Neutral,
}

/// One conductor of an overhead or cable arrangement. SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Conductor {
    pub role: ConductorRole,
    /// Horizontal position, m.
    pub x: f64,
    /// Height above ground, m.
    pub y: f64,
    /// Geometric mean radius, m.
    pub gmr: f64,
    /// Ω/m at operating temperature.
    pub resistance: f64,
    /// Outside radius, m. Needed only for shunt capacitance.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineGeometry {
    pub conductors: Vec<Conductor>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineImpedance {
    Geometry(LineGeometry),
    /// Total series and shunt admittance of the line, siemens. The shunt is
    /// split evenly between both ends.
    Direct {
        series: CMatrix,
        shunt: Option<CMatrix>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSpec {
    /// Meters. Zero marks the line as a zero-impedance element.
    pub length: f64,
    pub phases: PhaseSet,
    pub impedance: LineImpedance,
    pub transposed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connection {
    DeltaWye,
    WyeWye,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grounding {
    Primary,
    Secondary,
    Both,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerSpec {
    pub connection: Connection,
    pub turns_ratio: f64,
    /// 3×3, siemens.
    pub series_admittance: CMatrix,
    /// 3×3, siemens.
    pub shunt_admittance: CMatrix,
    pub grounding: Grounding,
}

/// One entry of a switch schedule. `to == None` means open-ended.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchState {
    pub closed: bool,
    pub from: DateTime<Utc>,
    pub to: Option<DateTime<Utc>>,
}

impl SwitchState {
    pub fn covers(&self, at: DateTime<Utc>) -> bool {
        self.from <= at && self.to.is_none_or(|to| at < to)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSchedule {
    pub phases: PhaseSet,
    pub states: Vec<SwitchState>,
}

impl SwitchSchedule {
    pub fn state_at(&self, at: DateTime<Utc>) -> Option<&SwitchState> {
        self.states.iter().find(|s| s.covers(at))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeKind {
    Line(LineSpec),
    Transformer(TransformerSpec),
    Switch(SwitchSchedule),
}

impl EdgeKind {
    pub fn name(&self) -> &'static str {
        match self {
            EdgeKind::Line(_) => "line",
            EdgeKind::Transformer(_) => "transformer",
            EdgeKind::Switch(_) => "switch",
        }
    }

    pub fn phases(&self) -> PhaseSet {
        match self {
            EdgeKind::Line(l) => l.phases,
            EdgeKind::Transformer(_) => PhaseSet::ABC,
            EdgeKind::Switch(s) => s.phases,
        }
    }
}

/// A directed power-transfer element `from_bus → to_bus`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub kind: EdgeKind,
}

impl Edge {
    /// Closed switches and zero-length lines.
    pub fn is_zero_impedance(&self, at: DateTime<Utc>) -> Result<bool> {
        Ok(match &self.kind {
            EdgeKind::Line(l) => l.length == 0.0,
            EdgeKind::Transformer(_) => false,
            EdgeKind::Switch(s) => self.switch_state(s, at)?.closed,
        })
    }

    fn switch_state<'a>(
        &self,
        s: &'a SwitchSchedule,
        at: DateTime<Utc>,
    ) -> Result<&'a SwitchState> {
        s.state_at(at).ok_or_else(|| Error::MissingSwitchState {
            switch: self.id.clone(),
            at: at.to_rfc3339(),
        })
    }
}

/// What a switch turns into during reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchMarker {
    Contract,
    Delete,
}

pub fn switch_marker(state: &SwitchState) -> SwitchMarker {
    if state.closed {
        SwitchMarker::Contract
    } else {
        SwitchMarker::Delete
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGraph {
    pub name: String,
    /// System frequency, Hz.
    pub frequency: f64,
    /// Earth resistivity, Ω·m.
    pub earth_resistivity: f64,
    buses: BTreeMap<String, Bus>,
    edges: Vec<Edge>,
    merge_map: BTreeMap<String, String>,
    reduced_at: Option<DateTime<Utc>>,
}

impl CircuitGraph {
    /// Builds and validates a graph. Edges are kept sorted by id.
    pub fn new(
        name: impl Into<String>,
        buses: Vec<Bus>,
        mut edges: Vec<Edge>,
    ) -> Result<CircuitGraph> {
        let mut map = BTreeMap::new();
        for bus in buses {
            validate_bus(&bus)?;
            let id = bus.id.clone();
            if map.insert(id.clone(), bus).is_some() {
                return Err(Error::Integrity(format!("duplicate bus id {id:?}")));
            }
        }
        let mut seen = BTreeSet::new();
        for edge in &edges {
            if !seen.insert(edge.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate edge id {:?}", edge.id)));
            }
            validate_edge(edge, &map)?;
        }
        edges.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(CircuitGraph {
            name: name.into(),
            frequency: DEFAULT_FREQUENCY,
            earth_resistivity: DEFAULT_EARTH_RESISTIVITY,
            buses: map,
            edges,
            merge_map: BTreeMap::new(),
            reduced_at: None,
        })
    }

    pub fn with_frequency(mut self, frequency: f64, earth_resistivity: f64) -> Self {
        self.frequency = frequency;
        self.earth_resistivity = earth_resistivity;
        self
    }

    /// Parses and validates a circuit document.
    pub fn load(reader: impl std::io::Read) -> Result<CircuitGraph> {
        let value: serde_json::Value =
            serde_json::from_reader(reader).map_err(|e| Error::parse("document", e))?;
        CircuitDocument::from_value(value)?.into_graph()
    }

    pub fn load_path(path: impl AsRef<std::path::Path>) -> Result<CircuitGraph> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load(std::io::BufReader::new(file))
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Buses in sorted id order.
    pub fn buses(&self) -> impl Iterator<Item = &Bus> {
        self.buses.values()
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.buses.get(id)
    }

    pub fn bus_ids(&self) -> Vec<String> {
        self.buses.keys().cloned().collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    /// Maps every bus merged away during reduction to its surviving bus.
    pub fn merge_map(&self) -> &BTreeMap<String, String> {
        &self.merge_map
    }

    /// Surviving id for any bus of the original asset network.
    pub fn resolve_bus<'a>(&'a self, id: &'a str) -> &'a str {
        self.merge_map.get(id).map_or(id, String::as_str)
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced_at.is_some()
    }

    pub fn reduced_at(&self) -> Option<DateTime<Utc>> {
        self.reduced_at
    }

    /// Reduction marker for a switch in an unreduced graph.
    pub fn switch_marker(&self, edge_id: &str, at: DateTime<Utc>) -> Result<SwitchMarker> {
        if self.is_reduced() {
            return Err(Error::Integrity(format!(
                "switch {edge_id:?} queried on a reduced graph; switches do not survive reduction"
            )));
        }
        let edge = self
            .edge(edge_id)
            .ok_or_else(|| Error::Integrity(format!("unknown edge {edge_id:?}")))?;
        match &edge.kind {
            EdgeKind::Switch(s) => Ok(switch_marker(edge.switch_state(s, at)?)),
            other => Err(Error::Integrity(format!(
                "edge {edge_id:?} is a {}, not a switch",
                other.name()
            ))),
        }
    }

    /// Connected components as sorted lists of bus ids.
    pub fn components(&self) -> Vec<Vec<String>> {
        connected_components(self)
    }

    pub fn electrical_reduction(&self, at: DateTime<Utc>) -> Result<CircuitGraph> {
        reduction::reduce(self, at)
    }
}

fn validate_bus(bus: &Bus) -> Result<()> {
    if bus.phases.is_empty() {
        return Err(Error::Integrity(format!("bus {:?} has no phases", bus.id)));
    }
    if !(bus.nominal_voltage > 0.0) {
        return Err(Error::Integrity(format!(
            "bus {:?} nominal voltage must be positive",
            bus.id
        )));
    }
    Ok(())
}

fn validate_edge(edge: &Edge, buses: &BTreeMap<String, Bus>) -> Result<()> {
    let lookup = |id: &str| {
        buses.get(id).ok_or_else(|| {
            Error::Integrity(format!("edge {:?} references unknown bus {id:?}", edge.id))
        })
    };
    let from = lookup(&edge.from_bus)?;
    let to = lookup(&edge.to_bus)?;
    if edge.from_bus == edge.to_bus {
        return Err(Error::Integrity(format!(
            "edge {:?} connects bus {:?} to itself",
            edge.id, edge.from_bus
        )));
    }
    let phases = edge.kind.phases();
    if phases.is_empty() || !phases.is_subset(from.phases) || !phases.is_subset(to.phases) {
        return Err(Error::PhaseMismatch {
            edge: edge.id.clone(),
            message: format!(
                "edge phases {phases} not available at both ends ({}: {}, {}: {})",
                from.id, from.phases, to.id, to.phases
            ),
        });
    }
    match &edge.kind {
        EdgeKind::Line(line) => {
            if !(line.length >= 0.0) || !line.length.is_finite() {
                return Err(Error::Integrity(format!(
                    "line {:?} length must be finite and non-negative",
                    edge.id
                )));
            }
            if let LineImpedance::Direct { series, shunt } = &line.impedance {
                let p = line.phases.len();
                let bad = |m: &CMatrix| m.shape() != (p, p);
                if bad(series) || shunt.as_ref().is_some_and(bad) {
                    return Err(Error::Dimension(format!(
                        "line {:?}: admittance blocks must be {p}×{p}",
                        edge.id
                    )));
                }
            }
        }
        EdgeKind::Transformer(t) => {
            if !(t.turns_ratio > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "transformer {:?}: turns ratio must be positive",
                    edge.id
                )));
            }
            if from.phases != PhaseSet::ABC || to.phases != PhaseSet::ABC {
                return Err(Error::PhaseMismatch {
                    edge: edge.id.clone(),
                    message: "three-phase transformer needs three-phase buses".into(),
                });
            }
        }
        EdgeKind::Switch(s) => {
            let mut states: Vec<&SwitchState> = s.states.iter().collect();
            states.sort_by_key(|st| st.from);
            for pair in states.windows(2) {
                if pair[0].to.is_none_or(|to| to > pair[1].from) {
                    return Err(Error::Integrity(format!(
                        "switch {:?} has overlapping state intervals",
                        edge.id
                    )));
                }
            }
        }
    }
    Ok(())
}
