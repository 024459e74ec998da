//! Which buses and lines are measured, and how to pull those signals out of
//! phasor tables and aligned waveforms.
//!
//! ```json
//! {
//!   "voltage_buses": ["1", "4"],
//!   "current_buses": ["1", "4"],
//!   "zero_injection_buses": ["2", "3"],
//!   "line_currents": [],
//!   "weights": {"voltage": {"1": 2.0}, "current": {}, "line_current": {}}
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{MeasurementSet, TrajectoryMeasurements};
use crate::circuit_model::CircuitGraph;
use crate::error::{Error, Result};
use crate::linalg::{CVector, RMatrix};
use crate::network_matrix::BusIndex;
use crate::waveform::{PhasorTable, WaveformSegment};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecWeights {
    #[serde(default)]
    pub voltage: BTreeMap<String, f64>,
    #[serde(default)]
    pub current: BTreeMap<String, f64>,
    #[serde(default)]
    pub line_current: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    #[serde(default)]
    pub voltage_buses: Vec<String>,
    #[serde(default)]
    pub current_buses: Vec<String>,
    #[serde(default)]
    pub zero_injection_buses: Vec<String>,
    /// Used by the time-domain estimator only.
    #[serde(default)]
    pub line_currents: Vec<String>,
    #[serde(default)]
    pub weights: SpecWeights,
}

const PHASES: [char; 3] = ['a', 'b', 'c'];

impl MeasurementSpec {
    pub fn from_json(s: &str) -> Result<MeasurementSpec> {
        serde_json::from_str(s).map_err(|e| Error::parse("measurement spec", e))
    }

    /// Voltage and current at every injection bus; every other bus is a
    /// zero-injection bus.
    pub fn siting_rule(g: &CircuitGraph) -> MeasurementSpec {
        let (inj, zero): (Vec<_>, Vec<_>) = g.buses().partition(|b| b.is_injection);
        let ids = |v: Vec<&crate::circuit_model::Bus>| v.into_iter().map(|b| b.id.clone()).collect::<Vec<_>>();
        let inj = ids(inj);
        MeasurementSpec {
            voltage_buses: inj.clone(),
            current_buses: inj,
            zero_injection_buses: ids(zero),
            ..Default::default()
        }
    }

    /// Phasor measurements at one row of a table whose channels are named
    /// `<bus>.V<phase>` and `<bus>.I<phase>`.
    pub fn phasor_measurements(&self, index: &BusIndex, table: &PhasorTable, row: usize) -> Result<MeasurementSet> {
        if !self.line_currents.is_empty() {
            log::warn!("line-current measurements are ignored by the phasor estimator");
        }
        let pick = |bus: &str, q: char| -> Result<CVector> {
            let phases = index
                .phases_of(bus)
                .ok_or_else(|| Error::Integrity(format!("measured bus {bus:?} is not in the network")))?;
            let vals = phases
                .iter()
                .map(|p| {
                    let name = format!("{bus}.{q}{}", p.label());
                    table.value(row, &name).ok_or_else(|| {
                        Error::Integrity(format!(
                            "phasor table has no value for {name} at t = {}",
                            table.times[row]
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CVector::from_vec(vals))
        };
        let mut m = MeasurementSet::default();
        for b in &self.voltage_buses {
            m.voltages.insert(b.clone(), pick(b, 'V')?);
        }
        for b in &self.current_buses {
            m.currents.insert(b.clone(), pick(b, 'I')?);
        }
        m.zero_injection = self.zero_injection_buses.iter().cloned().collect();
        m.voltage_weights = self.weights.voltage.clone();
        m.current_weights = self.weights.current.clone();
        Ok(m)
    }

    /// Time-domain measurements from segments already aligned on one grid,
    /// with channels named `<bus>.V<phase>`, `<bus>.I<phase>` and
    /// `<line>.I<phase>`.
    pub fn trajectory_measurements(&self, segments: &[WaveformSegment], dt: f64) -> Result<TrajectoryMeasurements> {
        let n = segments
            .first()
            .ok_or_else(|| Error::Alignment("no segments".into()))?
            .len();
        if segments.iter().any(|s| s.len() != n) {
            return Err(Error::Alignment("segments are not aligned to one grid".into()));
        }
        let mut lookup: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (si, s) in segments.iter().enumerate() {
            for (ci, ch) in s.channels.iter().enumerate() {
                if lookup.insert(ch, (si, ci)).is_some() {
                    return Err(Error::Integrity(format!("channel {ch} is recorded by more than one sensor")));
                }
            }
        }
        let block = |id: &str, q: char| -> Result<RMatrix> {
            let mut m = RMatrix::zeros(3, n);
            for (p, ph) in PHASES.iter().enumerate() {
                let name = format!("{id}.{q}{ph}");
                let &(si, ci) = lookup
                    .get(name.as_str())
                    .ok_or_else(|| Error::Integrity(format!("no waveform channel {name}")))?;
                m.row_mut(p).copy_from(&segments[si].samples.column(ci).transpose());
            }
            Ok(m)
        };
        let mut m = TrajectoryMeasurements {
            dt,
            zero_injection: self.zero_injection_buses.iter().cloned().collect::<BTreeSet<_>>(),
            line_current_weights: self.weights.line_current.clone(),
            bus_current_weights: self.weights.current.clone(),
            voltage_weights: self.weights.voltage.clone(),
            ..Default::default()
        };
        for b in &self.voltage_buses {
            m.bus_voltages.insert(b.clone(), block(b, 'V')?);
        }
        for b in &self.current_buses {
            m.bus_currents.insert(b.clone(), block(b, 'I')?);
        }
        for l in &self.line_currents {
            m.line_currents.insert(l.clone(), block(l, 'I')?);
        }
        Ok(m)
    }
}
