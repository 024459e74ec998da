//! Circuit document schema (JSON).
//!
//! ```json
//! {
//!   "name": "feeder",
//!   "frequency": 60.0,            // Hz, optional
//!   "earth_resistivity": 100.0,   // Ω·m, optional
//!   "buses": [{"id": "1", "phases": "abc", "nominal_voltage": 4160.0, "is_injection": true}],
//!   "lines": [{"id": "L1", "from_bus": "1", "to_bus": "2", "length": 120.0,
//!              "geometry": {"conductors": [{"phase": "a", "x": 0.0, "y": 8.0,
//!                                           "gmr": 0.0074, "resistance": 1.9e-4}]}}],
//!   "transformers": [{"id": "T1", "from_bus": "2", "to_bus": "3", "connection": "delta_wye",
//!                     "turns_ratio": 15.0, "nameplate": {"kva": 500, "percent_z": 5.0, "x_over_r": 4.0}}],
//!   "switches": [{"id": "S1", "from_bus": "3", "to_bus": "4",
//!                 "states": [{"from_ts": "2024-01-01T00:00:00Z", "to_ts": null, "closed": true}]}]
//! }
//! ```
//!
//! Lengths and positions are meters, voltages are line-to-line volts,
//! resistances Ω/m and admittance blocks siemens given as rows of `[re, im]`.

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::*;
use crate::linalg::{c, complex_block_opt};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusDoc {
    pub id: String,
    pub phases: String,
    pub nominal_voltage: f64,
    #[serde(default)]
    pub is_injection: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductorDoc {
    /// "a", "b", "c" or "n".
    pub phase: String,
    pub x: f64,
    pub y: f64,
    pub gmr: f64,
    pub resistance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryDoc {
    pub conductors: Vec<ConductorDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDoc {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryDoc>,
    #[serde(default, with = "complex_block_opt", skip_serializing_if = "Option::is_none")]
    pub series_admittance: Option<CMatrix>,
    #[serde(default, with = "complex_block_opt", skip_serializing_if = "Option::is_none")]
    pub shunt_admittance: Option<CMatrix>,
    #[serde(default)]
    pub transposed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NameplateDoc {
    pub kva: f64,
    pub percent_z: f64,
    pub x_over_r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerDoc {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// "delta_wye" or "wye_wye".
    pub connection: String,
    pub turns_ratio: f64,
    #[serde(default, with = "complex_block_opt", skip_serializing_if = "Option::is_none")]
    pub series_admittance: Option<CMatrix>,
    #[serde(default, with = "complex_block_opt", skip_serializing_if = "Option::is_none")]
    pub shunt_admittance: Option<CMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nameplate: Option<NameplateDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchIntervalDoc {
    pub from_ts: DateTime<Utc>,
    #[serde(default)]
    pub to_ts: Option<DateTime<Utc>>,
    pub closed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchDoc {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<String>,
    pub states: Vec<SwitchIntervalDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDocument {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub earth_resistivity: Option<f64>,
    pub buses: Vec<BusDoc>,
    #[serde(default)]
    pub lines: Vec<LineDoc>,
    #[serde(default)]
    pub transformers: Vec<TransformerDoc>,
    #[serde(default)]
    pub switches: Vec<SwitchDoc>,
}

fn element<T: DeserializeOwned>(kind: &str, idx: usize, v: &Value) -> Result<T> {
    let label = match v.get("id").and_then(Value::as_str) {
        Some(id) => format!("{kind}[{idx}] (id {id:?})"),
        None => format!("{kind}[{idx}]"),
    };
    T::deserialize(v).map_err(|e| Error::parse(label, e))
}

fn array<T: DeserializeOwned>(root: &Value, kind: &str, required: bool) -> Result<Vec<T>> {
    match root.get(kind) {
        None if !required => Ok(Vec::new()),
        None => Err(Error::parse("document", format!("missing array `{kind}`"))),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| element(kind, i, v))
            .collect(),
        Some(_) => Err(Error::parse(kind, "expected an array")),
    }
}

impl CircuitDocument {
    /// Deserializes element by element so errors name the offending entry.
    pub fn from_value(root: Value) -> Result<CircuitDocument> {
        let obj = root
            .as_object()
            .ok_or_else(|| Error::parse("document", "expected a JSON object"))?;
        const KNOWN: [&str; 7] = [
            "name",
            "frequency",
            "earth_resistivity",
            "buses",
            "lines",
            "transformers",
            "switches",
        ];
        if let Some(k) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::parse("document", format!("unknown field `{k}`")));
        }
        let number = |key: &str| -> Result<Option<f64>> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => v
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| Error::parse(key, "expected a number")),
            }
        };
        Ok(CircuitDocument {
            name: obj
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::parse("document", "missing string `name`"))?
                .to_string(),
            frequency: number("frequency")?,
            earth_resistivity: number("earth_resistivity")?,
            buses: array(&root, "buses", true)?,
            lines: array(&root, "lines", false)?,
            transformers: array(&root, "transformers", false)?,
            switches: array(&root, "switches", false)?,
        })
    }

    pub fn into_graph(self) -> Result<CircuitGraph> {
        let frequency = self.frequency.unwrap_or(DEFAULT_FREQUENCY);
        let rho = self.earth_resistivity.unwrap_or(DEFAULT_EARTH_RESISTIVITY);
        if !(frequency > 0.0) || !(rho > 0.0) {
            return Err(Error::parse(
                "document",
                "frequency and earth_resistivity must be positive",
            ));
        }
        let buses = self
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let phases = PhaseSet::parse(&b.phases).ok_or_else(|| {
                    Error::parse(format!("buses[{i}] (id {:?})", b.id), "bad phase string")
                })?;
                Ok(Bus {
                    id: b.id.clone(),
                    phases,
                    nominal_voltage: b.nominal_voltage,
                    is_injection: b.is_injection,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let bus_phases = |id: &str| buses.iter().find(|b| b.id == id).map(|b| b.phases);
        let bus_voltage = |id: &str| buses.iter().find(|b| b.id == id).map(|b| b.nominal_voltage);

        let mut edges = Vec::new();
        for (i, l) in self.lines.into_iter().enumerate() {
            let label = format!("lines[{i}] (id {:?})", l.id);
            edges.push(Edge {
                id: l.id.clone(),
                from_bus: l.from_bus.clone(),
                to_bus: l.to_bus.clone(),
                kind: EdgeKind::Line(line_spec(&label, l, bus_phases)?),
            });
        }
        for (i, t) in self.transformers.into_iter().enumerate() {
            let label = format!("transformers[{i}] (id {:?})", t.id);
            let secondary_ll = bus_voltage(&t.to_bus);
            edges.push(Edge {
                id: t.id.clone(),
                from_bus: t.from_bus.clone(),
                to_bus: t.to_bus.clone(),
                kind: EdgeKind::Transformer(transformer_spec(&label, t, secondary_ll)?),
            });
        }
        for (i, s) in self.switches.into_iter().enumerate() {
            let label = format!("switches[{i}] (id {:?})", s.id);
            let phases = match &s.phases {
                Some(p) => PhaseSet::parse(p).ok_or_else(|| Error::parse(&label, "bad phases"))?,
                None => bus_phases(&s.from_bus).unwrap_or_default(),
            };
            let states = s
                .states
                .iter()
                .map(|st| SwitchState {
                    closed: st.closed,
                    from: st.from_ts,
                    to: st.to_ts,
                })
                .collect();
            edges.push(Edge {
                id: s.id,
                from_bus: s.from_bus,
                to_bus: s.to_bus,
                kind: EdgeKind::Switch(SwitchSchedule { phases, states }),
            });
        }
        Ok(CircuitGraph::new(self.name, buses, edges)?.with_frequency(frequency, rho))
    }
}

fn line_spec(
    label: &str,
    l: LineDoc,
    bus_phases: impl Fn(&str) -> Option<PhaseSet>,
) -> Result<LineSpec> {
    if l.transposed {
        return Err(Error::parse(label, "transposed lines are not supported"));
    }
    let explicit = match &l.phases {
        Some(p) => Some(PhaseSet::parse(p).ok_or_else(|| Error::parse(label, "bad phases"))?),
        None => None,
    };
    let (impedance, phases) = match (l.geometry, l.series_admittance) {
        (Some(_), Some(_)) => {
            return Err(Error::parse(
                label,
                "give either geometry or series_admittance, not both",
            ))
        }
        (None, None) => {
            return Err(Error::parse(
                label,
                "line needs geometry or series_admittance",
            ))
        }
        (Some(g), None) => {
            let conductors = g
                .conductors
                .into_iter()
                .map(|cd| {
                    let role = match cd.phase.as_str() {
                        "n" | "N" => ConductorRole::Neutral,
                        s => {
                            let mut chars = s.chars();
                            match (chars.next().and_then(Phase::from_char), chars.next()) {
                                (Some(p), None) => ConductorRole::Phase(p),
                                _ => {
                                    return Err(Error::parse(
                                        label,
                                        format!("bad conductor phase {s:?}"),
                                    ))
                                }
                            }
                        }
                    };
                    Ok(Conductor {
                        role,
                        x: cd.x,
                        y: cd.y,
                        gmr: cd.gmr,
                        resistance: cd.resistance,
                        radius: cd.radius,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let from_geometry = PhaseSet::from_phases(conductors.iter().filter_map(|c| match c.role {
                ConductorRole::Phase(p) => Some(p),
                ConductorRole::Neutral => None,
            }));
            if explicit.is_some_and(|p| p != from_geometry) {
                return Err(Error::parse(label, "phases disagree with conductor labels"));
            }
            (
                LineImpedance::Geometry(LineGeometry { conductors }),
                from_geometry,
            )
        }
        (None, Some(series)) => {
            let phases = explicit
                .or_else(|| bus_phases(&l.from_bus))
                .unwrap_or_default();
            (
                LineImpedance::Direct {
                    series,
                    shunt: l.shunt_admittance,
                },
                phases,
            )
        }
    };
    Ok(LineSpec {
        length: l.length,
        phases,
        impedance,
        transposed: false,
    })
}

fn transformer_spec(
    label: &str,
    t: TransformerDoc,
    secondary_ll: Option<f64>,
) -> Result<TransformerSpec> {
    let connection = match t.connection.as_str() {
        "delta_wye" => Connection::DeltaWye,
        "wye_wye" => Connection::WyeWye,
        other => {
            return Err(Error::parse(
                label,
                format!("unsupported connection {other:?}"),
            ))
        }
    };
    let grounding = match t.grounding.as_deref().unwrap_or("secondary") {
        "primary" => Grounding::Primary,
        "secondary" => Grounding::Secondary,
        "both" => Grounding::Both,
        "none" => Grounding::None,
        other => return Err(Error::parse(label, format!("bad grounding {other:?}"))),
    };
    let series = match (t.series_admittance, t.nameplate) {
        (Some(y), _) => y,
        (None, Some(np)) => {
            let v_ll = secondary_ll.ok_or_else(|| {
                Error::Integrity(format!("{label}: unknown secondary bus {:?}", t.to_bus))
            })?;
            nameplate_series_admittance(&np, v_ll, t.turns_ratio)
                .map_err(|m| Error::parse(label, m))?
        }
        (None, None) => {
            return Err(Error::parse(
                label,
                "transformer needs series_admittance or nameplate",
            ))
        }
    };
    let shunt = t.shunt_admittance.unwrap_or_else(|| CMatrix::zeros(3, 3));
    if series.shape() != (3, 3) || shunt.shape() != (3, 3) {
        return Err(Error::parse(label, "transformer blocks must be 3×3"));
    }
    Ok(TransformerSpec {
        connection,
        turns_ratio: t.turns_ratio,
        series_admittance: series,
        shunt_admittance: shunt,
        grounding,
    })
}

/// Leakage admittance `y^l` from nameplate data.
///
/// The secondary-side per-phase impedance is `z% · V_ll² / S`; since the
/// two-port's secondary self block is `a² y^l`, `y^l = 1 / (a² z)`.
pub fn nameplate_series_admittance(
    np: &NameplateDoc,
    secondary_ll: f64,
    turns_ratio: f64,
) -> std::result::Result<CMatrix, String> {
    if !(np.kva > 0.0) || !(np.percent_z > 0.0) || !(np.x_over_r > 0.0) {
        return Err("nameplate values must be positive".into());
    }
    let z_mag = np.percent_z / 100.0 * secondary_ll * secondary_ll / (np.kva * 1e3);
    let angle = np.x_over_r.atan();
    let z = c(z_mag * angle.cos(), z_mag * angle.sin());
    let y = z.inv() / (turns_ratio * turns_ratio);
    Ok(CMatrix::from_diagonal_element(3, 3, y))
}
