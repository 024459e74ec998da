use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circuit_model::{CircuitGraph, PhaseSet};
use crate::component_admittance::{edge_admittances, line_rl_map, pi_line_params, EdgeAdmittance};
use crate::error::{Error, Result};
use crate::linalg::{c, complex_inverse, CMatrix, CVector, RMatrix, RVector};
use crate::network_matrix::{assemble_y, build_time_domain, BusIndex, NetworkAdmittance, TimeDomainNetwork};
use crate::waveform::{
    write_phasor_table, write_waveform_csv, PhasorTable, SensorEntry, SensorManifest,
    WaveformSegment,
};

use super::{forward_phasor_solve, rk4_advance, simulate_time_domain, BusVoltageInput, SampledTrajectory};

pub type ScenarioSensor = SensorEntry;

/// Base injection at a bus, one `[re, im]` pair per phase, scaled per
/// capture by a uniform factor in `[1 − variation, 1 + variation]`.
/// Give exactly one of `current` and `power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionProfile {
    /// Current injected into the network, A.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<Vec<[f64; 2]>>,
    /// Complex power drawn by a load, VA, turned into a fixed current at
    /// the no-load voltage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub variation: f64,
}

impl InjectionProfile {
    pub fn current(current: Vec<[f64; 2]>, variation: f64) -> Self {
        InjectionProfile { current: Some(current), power: None, variation }
    }

    pub fn power(power: Vec<[f64; 2]>, variation: f64) -> Self {
        InjectionProfile { current: None, power: Some(power), variation }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureSettings {
    /// Tick of the first capture, s.
    pub start_time: f64,
    pub captures: usize,
    /// Spacing of capture ticks, s.
    pub period: f64,
    /// Length of each capture, s.
    pub duration: f64,
    pub rate: f64,
    /// Each timestamp is offset uniformly within `±jitter/2`, s.
    pub jitter: f64,
    /// Capture starts trail their tick by up to this much, s.
    pub max_skew: f64,
    /// `(order, ratio)` pairs added to every channel.
    pub harmonics: Vec<(u32, f64)>,
}

impl Default for CaptureSettings {
    fn default() -> Self {
        CaptureSettings {
            start_time: 0.0,
            captures: 1,
            period: 10.0,
            duration: 1.0,
            rate: crate::waveform::NOMINAL_RATE,
            jitter: crate::waveform::DEFAULT_SPACING_TOLERANCE,
            max_skew: 0.1,
            harmonics: Vec::new(),
        }
    }
}

/// Continuous record of a line-only circuit, integrated with RK4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeDomainSettings {
    pub duration: f64,
    pub substeps: usize,
}

impl Default for TimeDomainSettings {
    fn default() -> Self {
        TimeDomainSettings {
            duration: 1.0,
            substeps: 100,
        }
    }
}

fn default_noise() -> f64 {
    0.005
}

fn default_at() -> DateTime<Utc> {
    DateTime::<Utc>::UNIX_EPOCH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Path of the circuit document, resolved by the caller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<String>,
    /// Instant used for switch states.
    #[serde(default = "default_at")]
    pub at: DateTime<Utc>,
    pub slack_bus: String,
    pub slack_voltage: Vec<[f64; 2]>,
    #[serde(default)]
    pub injections: BTreeMap<String, InjectionProfile>,
    /// Standard deviation of the relative phasor error, per real and
    /// imaginary part.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Standard deviation of an additive per-sample floor, in signal units.
    #[serde(default)]
    pub additive_noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub capture: CaptureSettings,
    /// Empty means one sensor at every injection bus and the slack bus.
    #[serde(default)]
    pub sensors: Vec<ScenarioSensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_domain: Option<TimeDomainSettings>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// One segment per sensor per capture, as the sensor would record it.
    pub captures: Vec<WaveformSegment>,
    /// One continuous segment per sensor, when requested.
    pub time_domain: Vec<WaveformSegment>,
    pub manifest: SensorManifest,
    /// Noise-free phasors at the capture ticks.
    pub truth: PhasorTable,
    /// Noise-free trajectory on the sample grid, starting at `start_time`.
    pub truth_trajectory: Option<SampledTrajectory>,
}

fn to_cvector(pairs: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(pairs.len(), pairs.iter().map(|p| c(p[0], p[1])))
}

fn phase_labels(p: PhaseSet) -> Vec<char> {
    p.iter().map(|ph| ph.label()).collect()
}

/// Sending-end current `I_jk` of every edge given all bus voltages.
pub fn line_current_phasors(
    g: &CircuitGraph,
    params: &BTreeMap<String, EdgeAdmittance>,
    index: &BusIndex,
    v: &CVector,
) -> Result<BTreeMap<String, CVector>> {
    let mut out = BTreeMap::new();
    for edge in g.edges() {
        let p = params
            .get(&edge.id)
            .ok_or_else(|| Error::Integrity(format!("no admittance for edge {:?}", edge.id)))?;
        let pick = |bus: &str| -> Result<CVector> {
            let idx: Vec<usize> = p
                .phases
                .iter()
                .map(|ph| {
                    index.index(bus, ph).ok_or_else(|| Error::PhaseMismatch {
                        edge: edge.id.clone(),
                        message: format!("bus {bus} lacks phase {}", ph.label()),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(CVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i])))
        };
        let (vj, vk) = (pick(&edge.from_bus)?, pick(&edge.to_bus)?);
        let i = (&p.y_s_jk + &p.y_m_jk) * &vj - &p.y_s_jk * &vk;
        out.insert(edge.id.clone(), i);
    }
    Ok(out)
}

struct Channel {
    name: String,
    /// Index into the per-capture phasor vector.
    source: usize,
}

/// Phasor channels a sensor reports, in file order.
fn sensor_channels(
    g: &CircuitGraph,
    s: &SensorEntry,
    truth_channels: &[String],
) -> Result<Vec<Channel>> {
    let lookup = |name: String, local: String| -> Result<Channel> {
        let source = truth_channels
            .iter()
            .position(|t| *t == name)
            .ok_or_else(|| Error::Integrity(format!("sensor {:?}: no channel {name}", s.sensor_id)))?;
        Ok(Channel { name: local, source })
    };
    if let Some(bus) = &s.bus {
        let b = g
            .bus(bus)
            .ok_or_else(|| Error::Integrity(format!("sensor {:?} at unknown bus {bus:?}", s.sensor_id)))?;
        let ph = phase_labels(b.phases);
        let mut out = Vec::new();
        for q in ["V", "I"] {
            for p in &ph {
                out.push(lookup(format!("{bus}.{q}{p}"), format!("{q}{p}"))?);
            }
        }
        Ok(out)
    } else {
        let line = s.line.as_deref().unwrap_or_default();
        let e = g
            .edge(line)
            .ok_or_else(|| Error::Integrity(format!("sensor {:?} on unknown line {line:?}", s.sensor_id)))?;
        phase_labels(e.kind.phases())
            .iter()
            .map(|p| lookup(format!("{line}.I{p}"), format!("I{p}")))
            .collect()
    }
}

fn default_sensors(g: &CircuitGraph, slack: &str) -> Vec<SensorEntry> {
    g.buses()
        .filter(|b| b.is_injection || b.id == slack)
        .map(|b| SensorEntry {
            sensor_id: format!("pmu_{}", b.id),
            bus: Some(b.id.clone()),
            line: None,
            polarity: 1.0,
        })
        .collect()
}

fn validate_capture(cap: &CaptureSettings) -> Result<()> {
    let ok = cap.rate > 0.0
        && cap.duration > 0.0
        && cap.period > 0.0
        && cap.jitter >= 0.0
        && cap.max_skew >= 0.0
        && cap.jitter * cap.rate < 1.0
        && cap.harmonics.iter().all(|&(h, r)| h >= 2 && r.is_finite());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("invalid capture settings {cap:?}")))
    }
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Scenario> {
        serde_json::from_str(s).map_err(|e| Error::parse("scenario", e))
    }

    pub fn sensors_for(&self, g: &CircuitGraph) -> Vec<SensorEntry> {
        if self.sensors.is_empty() {
            default_sensors(g, &self.slack_bus)
        } else {
            self.sensors.clone()
        }
    }

    /// Synthesizes captures for `g` (reduced here at `self.at` if needed).
    pub fn synthesize(&self, g: &CircuitGraph) -> Result<SyntheticDataset> {
        let g = if g.is_reduced() {
            g.clone()
        } else {
            g.electrical_reduction(self.at)?
        };
        let cap = &self.capture;
        validate_capture(cap)?;
        if !(self.noise >= 0.0) || !(self.additive_noise >= 0.0) {
            return Err(Error::InvalidParameter("noise levels must be non-negative".into()));
        }
        for b in g.buses() {
            if b.is_injection && b.id != self.slack_bus && !self.injections.contains_key(&b.id) {
                return Err(Error::Integrity(format!("injection bus {:?} has no profile", b.id)));
            }
        }
        let params = edge_admittances(&g)?;
        let y = assemble_y(&g, &params)?;
        let slack_v = to_cvector(&self.slack_voltage);
        let sensors = self.sensors_for(&g);
        let manifest = SensorManifest::from_json(
            &serde_json::to_string(&SensorManifest { sensors: sensors.clone() })
                .map_err(|e| Error::parse("sensor manifest", e))?,
        )?;

        let mut truth_channels = Vec::new();
        for (bus, ph) in y.index.labels() {
            truth_channels.push(format!("{bus}.V{}", ph.label()));
        }
        for (bus, ph) in y.index.labels() {
            truth_channels.push(format!("{bus}.I{}", ph.label()));
        }
        for e in g.edges() {
            for p in phase_labels(e.kind.phases()) {
                truth_channels.push(format!("{}.I{p}", e.id));
            }
        }
        let channel_map: Vec<(SensorEntry, Vec<Channel>)> = sensors
            .iter()
            .map(|s| Ok((s.clone(), sensor_channels(&g, s, &truth_channels)?)))
            .collect::<Result<_>>()?;

        let base = self.base_injections(&y)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = (cap.duration * cap.rate).round() as usize;
        let w = 2.0 * PI * g.frequency;
        let mut truth = CMatrix::zeros(cap.captures, truth_channels.len());
        let mut times = Vec::with_capacity(cap.captures);
        let mut captures = Vec::new();
        for k in 0..cap.captures {
            let tick = cap.start_time + k as f64 * cap.period;
            times.push(tick);
            let injections = self.injections_with(&base, &mut rng)?;
            let (v, i) = forward_phasor_solve(&y, &self.slack_bus, &slack_v, &injections)?;
            let lines = line_current_phasors(&g, &params, &y.index, &v)?;
            let row: Vec<Complex64> = v
                .iter()
                .chain(i.iter())
                .chain(lines.values().flat_map(|l| l.iter()))
                .copied()
                .collect();
            for (j, z) in row.iter().enumerate() {
                truth[(k, j)] = *z;
            }
            for (s, chans) in &channel_map {
                let skew = if cap.max_skew > 0.0 {
                    rng.random_range(0.0..cap.max_skew)
                } else {
                    0.0
                };
                let start = tick + skew;
                let noisy: Vec<Complex64> = chans
                    .iter()
                    .map(|ch| {
                        let e = c(self.noise * normal(&mut rng), self.noise * normal(&mut rng));
                        row[ch.source] * (c(1.0, 0.0) + e)
                    })
                    .collect();
                let stamps = jittered_times(&mut rng, start, n, cap);
                let mut samples = RMatrix::zeros(n, chans.len());
                for (r, &t) in stamps.iter().enumerate() {
                    for (j, p) in noisy.iter().enumerate() {
                        let mut x = sinusoid(*p, w, t - tick, &cap.harmonics);
                        if self.additive_noise > 0.0 {
                            x += self.additive_noise * normal(&mut rng);
                        }
                        samples[(r, j)] = s.polarity * x;
                    }
                }
                captures.push(WaveformSegment::new(
                    s.sensor_id.clone(),
                    chans.iter().map(|c| c.name.clone()).collect(),
                    stamps,
                    samples,
                )?);
            }
        }
        let truth = PhasorTable {
            times,
            channels: truth_channels,
            values: truth,
        };

        let (time_domain, truth_trajectory) = match &self.time_domain {
            Some(td) => {
                let (segs, traj) = self.synthesize_time_domain(&g, td, &sensors, &mut rng)?;
                (segs, Some(traj))
            }
            None => (Vec::new(), None),
        };
        Ok(SyntheticDataset {
            captures,
            time_domain,
            manifest,
            truth,
            truth_trajectory,
        })
    }

    /// Unscaled injection currents.
    pub fn base_injections(&self, y: &NetworkAdmittance) -> Result<BTreeMap<String, CVector>> {
        let slack = to_cvector(&self.slack_voltage);
        let mut no_load = None;
        let mut out = BTreeMap::new();
        for (bus, prof) in &self.injections {
            let i = match (&prof.current, &prof.power) {
                (Some(i), None) => to_cvector(i),
                (None, Some(s)) => {
                    if no_load.is_none() {
                        no_load = Some(forward_phasor_solve(y, &self.slack_bus, &slack, &BTreeMap::new())?.0);
                    }
                    let v0 = no_load.as_ref().unwrap();
                    let r = y
                        .index
                        .range(bus)
                        .ok_or_else(|| Error::Integrity(format!("injection at unknown bus {bus:?}")))?;
                    if s.len() != r.len() {
                        return Err(Error::Dimension(format!(
                            "power at bus {bus:?} has {} entries for {} phases",
                            s.len(),
                            r.len()
                        )));
                    }
                    CVector::from_iterator(s.len(), s.iter().zip(r).map(|(p, k)| -(c(p[0], p[1]) / v0[k]).conj()))
                }
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "injection at bus {bus:?} needs exactly one of current and power"
                    )))
                }
            };
            out.insert(bus.clone(), i);
        }
        Ok(out)
    }

    fn injections_with(
        &self,
        base: &BTreeMap<String, CVector>,
        rng: &mut ChaCha8Rng,
    ) -> Result<BTreeMap<String, CVector>> {
        let mut out = BTreeMap::new();
        for (bus, prof) in &self.injections {
            if !(prof.variation >= 0.0 && prof.variation < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "injection variation at bus {bus:?} must be in [0, 1)"
                )));
            }
            let f = if prof.variation > 0.0 {
                rng.random_range(1.0 - prof.variation..=1.0 + prof.variation)
            } else {
                1.0
            };
            out.insert(bus.clone(), &base[bus] * c(f, 0.0));
        }
        Ok(out)
    }

    fn synthesize_time_domain(
        &self,
        g: &CircuitGraph,
        td: &TimeDomainSettings,
        sensors: &[SensorEntry],
        rng: &mut ChaCha8Rng,
    ) -> Result<(Vec<WaveformSegment>, SampledTrajectory)> {
        let cap = &self.capture;
        if !(td.duration > 0.0) {
            return Err(Error::InvalidParameter("time-domain duration must be positive".into()));
        }
        let rl = line_rl_map(g)?;
        let net = build_time_domain(g, &rl)?;
        let w = 2.0 * PI * g.frequency;

        // Steady state of the same R-L network, without line charging.
        let mut series = BTreeMap::new();
        for e in g.edges() {
            let z = rl[&e.id].impedance(g.frequency);
            let y_s = complex_inverse(&z, &format!("series impedance of line {}", e.id))?;
            let zero = CMatrix::zeros(3, 3);
            series.insert(e.id.clone(), pi_line_params(e.kind.phases(), &y_s, &zero, &zero)?);
        }
        let y = assemble_y(g, &series)?;
        let base = self.base_injections(&y)?;
        let injections = self.injections_with(&base, rng)?;
        let (v, _) = forward_phasor_solve(&y, &self.slack_bus, &to_cvector(&self.slack_voltage), &injections)?;
        let mut components = vec![(1u32, v.clone())];
        for &(h, r) in &cap.harmonics {
            components.push((h, v.map(|z| Complex64::from_polar(r * z.norm(), h as f64 * z.arg()))));
        }
        let mut i0 = RVector::zeros(net.n_states());
        for (h, vh) in &components {
            let z = complex_l_r(&net, *h as f64 * w);
            let drop = net.kvl.map(|x| c(x, 0.0)) * vh;
            let ih = z.lu().solve(&drop).ok_or_else(|| Error::Singular("line impedance".into()))?;
            i0 += ih.map(|z| std::f64::consts::SQRT_2 * z.re);
        }
        let v_of_t = |t: f64| -> RVector {
            let mut out = RVector::zeros(v.len());
            for (h, vh) in &components {
                let rot = Complex64::from_polar(1.0, *h as f64 * w * t);
                out += vh.map(|z| std::f64::consts::SQRT_2 * (z * rot).re);
            }
            out
        };

        let dt = 1.0 / cap.rate;
        let n = (td.duration * cap.rate).round() as usize;
        let grid = n + ((cap.max_skew + 2.0 * cap.jitter) * cap.rate).ceil() as usize + 2;
        let traj = simulate_time_domain(&net, BusVoltageInput::Continuous(&v_of_t), &i0, dt, td.substeps, grid)?;

        let buses = &net.incidence.buses;
        let edges = &net.incidence.edges;
        let mut segments = Vec::new();
        for s in sensors {
            let (labels, rows): (Vec<String>, Vec<Row>) = if let Some(bus) = &s.bus {
                let b = buses
                    .iter()
                    .position(|x| x == bus)
                    .ok_or_else(|| Error::Integrity(format!("sensor {:?} at unknown bus {bus:?}", s.sensor_id)))?;
                let mut l = Vec::new();
                let mut r = Vec::new();
                for (p, ph) in ["a", "b", "c"].iter().enumerate() {
                    l.push(format!("V{ph}"));
                    r.push(Row::Voltage(3 * b + p));
                }
                for (p, ph) in ["a", "b", "c"].iter().enumerate() {
                    l.push(format!("I{ph}"));
                    r.push(Row::Injection(3 * b + p));
                }
                (l, r)
            } else {
                let line = s.line.as_deref().unwrap_or_default();
                let e = edges
                    .iter()
                    .position(|x| x == line)
                    .ok_or_else(|| Error::Integrity(format!("sensor {:?} on unknown line {line:?}", s.sensor_id)))?;
                (0..3)
                    .map(|p| (format!("I{}", ["a", "b", "c"][p]), Row::Line(3 * e + p)))
                    .unzip()
            };
            let skew = if cap.max_skew > 0.0 {
                rng.random_range(0.0..cap.max_skew)
            } else {
                0.0
            };
            let rel = jittered_times(rng, skew, n, cap);
            let mut samples = RMatrix::zeros(n, rows.len());
            for (r, &t) in rel.iter().enumerate() {
                let k = ((t / dt).floor() as usize).min(grid - 1);
                let delta = t - k as f64 * dt;
                let x = traj.i_l.column(k).into_owned();
                let steps = ((delta / dt) * td.substeps as f64).ceil().max(1.0) as usize;
                let x = if delta.abs() > 0.0 {
                    rk4_advance(&net, &x, &v_of_t, k as f64 * dt, delta, steps)
                } else {
                    x
                };
                let ib = net.injections(&x);
                let vb = v_of_t(t);
                for (j, row) in rows.iter().enumerate() {
                    let clean = match *row {
                        Row::Voltage(i) => vb[i],
                        Row::Injection(i) => ib[i],
                        Row::Line(i) => x[i],
                    };
                    let mut val = clean * (1.0 + self.noise * normal(rng));
                    if self.additive_noise > 0.0 {
                        val += self.additive_noise * normal(rng);
                    }
                    samples[(r, j)] = s.polarity * val;
                }
            }
            let stamps = rel.iter().map(|t| cap.start_time + t).collect();
            segments.push(WaveformSegment::new(s.sensor_id.clone(), labels, stamps, samples)?);
        }
        Ok((segments, traj))
    }
}

enum Row {
    Voltage(usize),
    Injection(usize),
    Line(usize),
}

/// Block-diagonal `R + jωL` of the network.
fn complex_l_r(net: &TimeDomainNetwork, w: f64) -> CMatrix {
    CMatrix::from_fn(net.r.nrows(), net.r.ncols(), |i, j| c(net.r[(i, j)], w * net.l[(i, j)]))
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn jittered_times(rng: &mut ChaCha8Rng, start: f64, n: usize, cap: &CaptureSettings) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let j = if cap.jitter > 0.0 {
                rng.random_range(-cap.jitter / 2.0..=cap.jitter / 2.0)
            } else {
                0.0
            };
            start + i as f64 / cap.rate + j
        })
        .collect()
}

/// `√2·Re(P·e^{iωτ})` plus harmonics `√2·r|P|·cos(hωτ + h∠P)`.
fn sinusoid(p: Complex64, w: f64, tau: f64, harmonics: &[(u32, f64)]) -> f64 {
    let mut x = std::f64::consts::SQRT_2 * (p * Complex64::from_polar(1.0, w * tau)).re;
    for &(h, r) in harmonics {
        let h = h as f64;
        x += std::f64::consts::SQRT_2 * r * p.norm() * (h * w * tau + h * p.arg()).cos();
    }
    x
}

impl SyntheticDataset {
    /// Writes `sensors.json`, `truth_phasors.csv`, `waveforms/<sensor>/*.csv`
    /// and, when present, `time_domain/<sensor>/record.csv`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mkdir(dir)?;
        let manifest = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::parse("sensor manifest", e))?;
        let path = dir.join("sensors.json");
        fs::write(&path, manifest + "\n").map_err(|e| Error::io(&path, e))?;
        let path = dir.join("truth_phasors.csv");
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_phasor_table(f, &self.truth)?;

        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for seg in &self.captures {
            let k = counts.entry(&seg.sensor_id).or_default();
            let sub = dir.join("waveforms").join(&seg.sensor_id);
            mkdir(&sub)?;
            let path = sub.join(format!("capture_{k:04}.csv"));
            *k += 1;
            let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_waveform_csv(f, seg)?;
        }
        for seg in &self.time_domain {
            let sub = dir.join("time_domain").join(&seg.sensor_id);
            mkdir(&sub)?;
            let path = sub.join("record.csv");
            let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_waveform_csv(f, seg)?;
        }
        Ok(())
    }
}
