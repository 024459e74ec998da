//! Sampled waveforms and the phasors extracted from them.
//!
//! Phasors use the RMS-cosine convention: a channel
//! `x(t) = √2·|P|·cos(2πf0(t − t0) + ∠P)` has phasor `P`, with `t0` the
//! first timestamp of the segment.

mod io;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, RMatrix};

pub use io::{
    load_waveform_dir, read_phasor_table, read_waveform_csv, write_phasor_table,
    write_waveform_csv, SensorEntry, SensorManifest,
};

/// Nominal sample rate of the meters, Hz.
pub const NOMINAL_RATE: f64 = 2500.0;
/// Default tolerance on the sample interval, s.
pub const DEFAULT_SPACING_TOLERANCE: f64 = 4e-6;
/// Frequency deviation above which a frame is flagged, Hz.
pub const OFF_NOMINAL_THRESHOLD: f64 = 0.05;

/// One sensor's multi-channel samples; `samples` is `T × channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSegment {
    pub sensor_id: String,
    pub channels: Vec<String>,
    pub timestamps: Vec<f64>,
    pub samples: RMatrix,
}

impl WaveformSegment {
    pub fn new(
        sensor_id: impl Into<String>,
        channels: Vec<String>,
        timestamps: Vec<f64>,
        samples: RMatrix,
    ) -> Result<WaveformSegment> {
        let sensor_id = sensor_id.into();
        if timestamps.is_empty() {
            return Err(Error::Waveform(format!("sensor {sensor_id}: empty segment")));
        }
        if samples.shape() != (timestamps.len(), channels.len()) {
            return Err(Error::Dimension(format!(
                "sensor {sensor_id}: samples are {}×{}, expected {}×{}",
                samples.nrows(),
                samples.ncols(),
                timestamps.len(),
                channels.len()
            )));
        }
        if let Some(k) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Waveform(format!(
                "sensor {sensor_id}: timestamps not strictly increasing at sample {}",
                k + 1
            )));
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Waveform(format!("sensor {sensor_id}: non-finite timestamp")));
        }
        Ok(WaveformSegment {
            sensor_id,
            channels,
            timestamps,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn end(&self) -> f64 {
        *self.timestamps.last().unwrap()
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Errors if any interval deviates from `nominal` by more than `tolerance`.
    pub fn check_spacing(&self, nominal: f64, tolerance: f64) -> Result<()> {
        for (k, w) in self.timestamps.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if (dt - nominal).abs() > tolerance {
                return Err(Error::Waveform(format!(
                    "sensor {}: interval {} is {:.3} µs, outside {:.3} ± {:.3} µs",
                    self.sensor_id,
                    k,
                    dt * 1e6,
                    nominal * 1e6,
                    tolerance * 1e6
                )));
            }
        }
        Ok(())
    }

    /// Mean interval, if every interval is within `rel_tol` of it.
    pub fn uniform_interval(&self, rel_tol: f64) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let dt = (self.end() - self.start()) / (self.len() - 1) as f64;
        self.timestamps
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= rel_tol * dt)
            .then_some(dt)
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> WaveformSegment {
        let n = n.min(self.len());
        WaveformSegment {
            sensor_id: self.sensor_id.clone(),
            channels: self.channels.clone(),
            timestamps: self.timestamps[..n].to_vec(),
            samples: self.samples.rows(0, n).into_owned(),
        }
    }
}

/// Linear interpolation onto `start + i/rate`, `i < n`. Grid points outside
/// the segment are an error.
fn interpolate_onto(w: &WaveformSegment, start: f64, rate: f64, n: usize) -> Result<WaveformSegment> {
    let ts = &w.timestamps;
    let slack = 1e-6 / rate;
    let mut timestamps = Vec::with_capacity(n);
    let mut samples = RMatrix::zeros(n, w.channels.len());
    let mut j = 0;
    for i in 0..n {
        let t = start + i as f64 / rate;
        if t < ts[0] - slack || t > ts[ts.len() - 1] + slack {
            return Err(Error::Waveform(format!(
                "sensor {}: grid point {t} lies outside [{}, {}]",
                w.sensor_id,
                ts[0],
                ts[ts.len() - 1]
            )));
        }
        while j + 1 < ts.len() && ts[j + 1] <= t {
            j += 1;
        }
        if j + 1 == ts.len() || t <= ts[j] {
            samples.row_mut(i).copy_from(&w.samples.row(j));
        } else {
            let f = (t - ts[j]) / (ts[j + 1] - ts[j]);
            for ch in 0..w.channels.len() {
                let (a, b) = (w.samples[(j, ch)], w.samples[(j + 1, ch)]);
                samples[(i, ch)] = a + f * (b - a);
            }
        }
        timestamps.push(t);
    }
    Ok(WaveformSegment {
        sensor_id: w.sensor_id.clone(),
        channels: w.channels.clone(),
        timestamps,
        samples,
    })
}

fn grid_len(span: f64, rate: f64) -> usize {
    (span * rate + 1e-9).floor() as usize + 1
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("sample rate must be positive, got {rate}")));
    }
    Ok(())
}

/// Uniform grid `t0 + i/rate` covering the segment, by linear interpolation.
pub fn resample(w: &WaveformSegment, target_rate: f64) -> Result<WaveformSegment> {
    check_rate(target_rate)?;
    if w.is_empty() {
        return Err(Error::Waveform(format!("sensor {}: empty segment", w.sensor_id)));
    }
    if let Some(k) = w.timestamps.windows(2).position(|p| !(p[1] > p[0])) {
        return Err(Error::Waveform(format!(
            "sensor {}: timestamps not strictly increasing at sample {}",
            w.sensor_id,
            k + 1
        )));
    }
    let n = grid_len(w.end() - w.start(), target_rate);
    interpolate_onto(w, w.start(), target_rate, n)
}

/// Resamples every segment onto one grid over the common time interval.
pub fn align(segments: &[WaveformSegment], rate: f64) -> Result<Vec<WaveformSegment>> {
    check_rate(rate)?;
    if segments.is_empty() {
        return Err(Error::Alignment("no segments".into()));
    }
    let start = segments.iter().map(|s| s.start()).fold(f64::NEG_INFINITY, f64::max);
    let end = segments.iter().map(|s| s.end()).fold(f64::INFINITY, f64::min);
    if start > end {
        return Err(Error::Alignment(format!(
            "segments do not overlap: latest start {start} is after earliest end {end}"
        )));
    }
    let n = grid_len(end - start, rate);
    segments
        .iter()
        .map(|s| interpolate_onto(s, start, rate, n))
        .collect()
}

/// Phasors of one segment at one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorFrame {
    pub sensor_id: String,
    pub timestamp: f64,
    pub channels: Vec<String>,
    pub phasors: Vec<Complex64>,
    /// Estimated system frequency, Hz.
    pub frequency: f64,
    /// `f0` is not on an FFT bin for this segment length.
    pub leakage: bool,
    /// Estimated frequency is more than 0.05 Hz away from `f0`.
    pub off_nominal: bool,
}

/// Discrete Fourier transform of one channel.
pub fn spectrum(w: &WaveformSegment, channel: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = w.samples.column(channel).iter().map(|&x| c(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn wrap_phase(p: Complex64) -> Complex64 {
    // Keeps the argument in (−π, π].
    if p.im == 0.0 && p.re < 0.0 {
        c(p.re, 0.0)
    } else {
        p
    }
}

/// Principal angle in (−π, π].
pub fn phase_angle(p: Complex64) -> f64 {
    let a = p.arg();
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Phasor of every channel at bin `f0`, plus a frequency estimate from the
/// strongest channel.
pub fn fft_phasor(w: &WaveformSegment, f0: f64) -> Result<PhasorFrame> {
    if !(f0 > 0.0) {
        return Err(Error::InvalidParameter(format!("f0 must be positive, got {f0}")));
    }
    let dt = w.uniform_interval(1e-6).ok_or_else(|| {
        Error::Waveform(format!("sensor {}: sampling is not uniform", w.sensor_id))
    })?;
    let n = w.len();
    let bin = f0 * n as f64 * dt;
    let k0 = bin.round() as usize;
    if k0 == 0 || 2 * k0 >= n {
        return Err(Error::Waveform(format!(
            "sensor {}: {f0} Hz is not resolvable from {n} samples at {} Hz",
            w.sensor_id,
            1.0 / dt
        )));
    }
    let leakage = (bin - k0 as f64).abs() > 1e-6;
    if leakage {
        log::warn!(
            "sensor {}: {f0} Hz falls between bins ({bin:.6}); phasors carry leakage",
            w.sensor_id
        );
    }
    let scale = 2f64.sqrt() / n as f64;
    let mut phasors = Vec::with_capacity(w.channels.len());
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for ch in 0..w.channels.len() {
        let spec = spectrum(w, ch);
        let p = wrap_phase(spec[k0] * scale);
        if best.as_ref().is_none_or(|(m, _)| p.norm() > *m) {
            best = Some((p.norm(), spec));
        }
        phasors.push(p);
    }
    let frequency = match best {
        Some((_, spec)) => refine_frequency(&spec, k0, n, dt),
        None => f0,
    };
    Ok(PhasorFrame {
        sensor_id: w.sensor_id.clone(),
        timestamp: w.start(),
        channels: w.channels.clone(),
        phasors,
        frequency,
        leakage,
        off_nominal: (frequency - f0).abs() > OFF_NOMINAL_THRESHOLD,
    })
}

/// Peak bin near `k0`, refined by a parabola through the three magnitudes.
fn refine_frequency(spec: &[Complex64], k0: usize, n: usize, dt: f64) -> f64 {
    let lo = k0.saturating_sub(2).max(1);
    let hi = (k0 + 2).min(n / 2 - 1);
    let k = (lo..=hi)
        .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
        .unwrap_or(k0);
    let (a, b, g) = (spec[k - 1].norm(), spec[k].norm(), spec[k + 1].norm());
    let denom = a - 2.0 * b + g;
    let delta = if denom.abs() > 0.0 { 0.5 * (a - g) / denom } else { 0.0 };
    (k as f64 + delta.clamp(-0.5, 0.5)) / (n as f64 * dt)
}

/// Largest prefix length whose duration is a whole number of `f0` cycles.
pub fn whole_cycle_len(n: usize, rate: f64, f0: f64) -> Option<usize> {
    (1..=n).rev().find(|&m| {
        let cycles = m as f64 * f0 / rate;
        cycles >= 1.0 && (cycles - cycles.round()).abs() < 1e-9
    })
}

/// Resample to `rate`, trim to whole cycles, and extract phasors.
pub fn segment_phasor(w: &WaveformSegment, rate: f64, f0: f64) -> Result<PhasorFrame> {
    let uniform = resample(w, rate)?;
    let n = whole_cycle_len(uniform.len(), rate, f0).ok_or_else(|| {
        Error::Waveform(format!(
            "sensor {}: segment shorter than one cycle of {f0} Hz",
            w.sensor_id
        ))
    })?;
    fft_phasor(&uniform.truncated(n), f0)
}

/// Phasors on a common tick grid; `values` is `times × channels`, with
/// NaN where a channel has no frame at a tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorTable {
    pub times: Vec<f64>,
    pub channels: Vec<String>,
    pub values: CMatrix,
}

impl PhasorTable {
    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn value(&self, row: usize, channel: &str) -> Option<Complex64> {
        let v = self.values[(row, self.channel_index(channel)?)];
        (!v.re.is_nan() && !v.im.is_nan()).then_some(v)
    }
}

/// Snaps each frame to the nearest multiple of `period` and rotates its
/// phasors by `e^{−i2πf0·δ}`, where `δ` is the snapping offset.
pub fn phasor_timeseries(frames: &[PhasorFrame], period: f64, f0: f64) -> Result<PhasorTable> {
    if !(period > 0.0) {
        return Err(Error::InvalidParameter(format!("grid period must be positive, got {period}")));
    }
    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.sort_by(|&a, &b| frames[a].timestamp.total_cmp(&frames[b].timestamp));

    let mut ticks: Vec<i64> = Vec::new();
    let mut channels: Vec<String> = Vec::new();
    let mut entries: Vec<(i64, usize, Complex64)> = Vec::new();
    let mut seen = BTreeSet::new();
    for &fi in &order {
        let f = &frames[fi];
        let tick = (f.timestamp / period).round() as i64;
        let delta = f.timestamp - tick as f64 * period;
        let rot = Complex64::from_polar(1.0, -2.0 * PI * f0 * delta);
        if !ticks.contains(&tick) {
            ticks.push(tick);
        }
        for (name, &p) in f.channels.iter().zip(&f.phasors) {
            let ci = match channels.iter().position(|c| c == name) {
                Some(ci) => ci,
                None => {
                    channels.push(name.clone());
                    channels.len() - 1
                }
            };
            if !seen.insert((tick, ci)) {
                return Err(Error::DuplicateTick {
                    tick: tick as f64 * period,
                    channel: name.clone(),
                });
            }
            entries.push((tick, ci, if delta == 0.0 { p } else { p * rot }));
        }
    }
    ticks.sort_unstable();
    let mut values = CMatrix::from_element(ticks.len(), channels.len(), c(f64::NAN, f64::NAN));
    for (tick, ci, p) in entries {
        let row = ticks.binary_search(&tick).unwrap();
        values[(row, ci)] = p;
    }
    Ok(PhasorTable {
        times: ticks.iter().map(|&t| t as f64 * period).collect(),
        channels,
        values,
    })
}
