//! Clock synchronization error from co-located meter pairs, and injection
//! of synthetic clock error into phasor tables.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::PhasorTable;

/// Wraps an angle in degrees into `(−180, 180]`.
pub fn wrap_degrees(x: f64) -> f64 {
    x - 360.0 * ((x - 180.0) / 360.0).ceil()
}

/// Phase angles of the same quantity seen by two meters, degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedPhaseSeries {
    pub timestamps: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl PairedPhaseSeries {
    /// Angles are wrapped on construction.
    pub fn new(timestamps: Vec<f64>, first: Vec<f64>, second: Vec<f64>) -> Result<PairedPhaseSeries> {
        if timestamps.len() != first.len() || first.len() != second.len() {
            return Err(Error::Dimension(format!(
                "paired series lengths differ: {} timestamps, {} and {} angles",
                timestamps.len(),
                first.len(),
                second.len()
            )));
        }
        if first.iter().chain(&second).any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite phase angle".into()));
        }
        Ok(PairedPhaseSeries {
            timestamps,
            first: first.into_iter().map(wrap_degrees).collect(),
            second: second.into_iter().map(wrap_degrees).collect(),
        })
    }

    /// Angles of two channels of a phasor table at ticks where both exist.
    pub fn from_table(table: &PhasorTable, first: &str, second: &str) -> Result<PairedPhaseSeries> {
        for ch in [first, second] {
            if table.channel_index(ch).is_none() {
                return Err(Error::Integrity(format!("phasor table has no channel {ch:?}")));
            }
        }
        let (mut t, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for (row, &time) in table.times.iter().enumerate() {
            if let (Some(p), Some(q)) = (table.value(row, first), table.value(row, second)) {
                t.push(time);
                a.push(p.arg().to_degrees());
                b.push(q.arg().to_degrees());
            }
        }
        PairedPhaseSeries::new(t, a, b)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Wrapped differences `first − second`.
    pub fn differences(&self) -> Vec<f64> {
        self.first
            .iter()
            .zip(&self.second)
            .map(|(a, b)| wrap_degrees(a - b))
            .collect()
    }
}

/// Variances in deg².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncErrorEstimate {
    pub n: usize,
    /// Variance of the pairwise difference.
    pub sigma_d_sq: f64,
    /// Per-meter variance, half of `sigma_d_sq`.
    pub sigma_sq: f64,
    /// Excess kurtosis of the differences; absent when they are constant.
    pub kurtosis: Option<f64>,
}

impl SyncErrorEstimate {
    pub fn from_difference_variance(n: usize, sigma_d_sq: f64, kurtosis: Option<f64>) -> Self {
        SyncErrorEstimate {
            n,
            sigma_d_sq,
            sigma_sq: sigma_d_sq / 2.0,
            kurtosis,
        }
    }
}

/// Sample variance (n − 1) of the wrapped differences. With `remove_mean`
/// false, the second moment about zero is used instead, still over n − 1.
pub fn estimate_sync_error(p: &PairedPhaseSeries, remove_mean: bool) -> Result<SyncErrorEstimate> {
    let d = p.differences();
    let n = d.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 paired samples, got {n}")));
    }
    let mean = if remove_mean {
        d.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let m2 = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    let var = m2 / (n - 1) as f64;
    let pop2 = m2 / n as f64;
    let kurtosis = (pop2 > 0.0).then(|| {
        let pop4 = d.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        pop4 / (pop2 * pop2) - 3.0
    });
    Ok(SyncErrorEstimate::from_difference_variance(n, var, kurtosis))
}

/// Sensor key of a channel name `<target>.<quantity>`.
fn sensor_of(channel: &str) -> &str {
    channel.rsplit_once('.').map_or(channel, |(s, _)| s)
}

/// Rotates every phasor by an i.i.d. `N(0, sigma²)` angle (degrees) drawn
/// once per sensor per tick; all channels of a sensor share the draw.
pub fn inject_clock_error(table: &PhasorTable, sigma: f64, seed: u64) -> Result<PhasorTable> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("clock error sigma must be >= 0, got {sigma}")));
    }
    let mut out = table.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut sensors: Vec<&str> = table.channels.iter().map(|c| sensor_of(c)).collect();
    sensors.sort_unstable();
    sensors.dedup();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for row in 0..table.times.len() {
        let shifts: Vec<f64> = sensors.iter().map(|_| normal.sample(&mut rng)).collect();
        for (j, ch) in table.channels.iter().enumerate() {
            let s = sensors.binary_search(&sensor_of(ch)).unwrap();
            let rot = Complex64::from_polar(1.0, shifts[s].to_radians());
            out.values[(row, j)] = table.values[(row, j)] * rot;
        }
    }
    Ok(out)
}
