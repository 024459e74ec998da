//! Columnar text formats.
//!
//! Waveform file: header `t,<channel>,...`, one row per sample, `t` in
//! seconds. Phasor table: header `t,<channel>_mag,<channel>_ang,...`, RMS
//! magnitudes and angles in radians; missing entries are `NaN`.
//!
//! A waveform directory holds one subdirectory per sensor, each with one
//! file per capture. The sensor manifest maps sensor ids to the bus or line
//! they measure; loaded channels are renamed `<bus or line>.<channel>` and
//! multiplied by the sensor polarity.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{phase_angle, PhasorTable, WaveformSegment};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix};
use num_complex::Complex64;

fn csv_err(what: &str, e: csv::Error) -> Error {
    Error::parse(what, e)
}

fn parse_field(what: &str, row: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(what, format!("row {row}: bad number {s:?}")))
}

pub fn read_waveform_csv(r: impl Read, sensor_id: &str) -> Result<WaveformSegment> {
    let what = format!("waveform for sensor {sensor_id}");
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(|e| csv_err(&what, e))?.clone();
    if header.get(0) != Some("t") {
        return Err(Error::parse(&what, "first column must be `t`"));
    }
    let channels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(&what, e))?;
        if rec.len() != channels.len() + 1 {
            return Err(Error::parse(&what, format!("row {}: expected {} fields", i + 1, channels.len() + 1)));
        }
        timestamps.push(parse_field(&what, i + 1, &rec[0])?);
        for f in rec.iter().skip(1) {
            data.push(parse_field(&what, i + 1, f)?);
        }
    }
    let samples = RMatrix::from_row_slice(timestamps.len(), channels.len(), &data);
    WaveformSegment::new(sensor_id, channels, timestamps, samples)
}

pub fn write_waveform_csv(w: impl Write, seg: &WaveformSegment) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::parse("waveform output", e);
    let mut header = vec!["t".to_string()];
    header.extend(seg.channels.iter().cloned());
    wtr.write_record(&header).map_err(io)?;
    for (i, t) in seg.timestamps.iter().enumerate() {
        let mut row = vec![format!("{t:?}")];
        row.extend(seg.samples.row(i).iter().map(|x| format!("{x:?}")));
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("waveform output", e))
}

pub fn read_phasor_table(r: impl Read) -> Result<PhasorTable> {
    let what = "phasor table";
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(|e| csv_err(what, e))?.clone();
    if header.get(0) != Some("t") || header.len() % 2 != 1 {
        return Err(Error::parse(what, "header must be `t` followed by _mag/_ang pairs"));
    }
    let mut channels = Vec::new();
    for k in 0..(header.len() - 1) / 2 {
        let (m, a) = (&header[1 + 2 * k], &header[2 + 2 * k]);
        match (m.strip_suffix("_mag"), a.strip_suffix("_ang")) {
            (Some(cm), Some(ca)) if cm == ca => channels.push(cm.to_string()),
            _ => return Err(Error::parse(what, format!("columns {m:?}, {a:?} are not a _mag/_ang pair"))),
        }
    }
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(what, e))?;
        if rec.len() != header.len() {
            return Err(Error::parse(what, format!("row {}: expected {} fields", i + 1, header.len())));
        }
        times.push(parse_field(what, i + 1, &rec[0])?);
        for k in 0..channels.len() {
            let mag = parse_field(what, i + 1, &rec[1 + 2 * k])?;
            let ang = parse_field(what, i + 1, &rec[2 + 2 * k])?;
            data.push(if mag.is_nan() || ang.is_nan() {
                Complex64::new(f64::NAN, f64::NAN)
            } else {
                Complex64::from_polar(mag, ang)
            });
        }
    }
    Ok(PhasorTable {
        values: CMatrix::from_row_slice(times.len(), channels.len(), &data),
        times,
        channels,
    })
}

pub fn write_phasor_table(w: impl Write, table: &PhasorTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::parse("phasor table output", e);
    let mut header = vec!["t".to_string()];
    for ch in &table.channels {
        header.push(format!("{ch}_mag"));
        header.push(format!("{ch}_ang"));
    }
    wtr.write_record(&header).map_err(io)?;
    for (i, t) in table.times.iter().enumerate() {
        let mut row = vec![format!("{t:?}")];
        for j in 0..table.channels.len() {
            let p = table.values[(i, j)];
            if p.re.is_nan() || p.im.is_nan() {
                row.push("NaN".into());
                row.push("NaN".into());
            } else {
                row.push(format!("{:?}", p.norm()));
                row.push(format!("{:?}", phase_angle(p)));
            }
        }
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("phasor table output", e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorEntry {
    pub sensor_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<String>,
    #[serde(default = "unit_polarity")]
    pub polarity: f64,
}

fn unit_polarity() -> f64 {
    1.0
}

impl SensorEntry {
    /// The bus or line id this sensor is attached to.
    pub fn target(&self) -> &str {
        self.bus.as_deref().or(self.line.as_deref()).unwrap_or("")
    }

    /// Prefixes channels with the target id and applies the polarity.
    pub fn qualify(&self, mut seg: WaveformSegment) -> WaveformSegment {
        seg.channels = seg
            .channels
            .iter()
            .map(|c| format!("{}.{}", self.target(), c))
            .collect();
        seg.samples *= self.polarity;
        seg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorManifest {
    pub sensors: Vec<SensorEntry>,
}

impl SensorManifest {
    pub fn from_json(s: &str) -> Result<SensorManifest> {
        let m: SensorManifest =
            serde_json::from_str(s).map_err(|e| Error::parse("sensor manifest", e))?;
        for (i, e) in m.sensors.iter().enumerate() {
            if e.bus.is_some() == e.line.is_some() {
                return Err(Error::parse(
                    format!("sensors[{i}] ({:?})", e.sensor_id),
                    "exactly one of `bus` and `line` must be given",
                ));
            }
            if e.polarity != 1.0 && e.polarity != -1.0 {
                return Err(Error::parse(
                    format!("sensors[{i}] ({:?})", e.sensor_id),
                    "polarity must be 1 or -1",
                ));
            }
            if m.sensors[..i].iter().any(|o| o.sensor_id == e.sensor_id) {
                return Err(Error::parse("sensor manifest", format!("duplicate sensor {:?}", e.sensor_id)));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<SensorManifest> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SensorManifest::from_json(&s)
    }

    pub fn get(&self, sensor_id: &str) -> Option<&SensorEntry> {
        self.sensors.iter().find(|e| e.sensor_id == sensor_id)
    }

    /// [`SensorEntry::qualify`] through the manifest entry of each segment.
    pub fn qualify(&self, segments: &[WaveformSegment]) -> Result<Vec<WaveformSegment>> {
        segments
            .iter()
            .map(|s| {
                let e = self.get(&s.sensor_id).ok_or_else(|| {
                    Error::Integrity(format!("sensor {:?} has no manifest entry", s.sensor_id))
                })?;
                Ok(e.qualify(s.clone()))
            })
            .collect()
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    v.sort();
    Ok(v)
}

/// Every capture of every sensor under `dir`, renamed and polarity-corrected
/// through the manifest. A sensor directory missing from the manifest is an
/// error.
pub fn load_waveform_dir(dir: &Path, manifest: &SensorManifest) -> Result<Vec<WaveformSegment>> {
    let mut out = Vec::new();
    for sensor_dir in sorted_entries(dir)? {
        if !sensor_dir.is_dir() {
            continue;
        }
        let sensor_id = sensor_dir
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let entry = manifest.get(&sensor_id).ok_or_else(|| {
            Error::Integrity(format!("sensor {sensor_id:?} has no manifest entry"))
        })?;
        for file in sorted_entries(&sensor_dir)? {
            if file.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let f = fs::File::open(&file).map_err(|e| Error::io(&file, e))?;
            let seg = read_waveform_csv(std::io::BufReader::new(f), &sensor_id)?;
            out.push(entry.qualify(seg));
        }
    }
    for e in &manifest.sensors {
        if !out.iter().any(|s| s.sensor_id == e.sensor_id) {
            log::warn!("sensor {:?} in manifest has no waveform files", e.sensor_id);
        }
    }
    Ok(out)
}
