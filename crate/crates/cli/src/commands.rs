use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use gridtwin::circuit_model::{CircuitGraph, EdgeKind};
use gridtwin::component_admittance::{edge_admittances, line_rl_map};
use gridtwin::estimation::{
    estimate_phasor_state, estimate_time_domain_state, observability_check, BatchResidual,
    MeasurementSpec,
};
use gridtwin::linalg::{CVector, RMatrix};
use gridtwin::network_matrix::{
    assemble_y, build_time_domain, write_matrix_dump, zoh_discretize, MatrixDump,
};
use gridtwin::sim_oracle::Scenario;
use gridtwin::sync_analysis::{estimate_sync_error, inject_clock_error, PairedPhaseSeries};
use gridtwin::waveform::{
    align, load_waveform_dir, phasor_timeseries, read_phasor_table, segment_phasor,
    write_phasor_table, PhasorTable, SensorManifest,
};

use crate::config::{resolve_path, ConfigFile};
use crate::error::{io_err, CliError, CliResult};
use crate::manifest::{digest_file, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "gridtwin", version, about = "Distribution-network admittance models, phasor extraction and state estimation")]
pub struct Cli {
    /// TOML file with per-command settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce a circuit at an instant and dump its admittance matrix.
    BuildYbus(BuildYbusArgs),
    /// Extract a phasor table from a directory of waveform captures.
    Phasors(PhasorsArgs),
    /// Phasor-domain state estimation for every row of a phasor table.
    Estimate(EstimateArgs),
    /// Time-domain state estimation from continuous waveform records.
    Dse(DseArgs),
    /// Clock synchronization error from two co-located phase series.
    SyncError(SyncErrorArgs),
    /// Synthesize a waveform dataset from a scenario file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct BuildYbusArgs {
    /// Circuit document, or `fixture:<name>`.
    pub circuit: String,
    /// Instant for switch states (RFC 3339); required when the circuit has switches.
    #[arg(long)]
    pub at: Option<DateTime<Utc>>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PhasorsArgs {
    /// Directory with one sub-directory of CSV captures per sensor.
    pub waveforms: PathBuf,
    /// Sensor manifest mapping sensor ids to buses or lines.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Nominal frequency, Hz.
    #[arg(long)]
    pub f0: Option<f64>,
    /// Resampling rate, Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Tick spacing of the output table, s.
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Circuit document, or `fixture:<name>`.
    pub circuit: String,
    /// Phasor table with `<bus>.V<phase>` and `<bus>.I<phase>` channels.
    #[arg(long)]
    pub phasors: PathBuf,
    /// Measurement spec; defaults to V and I at every injection bus.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub at: Option<DateTime<Utc>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DseArgs {
    /// Circuit document, or `fixture:<name>`.
    pub circuit: String,
    /// Directory with one sub-directory of CSV records per sensor.
    #[arg(long)]
    pub waveforms: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Sample interval of the estimation grid, s.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub at: Option<DateTime<Utc>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SyncErrorArgs {
    /// Phasor table holding the first channel.
    pub table: PathBuf,
    #[arg(long)]
    pub first: String,
    #[arg(long)]
    pub second: String,
    /// Table holding the second channel, paired on equal ticks; defaults to `table`.
    #[arg(long)]
    pub second_table: Option<PathBuf>,
    /// Keep the mean of the differences.
    #[arg(long)]
    pub keep_mean: bool,
    /// Clock error injected into the tables before estimation, deg.
    #[arg(long)]
    pub clock_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario document.
    pub scenario: PathBuf,
    /// Circuit document, or `fixture:<name>`; overrides the scenario's `circuit`.
    #[arg(long)]
    pub circuit: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<RunManifest> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let out = cli.command.out().to_path_buf();
    let mut manifest = match cli.command {
        Command::BuildYbus(a) => build_ybus(a, &cfg)?,
        Command::Phasors(a) => phasors(a, &cfg)?,
        Command::Estimate(a) => estimate(a, &cfg)?,
        Command::Dse(a) => dse(a, &cfg)?,
        Command::SyncError(a) => sync_error(a, &cfg)?,
        Command::Simulate(a) => simulate(a, &cfg)?,
    };
    if let Some(path) = &cli.config {
        manifest.add_input(path, &path.to_string_lossy())?;
    }
    manifest.finish(&out)
}

impl Command {
    pub fn out(&self) -> &Path {
        match self {
            Command::BuildYbus(a) => &a.out,
            Command::Phasors(a) => &a.out,
            Command::Estimate(a) => &a.out,
            Command::Dse(a) => &a.out,
            Command::SyncError(a) => &a.out,
            Command::Simulate(a) => &a.out,
        }
    }
}

fn ensure_dir(p: &Path) -> CliResult<()> {
    fs::create_dir_all(p).map_err(io_err(p))
}

fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn has_switches(g: &CircuitGraph) -> bool {
    g.edges().iter().any(|e| matches!(e.kind, EdgeKind::Switch(_)))
}

/// Loads and reduces a circuit; returns the graph, its resolved path and
/// its digest.
fn load_circuit(arg: &str, at: Option<DateTime<Utc>>) -> CliResult<(CircuitGraph, PathBuf, String)> {
    let path = resolve_path(arg);
    let g = CircuitGraph::load_path(&path)?;
    let at = match at {
        Some(t) => t,
        None if has_switches(&g) => {
            return Err(CliError::Usage(format!(
                "circuit {arg} has switches; --at is required"
            )))
        }
        None => DateTime::<Utc>::UNIX_EPOCH,
    };
    let hash = digest_file(&path)?;
    Ok((g.electrical_reduction(at)?, path, hash))
}

fn load_spec(path: Option<&Path>, g: &CircuitGraph) -> CliResult<MeasurementSpec> {
    match path {
        Some(p) => Ok(MeasurementSpec::from_json(&read_text(p)?)?),
        None => Ok(MeasurementSpec::siting_rule(g)),
    }
}

fn load_table(path: &Path) -> CliResult<PhasorTable> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    Ok(read_phasor_table(BufReader::new(f))?)
}

fn write_unobservable(out: &Path, e: &gridtwin::Error) -> CliResult<()> {
    if let gridtwin::Error::Unobservable { unknowns, rank, modes } = e {
        let report = json!({"unknowns": unknowns, "rank": rank, "modes": modes});
        let path = out.join("observability.json");
        fs::write(&path, serde_json::to_string_pretty(&report).unwrap() + "\n").map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn build_ybus(a: BuildYbusArgs, cfg: &ConfigFile) -> CliResult<RunManifest> {
    let at = a.at.or(cfg.build_ybus.at);
    let (g, path, hash) = load_circuit(&a.circuit, at)?;
    let y = assemble_y(&g, &edge_admittances(&g)?)?;
    ensure_dir(&a.out)?;
    let labels = y.index.label_strings();
    let dump = MatrixDump {
        name: "Y".into(),
        row_labels: labels.clone(),
        col_labels: labels,
        matrix: y.y.clone(),
    };
    let p = a.out.join("ybus.txt");
    let mut w = create(&p)?;
    write_matrix_dump(&mut w, &dump).map_err(io_err(&p))?;
    w.flush().map_err(io_err(&p))?;

    let p = a.out.join("buses.csv");
    let mut w = create(&p)?;
    writeln!(w, "bus,merged_into").map_err(io_err(&p))?;
    for (from, to) in g.merge_map() {
        writeln!(w, "{from},{to}").map_err(io_err(&p))?;
    }
    for b in g.bus_ids() {
        writeln!(w, "{b},{b}").map_err(io_err(&p))?;
    }
    w.flush().map_err(io_err(&p))?;

    let mut m = RunManifest::new(
        "build-ybus",
        json!({"circuit": a.circuit, "at": at.map(|t| t.to_rfc3339())}),
    );
    m.circuit_hash = Some(hash);
    m.add_input(&path, &a.circuit)?;
    m.results = json!({
        "buses": g.n_buses(),
        "edges": g.n_edges(),
        "dimension": y.index.dim(),
        "merged": g.merge_map().len(),
    });
    Ok(m)
}

pub fn phasors(a: PhasorsArgs, cfg: &ConfigFile) -> CliResult<RunManifest> {
    let c = &cfg.phasors;
    let f0 = a.f0.unwrap_or(c.f0);
    let rate = a.rate.unwrap_or(c.rate);
    let period = a.period.unwrap_or(c.period);
    let sensors = SensorManifest::load(&a.manifest)?;
    let segments = load_waveform_dir(&a.waveforms, &sensors)?;
    let frames = segments
        .iter()
        .map(|s| segment_phasor(s, rate, f0))
        .collect::<gridtwin::Result<Vec<_>>>()?;
    let table = phasor_timeseries(&frames, period, f0)?;
    ensure_dir(&a.out)?;
    let p = a.out.join("phasors.csv");
    let mut w = create(&p)?;
    write_phasor_table(&mut w, &table)?;
    w.flush().map_err(io_err(&p))?;

    let p = a.out.join("frames.csv");
    let mut w = create(&p)?;
    writeln!(w, "sensor,t,frequency,leakage,off_nominal").map_err(io_err(&p))?;
    for f in &frames {
        writeln!(w, "{},{:?},{:?},{},{}", f.sensor_id, f.timestamp, f.frequency, f.leakage, f.off_nominal)
            .map_err(io_err(&p))?;
    }
    w.flush().map_err(io_err(&p))?;

    let mut m = RunManifest::new(
        "phasors",
        json!({"waveforms": a.waveforms, "manifest": a.manifest, "f0": f0, "rate": rate, "period": period}),
    );
    m.add_input(&a.manifest, &a.manifest.to_string_lossy())?;
    m.add_input(&a.waveforms, &a.waveforms.to_string_lossy())?;
    m.results = json!({
        "frames": frames.len(),
        "ticks": table.times.len(),
        "channels": table.channels.len(),
        "off_nominal": frames.iter().filter(|f| f.off_nominal).count(),
    });
    Ok(m)
}

fn block_table(times: &[f64], labels: Vec<String>, rows: &[CVector]) -> PhasorTable {
    let mut values = gridtwin::linalg::CMatrix::zeros(times.len(), labels.len());
    for (r, v) in rows.iter().enumerate() {
        values.row_mut(r).copy_from(&v.transpose());
    }
    PhasorTable {
        times: times.to_vec(),
        channels: labels,
        values,
    }
}

pub fn estimate(a: EstimateArgs, cfg: &ConfigFile) -> CliResult<RunManifest> {
    let at = a.at.or(cfg.estimate.at);
    let (g, path, hash) = load_circuit(&a.circuit, at)?;
    let y = assemble_y(&g, &edge_admittances(&g)?)?;
    let spec = load_spec(a.spec.as_deref(), &g)?;
    let table = load_table(&a.phasors)?;
    if table.times.is_empty() {
        return Err(gridtwin::Error::Integrity("phasor table has no rows".into()).into());
    }
    ensure_dir(&a.out)?;
    let first = spec.phasor_measurements(&y.index, &table, 0)?;
    let report = observability_check(&y, &first)?;
    if !report.observable {
        let e = report.to_error();
        write_unobservable(&a.out, &e)?;
        return Err(e.into());
    }
    let mut estimates = Vec::with_capacity(table.times.len());
    for row in 0..table.times.len() {
        let m = spec.phasor_measurements(&y.index, &table, row)?;
        estimates.push(estimate_phasor_state(&y, &m)?);
    }
    let batch = BatchResidual::from_estimates(&estimates)?;

    let labels = |q: char| {
        y.index
            .labels()
            .into_iter()
            .map(|(b, p)| format!("{b}.{q}{}", p.label()))
            .collect::<Vec<_>>()
    };
    let v: Vec<CVector> = estimates.iter().map(|e| e.voltages.clone()).collect();
    let i: Vec<CVector> = estimates.iter().map(|e| e.currents.clone()).collect();
    for (name, q, rows) in [("voltages.csv", 'V', &v), ("currents.csv", 'I', &i)] {
        let p = a.out.join(name);
        let mut w = create(&p)?;
        write_phasor_table(&mut w, &block_table(&table.times, labels(q), rows))?;
        w.flush().map_err(io_err(&p))?;
    }
    let p = a.out.join("residuals.csv");
    let mut w = create(&p)?;
    writeln!(w, "t,residual_percent,rank,condition").map_err(io_err(&p))?;
    for (t, e) in table.times.iter().zip(&estimates) {
        writeln!(w, "{t:?},{:?},{},{:?}", e.residual.percent, e.rank, e.condition).map_err(io_err(&p))?;
    }
    w.flush().map_err(io_err(&p))?;

    let mut m = RunManifest::new(
        "estimate",
        json!({
            "circuit": a.circuit, "phasors": a.phasors, "spec": a.spec,
            "at": at.map(|t| t.to_rfc3339()),
        }),
    );
    m.circuit_hash = Some(hash);
    m.add_input(&path, &a.circuit)?;
    m.add_input(&a.phasors, &a.phasors.to_string_lossy())?;
    if let Some(s) = &a.spec {
        m.add_input(s, &s.to_string_lossy())?;
    }
    m.results = json!({
        "measurements": spec,
        "time_points": batch.time_points,
        "residual_percent_mean": batch.per_time_mean,
        "residual_percent_pooled": batch.pooled,
        "rank": report.rank,
        "condition": report.condition,
    });
    Ok(m)
}

fn write_trajectory(path: &Path, t0: f64, dt: f64, labels: &[String], x: &RMatrix) -> CliResult<()> {
    let mut w = create(path)?;
    writeln!(w, "t,{}", labels.join(",")).map_err(io_err(path))?;
    for k in 0..x.ncols() {
        let row: Vec<String> = x.column(k).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{:?},{}", t0 + k as f64 * dt, row.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn dse(a: DseArgs, cfg: &ConfigFile) -> CliResult<RunManifest> {
    let at = a.at.or(cfg.dse.at);
    let dt = a.dt.unwrap_or(cfg.dse.dt);
    if !(dt > 0.0) {
        return Err(CliError::Usage(format!("--dt must be positive, got {dt}")));
    }
    let (g, path, hash) = load_circuit(&a.circuit, at)?;
    let spec = load_spec(a.spec.as_deref(), &g)?;
    let sensors = SensorManifest::load(&a.manifest)?;
    let segments = load_waveform_dir(&a.waveforms, &sensors)?;
    let aligned = align(&segments, 1.0 / dt)?;
    let t0 = aligned[0].start();
    let net = build_time_domain(&g, &line_rl_map(&g)?)?;
    let disc = zoh_discretize(&net, dt)?;
    let meas = spec.trajectory_measurements(&aligned, dt)?;
    ensure_dir(&a.out)?;
    let est = match estimate_time_domain_state(&net, &disc, &meas) {
        Ok(e) => e,
        Err(e) => {
            write_unobservable(&a.out, &e)?;
            return Err(e.into());
        }
    };
    write_trajectory(&a.out.join("line_currents.csv"), t0, dt, &est.line_labels, &est.i_l)?;
    write_trajectory(&a.out.join("bus_currents.csv"), t0, dt, &est.bus_labels, &est.i_b)?;
    write_trajectory(&a.out.join("bus_voltages.csv"), t0, dt, &est.bus_labels, &est.v_b)?;

    let mut m = RunManifest::new(
        "dse",
        json!({
            "circuit": a.circuit, "waveforms": a.waveforms, "manifest": a.manifest,
            "spec": a.spec, "dt": dt, "at": at.map(|t| t.to_rfc3339()),
        }),
    );
    m.circuit_hash = Some(hash);
    m.add_input(&path, &a.circuit)?;
    m.add_input(&a.manifest, &a.manifest.to_string_lossy())?;
    m.add_input(&a.waveforms, &a.waveforms.to_string_lossy())?;
    if let Some(s) = &a.spec {
        m.add_input(s, &s.to_string_lossy())?;
    }
    m.results = json!({
        "measurements": spec,
        "samples": est.i_l.ncols(),
        "residual_percent": est.residual.percent,
        "objective": est.objective,
    });
    Ok(m)
}

/// Pairs two channels from two tables on ticks present in both.
fn pair_tables(a: &PhasorTable, ch1: &str, b: &PhasorTable, ch2: &str) -> CliResult<PairedPhaseSeries> {
    for (t, ch) in [(a, ch1), (b, ch2)] {
        if t.channel_index(ch).is_none() {
            return Err(gridtwin::Error::Integrity(format!("phasor table has no channel {ch:?}")).into());
        }
    }
    let (mut ts, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (r, &t) in a.times.iter().enumerate() {
        let Some(s) = b.times.iter().position(|&u| u == t) else {
            continue;
        };
        if let (Some(p), Some(q)) = (a.value(r, ch1), b.value(s, ch2)) {
            ts.push(t);
            x.push(p.arg().to_degrees());
            y.push(q.arg().to_degrees());
        }
    }
    Ok(PairedPhaseSeries::new(ts, x, y)?)
}

pub fn sync_error(a: SyncErrorArgs, cfg: &ConfigFile) -> CliResult<RunManifest> {
    let c = &cfg.sync_error;
    let remove_mean = if a.keep_mean { false } else { c.remove_mean };
    let sigma = a.clock_sigma.unwrap_or(c.clock_sigma);
    let seed = a.seed.unwrap_or(c.seed);
    let first = inject_clock_error(&load_table(&a.table)?, sigma, seed)?;
    let pair = match &a.second_table {
        // The second table gets an independent stream.
        Some(p) => {
            let second = inject_clock_error(&load_table(p)?, sigma, seed.wrapping_add(1))?;
            pair_tables(&first, &a.first, &second, &a.second)?
        }
        None => PairedPhaseSeries::from_table(&first, &a.first, &a.second)?,
    };
    let est = estimate_sync_error(&pair, remove_mean)?;
    ensure_dir(&a.out)?;
    let p = a.out.join("sync_error.json");
    fs::write(&p, serde_json::to_string_pretty(&est).unwrap() + "\n").map_err(io_err(&p))?;
    let p = a.out.join("differences.csv");
    let mut w = create(&p)?;
    writeln!(w, "t,difference_deg").map_err(io_err(&p))?;
    for (t, d) in pair.timestamps.iter().zip(pair.differences()) {
        writeln!(w, "{t:?},{d:?}").map_err(io_err(&p))?;
    }
    w.flush().map_err(io_err(&p))?;

    let mut m = RunManifest::new(
        "sync-error",
        json!({
            "table": a.table, "first": a.first, "second": a.second, "second_table": a.second_table,
            "remove_mean": remove_mean, "clock_sigma": sigma, "seed": seed,
        }),
    );
    m.seed = Some(seed);
    m.add_input(&a.table, &a.table.to_string_lossy())?;
    if let Some(p) = &a.second_table {
        m.add_input(p, &p.to_string_lossy())?;
    }
    m.results = serde_json::to_value(&est).unwrap();
    Ok(m)
}

pub fn simulate(a: SimulateArgs, cfg: &ConfigFile) -> CliResult<RunManifest> {
    let mut scenario = Scenario::from_json(&read_text(&a.scenario)?)?;
    if let Some(seed) = a.seed.or(cfg.simulate.seed) {
        scenario.seed = seed;
    }
    let circuit_arg = a
        .circuit
        .clone()
        .or_else(|| scenario.circuit.clone())
        .ok_or_else(|| CliError::Usage("no circuit: pass --circuit or set `circuit` in the scenario".into()))?;
    let path = if circuit_arg.starts_with("fixture:") || a.circuit.is_some() {
        resolve_path(&circuit_arg)
    } else {
        // Relative to the scenario file.
        let base = a.scenario.parent().unwrap_or(Path::new(""));
        base.join(&circuit_arg)
    };
    let g = CircuitGraph::load_path(&path)?;
    let hash = digest_file(&path)?;
    let data = scenario.synthesize(&g)?;
    data.write_to_dir(&a.out)?;
    let p = a.out.join("scenario.json");
    fs::write(&p, serde_json::to_string_pretty(&scenario).unwrap() + "\n").map_err(io_err(&p))?;

    let mut m = RunManifest::new(
        "simulate",
        json!({"scenario": a.scenario, "circuit": circuit_arg, "seed": scenario.seed}),
    );
    m.seed = Some(scenario.seed);
    m.circuit_hash = Some(hash);
    m.add_input(&a.scenario, &a.scenario.to_string_lossy())?;
    m.add_input(&path, &circuit_arg)?;
    m.results = json!({
        "captures": data.captures.len(),
        "sensors": data.manifest.sensors.len(),
        "time_domain_records": data.time_domain.len(),
        "truth_ticks": data.truth.times.len(),
    });
    Ok(m)
}
