//! Ground-truth generators: a direct phasor solve with a slack bus, RK4
//! integration of the inductive-line dynamics, and waveform synthesis.

mod scenario;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, RMatrix, RVector};
use crate::network_matrix::{NetworkAdmittance, TimeDomainNetwork};

pub use scenario::{
    line_current_phasors, CaptureSettings, InjectionProfile, Scenario, ScenarioSensor,
    SyntheticDataset, TimeDomainSettings,
};

/// Solves `I = Y·V` for every voltage given the slack-bus voltage and the
/// injections of the other buses (absent buses inject zero).
pub fn forward_phasor_solve(
    y: &NetworkAdmittance,
    slack_bus: &str,
    slack_voltage: &CVector,
    injections: &BTreeMap<String, CVector>,
) -> Result<(CVector, CVector)> {
    let index = &y.index;
    let slack = index
        .range(slack_bus)
        .ok_or_else(|| Error::Integrity(format!("slack bus {slack_bus:?} is unknown")))?;
    if slack_voltage.len() != slack.len() {
        return Err(Error::Dimension(format!(
            "slack voltage has {} entries for {} phases",
            slack_voltage.len(),
            slack.len()
        )));
    }
    let n = index.dim();
    let mut current = CVector::zeros(n);
    for (bus, i) in injections {
        if bus == slack_bus {
            return Err(Error::Integrity(format!("injection given at slack bus {bus:?}")));
        }
        let r = index
            .range(bus)
            .ok_or_else(|| Error::Integrity(format!("injection at unknown bus {bus:?}")))?;
        if i.len() != r.len() {
            return Err(Error::Dimension(format!(
                "injection at bus {bus:?} has {} entries for {} phases",
                i.len(),
                r.len()
            )));
        }
        current.rows_mut(r.start, r.len()).copy_from(i);
    }
    let free: Vec<usize> = (0..n).filter(|i| !slack.contains(i)).collect();
    let fixed: Vec<usize> = slack.clone().collect();
    let y_ff = CMatrix::from_fn(free.len(), free.len(), |r, c| y.y[(free[r], free[c])]);
    let y_fs = CMatrix::from_fn(free.len(), fixed.len(), |r, c| y.y[(free[r], fixed[c])]);
    let rhs = CVector::from_iterator(free.len(), free.iter().map(|&i| current[i])) - y_fs * slack_voltage;
    let lu = y_ff.lu();
    let v_free = lu
        .solve(&rhs)
        .filter(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular("admittance block of non-slack buses".into()))?;
    let mut v = CVector::zeros(n);
    for (k, &i) in free.iter().enumerate() {
        v[i] = v_free[k];
    }
    for (k, i) in slack.clone().enumerate() {
        v[i] = slack_voltage[k];
    }
    // Non-slack currents are the prescribed injections, exact zeros included.
    let yv = &y.y * &v;
    for i in slack {
        current[i] = yv[i];
    }
    Ok((v, current))
}

/// Bus-voltage input to the line dynamics.
pub enum BusVoltageInput<'a> {
    /// `v_b(t)` evaluated at every RK4 stage.
    Continuous(&'a dyn Fn(f64) -> RVector),
    /// Column `k` is held on `[k·dt, (k+1)·dt)`.
    Held(&'a RMatrix),
}

/// Sampled output of [`simulate_time_domain`]; columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    pub dt: f64,
    pub i_l: RMatrix,
    pub i_b: RMatrix,
    pub v_b: RMatrix,
}

fn rk4_step(net: &TimeDomainNetwork, x: &RVector, v: &dyn Fn(f64) -> RVector, t: f64, h: f64) -> RVector {
    let k1 = net.derivative(x, &v(t));
    let k2 = net.derivative(&(x + &k1 * (h / 2.0)), &v(t + h / 2.0));
    let k3 = net.derivative(&(x + &k2 * (h / 2.0)), &v(t + h / 2.0));
    let k4 = net.derivative(&(x + &k3 * h), &v(t + h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Advances the line currents from `t` by `h` in `steps` RK4 steps.
pub fn rk4_advance(
    net: &TimeDomainNetwork,
    x: &RVector,
    v: &dyn Fn(f64) -> RVector,
    t: f64,
    h: f64,
    steps: usize,
) -> RVector {
    let dh = h / steps.max(1) as f64;
    let mut x = x.clone();
    for s in 0..steps.max(1) {
        x = rk4_step(net, &x, v, t + s as f64 * dh, dh);
    }
    x
}

/// RK4 integration of `d i_l/dt = A i_l + B v_b`, `substeps` fine steps per
/// sample interval `dt`, returning `samples` samples starting at `t = 0`.
pub fn simulate_time_domain(
    net: &TimeDomainNetwork,
    input: BusVoltageInput<'_>,
    i0: &RVector,
    dt: f64,
    substeps: usize,
    samples: usize,
) -> Result<SampledTrajectory> {
    let (nx, nu) = (net.n_states(), net.n_inputs());
    if i0.len() != nx {
        return Err(Error::Dimension(format!("initial state has {} entries, expected {nx}", i0.len())));
    }
    if !(dt > 0.0) || substeps < 100 || samples == 0 {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0, at least 100 substeps and one sample (dt {dt}, substeps {substeps}, samples {samples})"
        )));
    }
    if let BusVoltageInput::Held(v) = &input {
        if v.nrows() != nu || v.ncols() + 1 < samples {
            return Err(Error::Dimension(format!(
                "held input is {}×{}, need {nu}×{}",
                v.nrows(),
                v.ncols(),
                samples - 1
            )));
        }
    }
    let h = dt / substeps as f64;
    let spectral_radius = net
        .a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if spectral_radius * h > 2.5 {
        return Err(Error::UnstableStep(format!(
            "step {h} s times spectral radius {spectral_radius} exceeds the RK4 stability bound"
        )));
    }

    let mut i_l = RMatrix::zeros(nx, samples);
    let mut v_b = RMatrix::zeros(nu, samples);
    let mut x = i0.clone();
    let growth_cap = 1e6 * (1.0 + x.amax());
    for k in 0..samples {
        let t = k as f64 * dt;
        i_l.set_column(k, &x);
        match &input {
            BusVoltageInput::Continuous(f) => v_b.set_column(k, &f(t)),
            BusVoltageInput::Held(v) => {
                let col = v.column(k.min(v.ncols() - 1)).into_owned();
                v_b.set_column(k, &col);
            }
        }
        if k + 1 == samples {
            break;
        }
        x = match &input {
            BusVoltageInput::Continuous(f) => rk4_advance(net, &x, *f, t, dt, substeps),
            BusVoltageInput::Held(v) => {
                let held = v.column(k).into_owned();
                rk4_advance(net, &x, &move |_| held.clone(), t, dt, substeps)
            }
        };
        if x.iter().any(|z| !z.is_finite()) || x.amax() > growth_cap * (1.0 + v_b.column(k).amax()) {
            return Err(Error::UnstableStep(format!("state norm blew up at sample {}", k + 1)));
        }
    }
    let i_b = net.injections_matrix(&i_l);
    Ok(SampledTrajectory { dt, i_l, i_b, v_b })
}
