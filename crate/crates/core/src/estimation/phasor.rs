use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use super::{channel_residual, Residual};
use crate::error::{Error, Result};
use crate::linalg::{c, real_embedding, stack_complex, unstack_complex, CMatrix, CVector, RMatrix};
use crate::network_matrix::{BusIndex, NetworkAdmittance};

/// Singular values below this fraction of the largest count as zero.
const RANK_RTOL: f64 = 1e-10;

/// Bus phasor measurements at one time point.
///
/// Vectors hold one entry per phase present at the bus, in phase order.
/// Zero-injection buses contribute a current measurement of exactly zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementSet {
    pub voltages: BTreeMap<String, CVector>,
    pub currents: BTreeMap<String, CVector>,
    pub zero_injection: BTreeSet<String>,
    pub voltage_weights: BTreeMap<String, f64>,
    pub current_weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Channel {
    label: String,
    weight: f64,
    synthetic: bool,
}

impl MeasurementSet {
    pub fn validate(&self, index: &BusIndex) -> Result<()> {
        for (kind, map) in [("voltage", &self.voltages), ("current", &self.currents)] {
            for (bus, v) in map {
                let p = index.phases_of(bus).ok_or_else(|| {
                    Error::Integrity(format!("{kind} measured at unknown bus {bus:?}"))
                })?;
                if v.len() != p.len() {
                    return Err(Error::Dimension(format!(
                        "{kind} at bus {bus:?} has {} entries for {} phases",
                        v.len(),
                        p.len()
                    )));
                }
            }
        }
        for bus in &self.zero_injection {
            if index.position(bus).is_none() {
                return Err(Error::Integrity(format!("zero-injection bus {bus:?} is unknown")));
            }
            if self.currents.contains_key(bus) {
                return Err(Error::Integrity(format!(
                    "bus {bus:?} is both zero-injection and current-measured"
                )));
            }
        }
        for (kind, map, values) in [
            ("voltage", &self.voltage_weights, &self.voltages),
            ("current", &self.current_weights, &self.currents),
        ] {
            for (bus, &w) in map {
                if !(w > 0.0) || !w.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "{kind} weight at bus {bus:?} must be positive, got {w}"
                    )));
                }
                if !values.contains_key(bus) && !(kind == "current" && self.zero_injection.contains(bus)) {
                    return Err(Error::Integrity(format!("{kind} weight for unmeasured bus {bus:?}")));
                }
            }
        }
        Ok(())
    }

    /// Canonical expanded indices of measured voltages.
    fn voltage_indices(&self, index: &BusIndex) -> Vec<usize> {
        self.voltages
            .keys()
            .flat_map(|b| index.range(b).unwrap())
            .collect()
    }

    /// Current-measured buses (including zero-injection), sorted.
    fn current_buses(&self) -> Vec<&String> {
        let mut v: Vec<&String> = self.currents.keys().chain(self.zero_injection.iter()).collect();
        v.sort();
        v
    }

    fn current_indices(&self, index: &BusIndex) -> Vec<usize> {
        self.current_buses()
            .into_iter()
            .flat_map(|b| index.range(b).unwrap())
            .collect()
    }
}

/// Rows and columns of `Y` reordered so that measured currents and measured
/// voltages come first: `P_I·Y·P_Vᵀ = [[Y11, Y12], [Y21, Y22]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedModel {
    /// Row `r` of `P_I·Y` is row `p_i[r]` of `Y`.
    pub p_i: Vec<usize>,
    /// Column `c` of `Y·P_Vᵀ` is column `p_v[c]` of `Y`.
    pub p_v: Vec<usize>,
    pub y11: CMatrix,
    pub y12: CMatrix,
    pub y21: CMatrix,
    pub y22: CMatrix,
}

fn complete_permutation(first: &[usize], n: usize) -> Vec<usize> {
    let chosen: BTreeSet<usize> = first.iter().copied().collect();
    first
        .iter()
        .copied()
        .chain((0..n).filter(|i| !chosen.contains(i)))
        .collect()
}

impl PartitionedModel {
    pub fn new(y: &CMatrix, current_rows: &[usize], voltage_cols: &[usize]) -> Result<PartitionedModel> {
        let n = y.nrows();
        if !y.is_square() {
            return Err(Error::Dimension("admittance matrix is not square".into()));
        }
        for (what, idx) in [("current", current_rows), ("voltage", voltage_cols)] {
            let set: BTreeSet<_> = idx.iter().collect();
            if set.len() != idx.len() || idx.iter().any(|&i| i >= n) {
                return Err(Error::Dimension(format!("{what} indices are not distinct or out of range")));
            }
        }
        let p_i = complete_permutation(current_rows, n);
        let p_v = complete_permutation(voltage_cols, n);
        let (ni, nv) = (current_rows.len(), voltage_cols.len());
        let block = |rows: &[usize], cols: &[usize]| CMatrix::from_fn(rows.len(), cols.len(), |r, c| y[(rows[r], cols[c])]);
        Ok(PartitionedModel {
            y11: block(&p_i[..ni], &p_v[..nv]),
            y12: block(&p_i[..ni], &p_v[nv..]),
            y21: block(&p_i[ni..], &p_v[..nv]),
            y22: block(&p_i[ni..], &p_v[nv..]),
            p_i,
            p_v,
        })
    }

    /// Permutation matrix `P` with `(P·x)[r] = x[p[r]]`.
    pub fn permutation_matrix(p: &[usize]) -> RMatrix {
        let mut m = RMatrix::zeros(p.len(), p.len());
        for (r, &i) in p.iter().enumerate() {
            m[(r, i)] = 1.0;
        }
        m
    }

    pub fn n_measured_currents(&self) -> usize {
        self.y11.nrows()
    }

    pub fn n_measured_voltages(&self) -> usize {
        self.y11.ncols()
    }

    /// `[[I, 0], [Y11, Y12]]` acting on `[V1; V2]`.
    pub fn operator(&self) -> CMatrix {
        let (ni, nv) = (self.n_measured_currents(), self.n_measured_voltages());
        let n = self.p_v.len();
        let mut h = CMatrix::zeros(nv + ni, n);
        for k in 0..nv {
            h[(k, k)] = c(1.0, 0.0);
        }
        h.view_mut((nv, 0), (ni, nv)).copy_from(&self.y11);
        h.view_mut((nv, nv), (ni, n - nv)).copy_from(&self.y12);
        h
    }

    /// Maps `[V1; V2]` back to canonical order.
    pub fn unpermute(&self, x: &CVector) -> CVector {
        let mut v = CVector::zeros(x.len());
        for (k, &i) in self.p_v.iter().enumerate() {
            v[i] = x[k];
        }
        v
    }
}

struct PhasorSystem {
    model: PartitionedModel,
    op: CMatrix,
    rhs: CVector,
    channels: Vec<Channel>,
}

impl PhasorSystem {
    fn build(y: &NetworkAdmittance, m: &MeasurementSet) -> Result<PhasorSystem> {
        let index = &y.index;
        if y.y.shape() != (index.dim(), index.dim()) {
            return Err(Error::Dimension("admittance matrix does not match its bus index".into()));
        }
        m.validate(index)?;
        let labels = index.label_strings();
        let model = PartitionedModel::new(&y.y, &m.current_indices(index), &m.voltage_indices(index))?;
        let op = model.operator();
        let mut rhs = Vec::with_capacity(op.nrows());
        let mut channels = Vec::with_capacity(op.nrows());
        for (bus, v) in &m.voltages {
            let w = m.voltage_weights.get(bus).copied().unwrap_or(1.0);
            for (k, i) in index.range(bus).unwrap().enumerate() {
                rhs.push(v[k]);
                channels.push(Channel { label: format!("V:{}", labels[i]), weight: w, synthetic: false });
            }
        }
        for bus in m.current_buses() {
            let w = m.current_weights.get(bus).copied().unwrap_or(1.0);
            let values = m.currents.get(bus);
            for (k, i) in index.range(bus).unwrap().enumerate() {
                let value = values.map_or(c(0.0, 0.0), |v| v[k]);
                let degenerate = values.is_some() && value == c(0.0, 0.0);
                if degenerate {
                    log::warn!("current channel {} reads exactly zero; weight set to zero", labels[i]);
                }
                rhs.push(value);
                channels.push(Channel {
                    label: format!("I:{}", labels[i]),
                    weight: if degenerate { 0.0 } else { w },
                    synthetic: values.is_none(),
                });
            }
        }
        Ok(PhasorSystem { model, op, rhs: CVector::from_vec(rhs), channels })
    }

    fn weighted(&self) -> (CMatrix, CVector) {
        let mut a = self.op.clone();
        let mut b = self.rhs.clone();
        for (r, ch) in self.channels.iter().enumerate() {
            let s = c(ch.weight.sqrt(), 0.0);
            a.row_mut(r).scale_mut(s.re);
            b[r] *= s;
        }
        (a, b)
    }
}

/// Numerical observability of a measurement layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    /// Complex unknowns (phase-expanded bus voltages).
    pub unknowns: usize,
    pub rank: usize,
    pub observable: bool,
    /// Ratio of extreme nonzero singular values.
    pub condition: f64,
    /// Orthonormal basis of unconstrained voltage directions, canonical order.
    pub nullspace: CMatrix,
    /// Human-readable description of each nullspace direction.
    pub modes: Vec<String>,
}

impl ObservabilityReport {
    pub fn to_error(&self) -> Error {
        Error::Unobservable {
            unknowns: self.unknowns,
            rank: self.rank,
            modes: self.modes.clone(),
        }
    }
}

fn analyse(op: &CMatrix, sys_model: &PartitionedModel, labels: &[String]) -> ObservabilityReport {
    let n = op.ncols();
    let rows = op.nrows().max(n);
    let mut padded = CMatrix::zeros(rows, n);
    padded.view_mut((0, 0), op.shape()).copy_from(op);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = RANK_RTOL * sigma_max;
    let mut rank = 0;
    let mut sigma_min = f64::INFINITY;
    let mut null = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol && sigma_max > 0.0 {
            rank += 1;
            sigma_min = sigma_min.min(s);
        } else {
            let v: CVector = v_t.row(k).transpose().map(|z| z.conj());
            null.push(sys_model.unpermute(&v));
        }
    }
    let nullspace = if null.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&null)
    };
    let modes = null
        .iter()
        .map(|v| {
            let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let parts: Vec<&str> = v
                .iter()
                .enumerate()
                .filter(|(_, z)| z.norm() >= 0.1 * peak)
                .map(|(i, _)| labels[i].as_str())
                .collect();
            format!("voltage at {}", parts.join(", "))
        })
        .collect();
    ObservabilityReport {
        unknowns: n,
        rank,
        observable: rank == n,
        condition: if rank == 0 { f64::INFINITY } else { sigma_max / sigma_min },
        nullspace,
        modes,
    }
}

/// Rank of `[[I, 0], [Y11, Y12]]` (with weights) against the number of
/// unknown bus voltages.
pub fn observability_check(y: &NetworkAdmittance, m: &MeasurementSet) -> Result<ObservabilityReport> {
    let sys = PhasorSystem::build(y, m)?;
    let (a, _) = sys.weighted();
    Ok(analyse(&a, &sys.model, &y.index.label_strings()))
}

/// Least-squares voltages of every bus plus residual diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub index: BusIndex,
    /// Canonical order.
    pub voltages: CVector,
    /// `Y·V̂`.
    pub currents: CVector,
    pub residual: Residual,
    pub rank: usize,
    pub condition: f64,
    /// Weighted sum of squared measurement residuals.
    pub objective: f64,
    /// Labels of measured (non-synthetic) channels, e.g. `V:2.a`, `I:3.b`.
    pub channel_labels: Vec<String>,
    pub measured: CVector,
    pub predicted: CVector,
}

fn real_lstsq(a: &CMatrix, b: &CVector) -> (CVector, usize) {
    let ar = real_embedding(a);
    let br = stack_complex(b);
    let n = ar.ncols();
    let rows = ar.nrows().max(n);
    let mut padded = RMatrix::zeros(rows, n);
    padded.view_mut((0, 0), ar.shape()).copy_from(&ar);
    let mut bp = crate::linalg::RVector::zeros(rows);
    bp.rows_mut(0, br.len()).copy_from(&br);
    let svd = padded.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = RANK_RTOL * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let x = svd.solve(&bp, tol.max(f64::MIN_POSITIVE)).expect("both factors computed");
    (unstack_complex(&x), rank / 2)
}

/// Minimizes `‖[V1; I1] − [[I, 0], [Y11, Y12]]·[V̂1; V̂2]‖` (weighted).
pub fn estimate_phasor_state(y: &NetworkAdmittance, m: &MeasurementSet) -> Result<StateEstimate> {
    let sys = PhasorSystem::build(y, m)?;
    let (a, b) = sys.weighted();
    let report = analyse(&a, &sys.model, &y.index.label_strings());
    if !report.observable {
        return Err(report.to_error());
    }
    let (x, _) = real_lstsq(&a, &b);
    let predicted_all = &sys.op * &x;
    let objective = (&a * &x - &b).norm_squared();
    let keep: Vec<usize> = (0..sys.channels.len())
        .filter(|&r| !sys.channels[r].synthetic)
        .collect();
    let measured = CVector::from_iterator(keep.len(), keep.iter().map(|&r| sys.rhs[r]));
    let predicted = CVector::from_iterator(keep.len(), keep.iter().map(|&r| predicted_all[r]));
    let residual = channel_residual(
        measured
            .iter()
            .zip(predicted.iter())
            .map(|(m, p)| (m.norm(), (m - p).norm())),
    );
    let voltages = sys.model.unpermute(&x);
    Ok(StateEstimate {
        index: y.index.clone(),
        currents: &y.y * &voltages,
        voltages,
        residual,
        rank: report.rank,
        condition: report.condition,
        objective,
        channel_labels: keep.iter().map(|&r| sys.channels[r].label.clone()).collect(),
        measured,
        predicted,
    })
}

/// Minimum-norm least-squares voltages and the operator rank, without
/// requiring observability.
pub fn min_norm_estimate(y: &NetworkAdmittance, m: &MeasurementSet) -> Result<(CVector, usize)> {
    let sys = PhasorSystem::build(y, m)?;
    let (a, b) = sys.weighted();
    let (x, rank) = real_lstsq(&a, &b);
    Ok((sys.model.unpermute(&x), rank))
}

/// Residuals of a batch of estimates over identical channel layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResidual {
    /// Mean over time points of each point's residual, percent.
    pub per_time_mean: f64,
    /// Channel norms taken over all time points, then averaged, percent.
    pub pooled: f64,
    pub time_points: usize,
}

impl BatchResidual {
    pub fn from_estimates(estimates: &[StateEstimate]) -> Result<BatchResidual> {
        let first = estimates
            .first()
            .ok_or_else(|| Error::InvalidParameter("no estimates".into()))?;
        let k = first.channel_labels.len();
        if estimates.iter().any(|e| e.channel_labels != first.channel_labels) {
            return Err(Error::Dimension("estimates have different channel layouts".into()));
        }
        let t = estimates.len();
        let per_time_mean = estimates.iter().map(|e| e.residual.percent).sum::<f64>() / t as f64;
        let measured = CMatrix::from_fn(t, k, |r, j| estimates[r].measured[j]);
        let predicted = CMatrix::from_fn(t, k, |r, j| estimates[r].predicted[j]);
        let pooled = super::residual_metric::<Complex64>(&measured, &predicted)?.percent;
        Ok(BatchResidual { per_time_mean, pooled, time_points: t })
    }
}
