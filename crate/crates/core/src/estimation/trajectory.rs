//! Least squares over a line-current trajectory constrained by the
//! zero-order-hold dynamics `i_l[k+1] = A_d i_l[k] + B_d v_b[k]`.
//!
//! A horizon of `T` steps has `T + 1` current samples (`k = 0..=T`) and `T`
//! held voltages (`k = 0..T`); the voltage sample taken at `k = T` has no
//! hold interval and is not used. Bus currents are `i_b = Ĉᵀ i_l` by
//! construction, so KCL holds exactly.
//!
//! The dynamics are eliminated onto `(i_l[0], v_b[0..T])`. That problem is
//! solved by a backward sweep of small QR factorizations: the cost-to-go
//! from step `k` is kept as `‖R_k·i_l[k] − z_k‖²`, and each step eliminates
//! `v_b[k]`.

use std::collections::{BTreeMap, BTreeSet};

use super::{channel_residual, Residual};
use crate::error::{Error, Result};
use crate::linalg::{RMatrix, RVector};
use crate::network_matrix::{Discretized, TimeDomainNetwork};

const RANK_RTOL: f64 = 1e-10;

/// Sampled signals, each `3 × N` (rows are phases a, b, c).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryMeasurements {
    /// Sample interval, s.
    pub dt: f64,
    pub line_currents: BTreeMap<String, RMatrix>,
    pub bus_currents: BTreeMap<String, RMatrix>,
    pub bus_voltages: BTreeMap<String, RMatrix>,
    /// Buses whose injection is known to be zero at every sample.
    pub zero_injection: BTreeSet<String>,
    pub line_current_weights: BTreeMap<String, f64>,
    pub bus_current_weights: BTreeMap<String, f64>,
    pub voltage_weights: BTreeMap<String, f64>,
}

impl TrajectoryMeasurements {
    /// Number of samples `N = T + 1`.
    pub fn samples(&self) -> Option<usize> {
        self.line_currents
            .values()
            .chain(self.bus_currents.values())
            .chain(self.bus_voltages.values())
            .map(|m| m.ncols())
            .next()
    }
}

#[derive(Debug, Clone)]
struct Row {
    label: String,
    /// Coefficients on `i_l` (current rows) or `v_b` (voltage rows).
    coeffs: RVector,
    weight: f64,
    /// `None` for zero-injection rows.
    data: Option<RVector>,
}

/// The assembled estimation problem; exposed so callers can inspect the
/// objective and its gradient.
#[derive(Debug, Clone)]
pub struct TrajectoryProblem {
    a_d: RMatrix,
    b_d: RMatrix,
    kcl: RMatrix,
    current_rows: Vec<Row>,
    voltage_rows: Vec<Row>,
    steps: usize,
    line_labels: Vec<String>,
    bus_labels: Vec<String>,
}

/// Estimated trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEstimate {
    /// `3m × (T+1)`.
    pub i_l: RMatrix,
    /// `3n × (T+1)`, equal to `Ĉᵀ·i_l`.
    pub i_b: RMatrix,
    /// `3n × T`.
    pub v_b: RMatrix,
    pub residual: Residual,
    /// Weighted sum of squared residuals.
    pub objective: f64,
    /// `line.phase` labels of the `i_l` rows.
    pub line_labels: Vec<String>,
    /// `bus.phase` labels of the `i_b` and `v_b` rows.
    pub bus_labels: Vec<String>,
}

fn expanded_labels(ids: &[String]) -> Vec<String> {
    ids.iter()
        .flat_map(|id| ['a', 'b', 'c'].map(|p| format!("{id}.{p}")))
        .collect()
}

fn check_weight(kind: &str, id: &str, w: f64) -> Result<f64> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{kind} weight for {id:?} must be positive, got {w}"
        )));
    }
    Ok(w)
}

impl TrajectoryProblem {
    pub fn new(
        net: &TimeDomainNetwork,
        disc: &Discretized,
        m: &TrajectoryMeasurements,
    ) -> Result<TrajectoryProblem> {
        let (nx, nu) = (net.n_states(), net.n_inputs());
        if disc.a_d.shape() != (nx, nx) || disc.b_d.shape() != (nx, nu) {
            return Err(Error::Dimension(format!(
                "dynamics operators are {:?} and {:?}, network needs ({nx}, {nx}) and ({nx}, {nu})",
                disc.a_d.shape(),
                disc.b_d.shape()
            )));
        }
        if !(m.dt > 0.0) || (m.dt - disc.dt).abs() > 1e-9 * disc.dt {
            return Err(Error::InvalidParameter(format!(
                "measurement interval {} s does not match discretization step {} s",
                m.dt, disc.dt
            )));
        }
        let n = m
            .samples()
            .ok_or_else(|| Error::InvalidParameter("no measured signals".into()))?;
        if n < 2 {
            return Err(Error::InvalidParameter("at least two samples are needed".into()));
        }
        let lines = &net.incidence.edges;
        let buses = &net.incidence.buses;
        let kcl = net.kvl.transpose();
        let line_pos = |id: &str| lines.iter().position(|l| l == id);
        let bus_pos = |id: &str| buses.iter().position(|b| b == id);

        let check = |kind: &str, id: &str, s: &RMatrix| -> Result<()> {
            if s.shape() != (3, n) {
                return Err(Error::Dimension(format!(
                    "{kind} {id:?} is {}×{}, expected 3×{n}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{kind} {id:?} has non-finite samples")));
            }
            Ok(())
        };

        let mut current_rows = Vec::new();
        for (id, s) in &m.line_currents {
            check("line current", id, s)?;
            let e = line_pos(id).ok_or_else(|| Error::Integrity(format!("unknown line {id:?}")))?;
            let w = check_weight("line current", id, m.line_current_weights.get(id).copied().unwrap_or(1.0))?;
            for p in 0..3 {
                let mut coeffs = RVector::zeros(nx);
                coeffs[3 * e + p] = 1.0;
                current_rows.push(Row {
                    label: format!("i_l:{id}.{}", ['a', 'b', 'c'][p]),
                    coeffs,
                    weight: w,
                    data: Some(s.row(p).transpose()),
                });
            }
        }
        for id in &m.zero_injection {
            if m.bus_currents.contains_key(id) {
                return Err(Error::Integrity(format!("bus {id:?} is both zero-injection and measured")));
            }
        }
        let mut bus_ids: Vec<&String> = m.bus_currents.keys().chain(m.zero_injection.iter()).collect();
        bus_ids.sort();
        for id in bus_ids {
            let j = bus_pos(id).ok_or_else(|| Error::Integrity(format!("unknown bus {id:?}")))?;
            let data = m.bus_currents.get(id);
            if let Some(s) = data {
                check("bus current", id, s)?;
            }
            let w = check_weight("bus current", id, m.bus_current_weights.get(id).copied().unwrap_or(1.0))?;
            for p in 0..3 {
                current_rows.push(Row {
                    label: format!("i_b:{id}.{}", ['a', 'b', 'c'][p]),
                    coeffs: kcl.row(3 * j + p).transpose(),
                    weight: w,
                    data: data.map(|s| s.row(p).transpose()),
                });
            }
        }
        let mut voltage_rows = Vec::new();
        for (id, s) in &m.bus_voltages {
            check("bus voltage", id, s)?;
            let j = bus_pos(id).ok_or_else(|| Error::Integrity(format!("unknown bus {id:?}")))?;
            let w = check_weight("voltage", id, m.voltage_weights.get(id).copied().unwrap_or(1.0))?;
            for p in 0..3 {
                let mut coeffs = RVector::zeros(nu);
                coeffs[3 * j + p] = 1.0;
                voltage_rows.push(Row {
                    label: format!("v_b:{id}.{}", ['a', 'b', 'c'][p]),
                    coeffs,
                    weight: w,
                    data: Some(s.row(p).transpose()),
                });
            }
        }
        for row in current_rows.iter_mut().chain(voltage_rows.iter_mut()) {
            if row.data.as_ref().is_some_and(|d| d.iter().all(|&x| x == 0.0)) {
                log::warn!("channel {} is identically zero; weight set to zero", row.label);
                row.weight = 0.0;
            }
        }
        Ok(TrajectoryProblem {
            a_d: disc.a_d.clone(),
            b_d: disc.b_d.clone(),
            kcl,
            current_rows,
            voltage_rows,
            steps: n - 1,
            line_labels: expanded_labels(lines),
            bus_labels: expanded_labels(buses),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Weighted current rows `(G, y_k)` at sample `k`.
    fn current_block(&self, k: usize) -> (RMatrix, RVector) {
        let nx = self.a_d.nrows();
        let rows = &self.current_rows;
        let g = RMatrix::from_fn(rows.len(), nx, |r, c| rows[r].weight.sqrt() * rows[r].coeffs[c]);
        let y = RVector::from_fn(rows.len(), |r, _| {
            rows[r].weight.sqrt() * rows[r].data.as_ref().map_or(0.0, |d| d[k])
        });
        (g, y)
    }

    fn voltage_block(&self, k: usize) -> (RMatrix, RVector) {
        let nu = self.b_d.ncols();
        let rows = &self.voltage_rows;
        let g = RMatrix::from_fn(rows.len(), nu, |r, c| rows[r].weight.sqrt() * rows[r].coeffs[c]);
        let y = RVector::from_fn(rows.len(), |r, _| rows[r].weight.sqrt() * rows[r].data.as_ref().unwrap()[k]);
        (g, y)
    }

    /// Trajectory `i_l[0..=T]` from an initial state and held inputs.
    pub fn propagate(&self, x0: &RVector, v_b: &RMatrix) -> RMatrix {
        let mut x = RMatrix::zeros(x0.len(), self.steps + 1);
        x.set_column(0, x0);
        for k in 0..self.steps {
            let next = &self.a_d * x.column(k) + &self.b_d * v_b.column(k);
            x.set_column(k + 1, &next);
        }
        x
    }

    /// Weighted residual vectors `G·x − y` per step.
    fn residuals(&self, i_l: &RMatrix, v_b: &RMatrix) -> (Vec<RVector>, Vec<RVector>) {
        let cur = (0..=self.steps)
            .map(|k| {
                let (g, y) = self.current_block(k);
                g * i_l.column(k) - y
            })
            .collect();
        let volt = (0..self.steps)
            .map(|k| {
                let (g, y) = self.voltage_block(k);
                g * v_b.column(k) - y
            })
            .collect();
        (cur, volt)
    }

    pub fn objective(&self, x0: &RVector, v_b: &RMatrix) -> f64 {
        let i_l = self.propagate(x0, v_b);
        let (cur, volt) = self.residuals(&i_l, v_b);
        cur.iter().chain(volt.iter()).map(|r| r.norm_squared()).sum()
    }

    /// Gradient of the objective over `(i_l[0], v_b[0..T])` by the adjoint
    /// recursion; returns `(∂/∂i_l[0], ∂/∂v_b)`.
    pub fn gradient(&self, x0: &RVector, v_b: &RMatrix) -> (RVector, RMatrix) {
        let i_l = self.propagate(x0, v_b);
        let (cur, volt) = self.residuals(&i_l, v_b);
        let (g_t, _) = self.current_block(self.steps);
        let mut lambda = 2.0 * g_t.tr_mul(&cur[self.steps]);
        let mut grad_u = RMatrix::zeros(v_b.nrows(), self.steps);
        for k in (0..self.steps).rev() {
            let (gv, _) = self.voltage_block(k);
            let gu = 2.0 * gv.tr_mul(&volt[k]) + self.b_d.tr_mul(&lambda);
            grad_u.set_column(k, &gu);
            let (gc, _) = self.current_block(k);
            lambda = 2.0 * gc.tr_mul(&cur[k]) + self.a_d.tr_mul(&lambda);
        }
        (lambda, grad_u)
    }

    pub fn solve(&self) -> Result<TrajectoryEstimate> {
        let (nx, nu) = (self.a_d.nrows(), self.b_d.ncols());
        let t = self.steps;

        let (g_t, y_t) = self.current_block(t);
        let mut m = RMatrix::zeros(g_t.nrows(), nx + 1);
        m.view_mut((0, 0), (g_t.nrows(), nx)).copy_from(&g_t);
        m.set_column(nx, &y_t);
        let r = triangularize(m);
        let mut r_next = r.view((0, 0), (nx, nx)).into_owned();
        let mut z_next = r.view((0, nx), (nx, 1)).column(0).into_owned();

        let mut gains = Vec::with_capacity(t);
        let mut unobservable = BTreeSet::new();
        let mut deficient = 0;
        for k in (0..t).rev() {
            let (gc, yc) = self.current_block(k);
            let (gv, yv) = self.voltage_block(k);
            let rows = gc.nrows() + gv.nrows() + nx;
            let mut m = RMatrix::zeros(rows, nu + nx + 1);
            let mut r0 = 0;
            m.view_mut((r0, nu), gc.shape()).copy_from(&gc);
            m.view_mut((r0, nu + nx), (gc.nrows(), 1)).copy_from(&yc);
            r0 += gc.nrows();
            m.view_mut((r0, 0), gv.shape()).copy_from(&gv);
            m.view_mut((r0, nu + nx), (gv.nrows(), 1)).copy_from(&yv);
            r0 += gv.nrows();
            m.view_mut((r0, 0), (nx, nu)).copy_from(&(&r_next * &self.b_d));
            m.view_mut((r0, nu), (nx, nx)).copy_from(&(&r_next * &self.a_d));
            m.view_mut((r0, nu + nx), (nx, 1)).copy_from(&z_next);

            let tol = RANK_RTOL * max_column_norm(&m, nu + nx);
            let r = triangularize(m);
            for i in 0..nu {
                if r[(i, i)].abs() <= tol {
                    deficient += 1;
                    unobservable.insert(format!("bus voltage {}", self.bus_labels[i]));
                }
            }
            gains.push((
                r.view((0, 0), (nu, nu)).into_owned(),
                r.view((0, nu), (nu, nx)).into_owned(),
                r.view((0, nu + nx), (nu, 1)).column(0).into_owned(),
            ));
            r_next = r.view((nu, nu), (nx, nx)).into_owned();
            z_next = r.view((nu, nu + nx), (nx, 1)).column(0).into_owned();
        }
        gains.reverse();
        let scale = r_next.column_iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for i in 0..nx {
            if r_next[(i, i)].abs() <= RANK_RTOL * scale {
                deficient += 1;
                unobservable.insert(format!("initial line current {}", self.line_labels[i]));
            }
        }
        if !unobservable.is_empty() {
            return Err(Error::Unobservable {
                unknowns: nx + nu * t,
                rank: nx + nu * t - deficient,
                modes: unobservable.into_iter().collect(),
            });
        }

        let x0 = r_next
            .solve_upper_triangular(&z_next)
            .ok_or_else(|| Error::Singular("initial state block".into()))?;
        let mut i_l = RMatrix::zeros(nx, t + 1);
        let mut v_b = RMatrix::zeros(nu, t);
        i_l.set_column(0, &x0);
        for (k, (ruu, rux, zu)) in gains.iter().enumerate() {
            let x = i_l.column(k).into_owned();
            let u = ruu
                .solve_upper_triangular(&(zu - rux * &x))
                .ok_or_else(|| Error::Singular(format!("input block at step {k}")))?;
            v_b.set_column(k, &u);
            i_l.set_column(k + 1, &(&self.a_d * x + &self.b_d * u));
        }
        let i_b = self.kcl.transpose().tr_mul(&i_l);
        let objective = self.objective(&x0, &v_b);
        let residual = self.residual(&i_l, &v_b);
        Ok(TrajectoryEstimate {
            i_l,
            i_b,
            v_b,
            residual,
            objective,
            line_labels: self.line_labels.clone(),
            bus_labels: self.bus_labels.clone(),
        })
    }

    /// Per-channel relative error over time, averaged; zero-injection and
    /// zero-weight channels are left out.
    fn residual(&self, i_l: &RMatrix, v_b: &RMatrix) -> Residual {
        let mut norms = Vec::new();
        for row in &self.current_rows {
            if let (Some(d), true) = (&row.data, row.weight > 0.0) {
                let pred = i_l.tr_mul(&row.coeffs);
                norms.push((d.norm(), (d - pred).norm()));
            }
        }
        for row in &self.voltage_rows {
            if let (Some(d), true) = (&row.data, row.weight > 0.0) {
                let d = d.rows(0, self.steps);
                let pred = v_b.tr_mul(&row.coeffs);
                norms.push((d.norm(), (d - pred).norm()));
            }
        }
        channel_residual(norms)
    }
}

fn max_column_norm(m: &RMatrix, cols: usize) -> f64 {
    (0..cols).map(|j| m.column(j).norm()).fold(0.0, f64::max)
}

/// Upper-triangular `R` (square, `cols × cols`) with `RᵀR = MᵀM`.
fn triangularize(m: RMatrix) -> RMatrix {
    let cols = m.ncols();
    let r = m.qr().r();
    let mut out = RMatrix::zeros(cols, cols);
    let k = r.nrows().min(cols);
    out.view_mut((0, 0), (k, cols)).copy_from(&r.rows(0, k));
    out
}

/// Solves the constrained trajectory least-squares problem.
pub fn estimate_time_domain_state(
    net: &TimeDomainNetwork,
    disc: &Discretized,
    m: &TrajectoryMeasurements,
) -> Result<TrajectoryEstimate> {
    TrajectoryProblem::new(net, disc, m)?.solve()
}
