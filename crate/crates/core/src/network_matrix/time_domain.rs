use std::collections::BTreeMap;

use crate::circuit_model::{CircuitGraph, EdgeKind, PhaseSet};
use crate::component_admittance::RLLineParams;
use crate::error::{Error, Result};
use crate::linalg::{block_diag, RMatrix, RVector};

use super::{incidence, IncidenceMatrix};

/// Network of inductive three-phase lines:
/// `d i_l/dt = A i_l + B v_b` with `A = -L⁻¹R`, `B = L⁻¹Ĉ`, and bus
/// injections `i_b = Ĉᵀ i_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainNetwork {
    pub incidence: IncidenceMatrix,
    pub r: RMatrix,
    pub l: RMatrix,
    pub a: RMatrix,
    pub b: RMatrix,
    /// `Ĉ = Cᵀ ⊗ I₃`.
    pub kvl: RMatrix,
}

impl TimeDomainNetwork {
    /// From per-line 3×3 blocks ordered like the incidence columns.
    pub fn from_blocks(
        incidence: IncidenceMatrix,
        r_blocks: &[RMatrix],
        l_blocks: &[RMatrix],
    ) -> Result<TimeDomainNetwork> {
        let m = incidence.edges.len();
        if r_blocks.len() != m || l_blocks.len() != m {
            return Err(Error::Dimension(format!(
                "expected {m} R/L blocks, got {} and {}",
                r_blocks.len(),
                l_blocks.len()
            )));
        }
        let mut l_inv = Vec::with_capacity(m);
        for (e, (r, l)) in r_blocks.iter().zip(l_blocks).enumerate() {
            if r.shape() != (3, 3) || l.shape() != (3, 3) {
                return Err(Error::Dimension(format!(
                    "line {}: R/L blocks must be 3×3",
                    incidence.edges[e]
                )));
            }
            let inv = l
                .clone()
                .try_inverse()
                .filter(|inv| inv.iter().all(|x| x.is_finite()))
                .ok_or_else(|| Error::SingularInductance(incidence.edges[e].clone()))?;
            l_inv.push(inv);
        }
        let r = block_diag(r_blocks);
        let l = block_diag(l_blocks);
        let l_inv = block_diag(&l_inv);
        let kvl = incidence.kvl_operator();
        let a = -(&l_inv * &r);
        let b = &l_inv * &kvl;
        Ok(TimeDomainNetwork {
            incidence,
            r,
            l,
            a,
            b,
            kvl,
        })
    }

    /// Number of line-current states, `3m`.
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    /// Number of bus-voltage inputs, `3n`.
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    /// `i_b = Ĉᵀ i_l`.
    pub fn injections(&self, i_l: &RVector) -> RVector {
        self.kvl.tr_mul(i_l)
    }

    /// Column-wise `Ĉᵀ i_l` for a trajectory.
    pub fn injections_matrix(&self, i_l: &RMatrix) -> RMatrix {
        self.kvl.tr_mul(i_l)
    }

    /// Right-hand side of the line dynamics.
    pub fn derivative(&self, i_l: &RVector, v_b: &RVector) -> RVector {
        &self.a * i_l + &self.b * v_b
    }
}

/// Time-domain model of a reduced, all-line, three-phase graph.
pub fn build_time_domain(
    g: &CircuitGraph,
    rl: &BTreeMap<String, RLLineParams>,
) -> Result<TimeDomainNetwork> {
    for bus in g.buses() {
        if bus.phases != PhaseSet::ABC {
            return Err(Error::PhaseMismatch {
                edge: bus.id.clone(),
                message: "time-domain model needs three-phase buses".into(),
            });
        }
    }
    let inc = incidence(g)?;
    let mut r_blocks = Vec::new();
    let mut l_blocks = Vec::new();
    for edge in g.edges() {
        if !matches!(edge.kind, EdgeKind::Line(_)) {
            return Err(Error::Integrity(format!(
                "{} {:?}: time-domain model covers lines only",
                edge.kind.name(),
                edge.id
            )));
        }
        let p = rl
            .get(&edge.id)
            .ok_or_else(|| Error::Integrity(format!("no R/L parameters for line {:?}", edge.id)))?;
        r_blocks.push(p.r.clone());
        l_blocks.push(p.l.clone());
    }
    TimeDomainNetwork::from_blocks(inc, &r_blocks, &l_blocks)
}

/// Zero-order-hold discretization `i_l[k+1] = A_d i_l[k] + B_d v_b[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub a_d: RMatrix,
    pub b_d: RMatrix,
    pub dt: f64,
}

pub fn zoh_discretize(net: &TimeDomainNetwork, dt: f64) -> Result<Discretized> {
    discretize(&net.a, &net.b, dt)
}

/// `A_d = exp(A dt)`; `B_d = A⁻¹(A_d - I)B` when `A` is well conditioned,
/// otherwise the top-right block of `exp([[A, B], [0, 0]] dt)`.
pub fn discretize(a: &RMatrix, b: &RMatrix, dt: f64) -> Result<Discretized> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let n = a.nrows();
    let a_d = (a * dt).exp();
    let inverse = a
        .clone()
        .try_inverse()
        .filter(|inv| a.norm() * inv.norm() < 1e8);
    let b_d = match inverse {
        Some(inv) => inv * (&a_d - RMatrix::identity(n, n)) * b,
        None => {
            let k = b.ncols();
            let mut aug = RMatrix::zeros(n + k, n + k);
            aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
            aug.view_mut((0, n), (n, k)).copy_from(&(b * dt));
            aug.exp().view((0, n), (n, k)).into_owned()
        }
    };
    Ok(Discretized { a_d, b_d, dt })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_line(r: RMatrix, l: RMatrix) -> TimeDomainNetwork {
        let inc = IncidenceMatrix {
            c: RMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            buses: vec!["1".into(), "2".into()],
            edges: vec!["L".into()],
        };
        TimeDomainNetwork::from_blocks(inc, &[r], &[l]).unwrap()
    }

    #[test]
    fn unit_rl_line() {
        let eye = RMatrix::identity(3, 3);
        let net = single_line(eye.clone(), eye.clone());
        assert_eq!(net.a, -eye);
        assert_eq!(net.b, net.kvl);
    }

    #[test]
    fn lossless_line_is_integrator() {
        let l = RMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.2, 0.5, 2.0, 0.5, 0.2, 0.5, 2.0]) * 1e-3;
        let net = single_line(RMatrix::zeros(3, 3), l.clone());
        assert_eq!(net.a, RMatrix::zeros(3, 3));
        let dt = 4e-4;
        let d = zoh_discretize(&net, dt).unwrap();
        assert_eq!(d.a_d, RMatrix::identity(3, 3));
        let expected = l.try_inverse().unwrap() * &net.kvl * dt;
        assert!((&d.b_d - &expected).amax() <= 1e-12 * expected.amax());
    }

    #[test]
    fn singular_inductance_named() {
        let inc = IncidenceMatrix {
            c: RMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            buses: vec!["1".into(), "2".into()],
            edges: vec!["bad".into()],
        };
        let err = TimeDomainNetwork::from_blocks(inc, &[RMatrix::identity(3, 3)], &[RMatrix::zeros(3, 3)])
            .unwrap_err();
        assert!(matches!(err, Error::SingularInductance(ref e) if e == "bad"));
    }

    #[test]
    fn non_positive_step_rejected() {
        let eye = RMatrix::identity(3, 3);
        let net = single_line(eye.clone(), eye);
        assert!(zoh_discretize(&net, 0.0).is_err());
        assert!(zoh_discretize(&net, -1e-3).is_err());
    }

    #[test]
    fn small_step_error_is_second_order() {
        let r = RMatrix::from_diagonal(&RVector::from_vec(vec![0.3, 0.4, 0.35]));
        let l = RMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.2, 0.5, 2.0, 0.5, 0.2, 0.5, 2.0]) * 1e-3;
        let net = single_line(r, l);
        let err = |dt: f64| {
            let d = zoh_discretize(&net, dt).unwrap();
            (d.a_d - RMatrix::identity(3, 3) - &net.a * dt).norm()
        };
        let ratio = err(1e-4) / err(1e-5);
        assert!((ratio - 100.0).abs() < 5.0, "ratio {ratio}");
    }

    #[test]
    fn both_input_routes_agree() {
        let r = RMatrix::from_diagonal(&RVector::from_vec(vec![0.3, 0.4, 0.35]));
        let l = RMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.2, 0.5, 2.0, 0.5, 0.2, 0.5, 2.0]) * 1e-3;
        let net = single_line(r, l);
        let dt = 4e-4;
        let via_inverse = zoh_discretize(&net, dt).unwrap().b_d;
        let n = 3;
        let k = net.b.ncols();
        let mut aug = RMatrix::zeros(n + k, n + k);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&net.a * dt));
        aug.view_mut((0, n), (n, k)).copy_from(&(&net.b * dt));
        let via_aug = aug.exp().view((0, n), (n, k)).into_owned();
        assert!((&via_inverse - &via_aug).amax() <= 1e-10 * via_aug.amax());
    }
}
