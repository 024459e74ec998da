//! Small circuits for unit tests.

use crate::circuit_model::{Bus, CircuitGraph, Edge, EdgeKind, LineImpedance, LineSpec, PhaseSet};
use crate::linalg::{c, complex_inverse, CMatrix, RMatrix};

pub fn bus(id: &str, injection: bool) -> Bus {
    Bus {
        id: id.into(),
        phases: PhaseSet::ABC,
        nominal_voltage: 4160.0,
        is_injection: injection,
    }
}

/// Three-phase line with the given total series impedance and optional
/// total shunt admittance.
pub fn z_line(id: &str, from: &str, to: &str, z: &CMatrix, shunt: Option<CMatrix>) -> Edge {
    Edge {
        id: id.into(),
        from_bus: from.into(),
        to_bus: to.into(),
        kind: EdgeKind::Line(LineSpec {
            length: 1.0,
            phases: PhaseSet::ABC,
            impedance: LineImpedance::Direct {
                series: complex_inverse(z, id).unwrap(),
                shunt,
            },
            transposed: false,
        }),
    }
}

pub fn rl_impedance(r: &RMatrix, l: &RMatrix, f: f64) -> CMatrix {
    let w = 2.0 * std::f64::consts::PI * f;
    CMatrix::from_fn(3, 3, |i, j| c(r[(i, j)], w * l[(i, j)]))
}

/// Coupled R-L block scaled by `k`.
pub fn rl_block(k: f64) -> (RMatrix, RMatrix) {
    let r = RMatrix::from_row_slice(3, 3, &[0.35, 0.16, 0.15, 0.16, 0.37, 0.16, 0.15, 0.16, 0.36]) * k;
    let l = RMatrix::from_row_slice(3, 3, &[2.9, 1.2, 1.0, 1.2, 3.0, 1.3, 1.0, 1.3, 2.95]) * (1e-3 * k);
    (r, l)
}

pub fn rl_line(id: &str, from: &str, to: &str, k: f64) -> Edge {
    let (r, l) = rl_block(k);
    z_line(id, from, to, &rl_impedance(&r, &l, 60.0), None)
}

/// Balanced positive-sequence voltages of magnitude `m`.
pub fn balanced(m: f64) -> Vec<[f64; 2]> {
    (0..3)
        .map(|k| {
            let a = -2.0 * std::f64::consts::PI * k as f64 / 3.0;
            [m * a.cos(), m * a.sin()]
        })
        .collect()
}

/// `1-2-3-4` plus `2-4`, all R-L lines, loads at 3 and 4, a small
/// load at 2, slack at 1.
pub fn meshed_rl() -> CircuitGraph {
    CircuitGraph::new(
        "meshed",
        vec![bus("1", true), bus("2", true), bus("3", true), bus("4", true)],
        vec![
            rl_line("L12", "1", "2", 1.0),
            rl_line("L23", "2", "3", 0.8),
            rl_line("L34", "3", "4", 1.3),
            rl_line("L24", "2", "4", 1.7),
        ],
    )
    .unwrap()
}
