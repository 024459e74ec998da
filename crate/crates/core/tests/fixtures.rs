use std::path::PathBuf;

use chrono::{TimeZone, Utc};
use gridtwin::circuit_model::CircuitGraph;
use gridtwin::component_admittance::edge_admittances;
use gridtwin::estimation::{estimate_phasor_state, MeasurementSet, MeasurementSpec};
use gridtwin::network_matrix::{assemble_y, NetworkAdmittance};

fn fixture(name: &str) -> CircuitGraph {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    CircuitGraph::load_path(p).unwrap()
}

fn reduced(name: &str, year: i32) -> CircuitGraph {
    fixture(name)
        .electrical_reduction(Utc.with_ymd_and_hms(year, 6, 1, 0, 0, 0).unwrap())
        .unwrap()
}

fn y_of(g: &CircuitGraph) -> NetworkAdmittance {
    assemble_y(g, &edge_admittances(g).unwrap()).unwrap()
}

#[test]
fn radial28_reduces_to_28_buses() {
    let g = reduced("radial28.json", 2025);
    assert_eq!(g.n_buses(), 28);
    let m = g.merge_map();
    assert_eq!(g.resolve_bus("m04s"), g.resolve_bus("m04"));
    assert_eq!(g.resolve_bus("m07a"), g.resolve_bus("m07"));
    assert_eq!(g.resolve_bus("b11x"), g.resolve_bus("b11"));
    assert_eq!(g.resolve_bus("b11y"), g.resolve_bus("b11"));
    assert_ne!(g.resolve_bus("m05"), g.resolve_bus("m09"));
    assert!(m.len() >= 4);
    assert_eq!(g.components().len(), 1);
}

#[test]
fn closing_the_tie_merges_its_ends() {
    let g = reduced("radial28.json", 2035);
    assert_eq!(g.n_buses(), 27);
    assert_eq!(g.resolve_bus("m05"), g.resolve_bus("m09"));
}

#[test]
fn admittance_sparsity_follows_adjacency() {
    let g = reduced("radial28.json", 2025);
    let y = y_of(&g);
    let buses = y.index.buses().to_vec();
    for (a, ja) in buses.iter().enumerate() {
        for (b, jb) in buses.iter().enumerate() {
            let adjacent = a == b
                || g.edges().iter().any(|e| {
                    (e.from_bus == *ja && e.to_bus == *jb) || (e.from_bus == *jb && e.to_bus == *ja)
                });
            let ra = y.index.range(ja).unwrap();
            let rb = y.index.range(jb).unwrap();
            let nonzero = ra.clone().any(|r| rb.clone().any(|c| y.y[(r, c)].norm() > 0.0));
            assert_eq!(nonzero, adjacent, "{ja} {jb}");
        }
    }
}

#[test]
fn siting_rule_observes_every_fixture() {
    for name in ["radial28.json", "feeder4.json", "feeder4_rl.json"] {
        let g = reduced(name, 2025);
        let y = y_of(&g);
        let spec = MeasurementSpec::siting_rule(&g);
        // Flat voltages on every measured bus, zero currents: any consistent
        // values expose the rank.
        let mut m = MeasurementSet::default();
        for b in &spec.voltage_buses {
            let n = y.index.phases_of(b).unwrap().len();
            m.voltages.insert(b.clone(), gridtwin::linalg::CVector::from_element(n, 1.0.into()));
        }
        for b in &spec.current_buses {
            let n = y.index.phases_of(b).unwrap().len();
            m.currents.insert(b.clone(), gridtwin::linalg::CVector::zeros(n));
        }
        m.zero_injection = spec.zero_injection_buses.iter().cloned().collect();
        let est = estimate_phasor_state(&y, &m).unwrap();
        assert_eq!(est.rank, y.index.dim(), "{name}");
    }
}

#[test]
fn two_bus_and_feeder4_load() {
    let g = reduced("two_bus.json", 2025);
    assert_eq!(g.n_buses(), 2);
    let y = y_of(&g);
    assert_eq!(y.index.dim(), 6);
    let g = reduced("feeder4.json", 2025);
    assert_eq!(g.n_buses(), 4);
    assert_eq!(y_of(&g).index.dim(), 12);
}
