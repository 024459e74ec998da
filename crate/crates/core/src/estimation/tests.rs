use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::circuit_model::CircuitGraph;
use crate::component_admittance::{edge_admittances, line_rl_map};
use crate::linalg::{c, CMatrix, CVector, RMatrix, RVector};
use crate::network_matrix::{assemble_y, build_time_domain, zoh_discretize, NetworkAdmittance};
use crate::sim_oracle::forward_phasor_solve;
use crate::test_support::{balanced, bus, meshed_rl, rl_block, rl_impedance, z_line};
use crate::Error;

fn y_of(g: &CircuitGraph) -> NetworkAdmittance {
    assemble_y(g, &edge_admittances(g).unwrap()).unwrap()
}

fn shunt(k: f64) -> CMatrix {
    CMatrix::from_fn(3, 3, |i, j| c(0.0, if i == j { 6e-6 } else { -1.5e-6 } * k))
}

/// Radial `1-2-3-4` with line charging.
fn radial4() -> CircuitGraph {
    let z = |k: f64| {
        let (r, l) = rl_block(k);
        rl_impedance(&r, &l, 60.0)
    };
    CircuitGraph::new(
        "radial4",
        vec![bus("1", true), bus("2", true), bus("3", true), bus("4", true)],
        vec![
            z_line("L12", "1", "2", &z(1.0), Some(shunt(1.0))),
            z_line("L23", "2", "3", &z(0.6), Some(shunt(0.6))),
            z_line("L34", "3", "4", &z(0.9), Some(shunt(0.9))),
        ],
    )
    .unwrap()
}

fn cvec(pairs: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(pairs.len(), pairs.iter().map(|p| c(p[0], p[1])))
}

/// Ground truth from the forward solver.
fn truth(y: &NetworkAdmittance, seed: u64) -> (CVector, CVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inj = BTreeMap::new();
    for b in &y.index.buses()[1..] {
        let v = CVector::from_fn(3, |_, _| c(rng.random_range(-40.0..10.0), rng.random_range(-20.0..20.0)));
        inj.insert(b.clone(), v);
    }
    forward_phasor_solve(y, "1", &cvec(&balanced(2400.0)), &inj).unwrap()
}

fn bus_slice(y: &NetworkAdmittance, x: &CVector, b: &str) -> CVector {
    let r = y.index.range(b).unwrap();
    x.rows(r.start, r.len()).into_owned()
}

fn measure(y: &NetworkAdmittance, v: &CVector, i: &CVector, vb: &[&str], ib: &[&str]) -> MeasurementSet {
    MeasurementSet {
        voltages: vb.iter().map(|b| (b.to_string(), bus_slice(y, v, b))).collect(),
        currents: ib.iter().map(|b| (b.to_string(), bus_slice(y, i, b))).collect(),
        ..Default::default()
    }
}

fn rel(a: &CVector, b: &CVector) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn full_observation_reproduces_measurements() {
    let y = y_of(&radial4());
    let (v, i) = truth(&y, 1);
    let m = measure(&y, &v, &i, &["1", "2", "3", "4"], &[]);
    let est = estimate_phasor_state(&y, &m).unwrap();
    assert!(rel(&est.voltages, &v) < 1e-12);
    assert!(est.residual.percent < 1e-10);
    assert_eq!(est.rank, 12);
    assert!(rel(&est.currents, &i) < 1e-9);
}

#[test]
fn lone_voltage_on_two_buses_is_unobservable() {
    let g = CircuitGraph::new("p", vec![bus("1", true), bus("2", true)], vec![crate::test_support::rl_line("L", "1", "2", 1.0)])
        .unwrap();
    let y = y_of(&g);
    let (v, i) = truth(&y, 2);
    let m = measure(&y, &v, &i, &["1"], &[]);
    let report = observability_check(&y, &m).unwrap();
    assert!(!report.observable);
    assert_eq!((report.unknowns, report.rank), (6, 3));
    assert_eq!(report.nullspace.ncols(), 3);
    assert!(report.modes.iter().all(|s| s.contains("2.")));
    assert!(report.modes.iter().all(|s| !s.contains("1.")));
    match estimate_phasor_state(&y, &m) {
        Err(Error::Unobservable { unknowns: 6, rank: 3, modes }) => assert_eq!(modes.len(), 3),
        other => panic!("expected unobservable, got {other:?}"),
    }
}

#[test]
fn withheld_voltage_is_recovered() {
    let y = y_of(&radial4());
    let (v, i) = truth(&y, 3);
    let m = measure(&y, &v, &i, &["1", "2", "4"], &["2", "3", "4"]);
    let est = estimate_phasor_state(&y, &m).unwrap();
    let got = bus_slice(&y, &est.voltages, "3");
    assert!(rel(&got, &bus_slice(&y, &v, "3")) < 1e-9);
    assert!(est.residual.percent < 1e-7);
}

#[test]
fn siting_rule_on_meshed_network_is_observable() {
    let y = y_of(&meshed_rl());
    let (v, i) = truth(&y, 4);
    let all = ["1", "2", "3", "4"];
    let m = measure(&y, &v, &i, &all, &all);
    let r = observability_check(&y, &m).unwrap();
    assert!(r.observable && r.condition.is_finite());
    // Currents alone leave the common-mode voltage free in a shunt-free network.
    let m = measure(&y, &v, &i, &[], &all);
    let r = observability_check(&y, &m).unwrap();
    assert_eq!(r.rank, 9);
    assert_eq!(r.nullspace.ncols(), 3);
}

#[test]
fn zero_injection_rows_constrain_the_solution() {
    let y = y_of(&radial4());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut inj = BTreeMap::new();
    inj.insert("2".to_string(), CVector::zeros(3));
    for b in ["3", "4"] {
        inj.insert(b.into(), CVector::from_fn(3, |_, _| c(rng.random_range(-30.0..0.0), rng.random_range(-9.0..9.0))));
    }
    let (v, i) = forward_phasor_solve(&y, "1", &cvec(&balanced(2400.0)), &inj).unwrap();
    let mut m = measure(&y, &v, &i, &["1", "3", "4"], &["3", "4"]);
    m.zero_injection = BTreeSet::from(["2".to_string()]);
    let est = estimate_phasor_state(&y, &m).unwrap();
    assert!(rel(&est.voltages, &v) < 1e-9);
    // The synthetic zero rows are not reported as channels.
    assert!(est.channel_labels.iter().all(|l| !l.starts_with("I:2.")));
    assert_eq!(est.channel_labels.len(), 9 + 6);
}

#[test]
fn measurement_validation() {
    let y = y_of(&radial4());
    let (v, i) = truth(&y, 6);
    let mut m = measure(&y, &v, &i, &["1"], &["2"]);
    m.voltages.insert("X".into(), CVector::zeros(3));
    assert!(matches!(estimate_phasor_state(&y, &m), Err(Error::Integrity(_))));
    let mut m = measure(&y, &v, &i, &["1"], &["2"]);
    m.currents.insert("3".into(), CVector::zeros(2));
    assert!(matches!(estimate_phasor_state(&y, &m), Err(Error::Dimension(_))));
    let mut m = measure(&y, &v, &i, &["1"], &["2"]);
    m.voltage_weights.insert("1".into(), -1.0);
    assert!(matches!(estimate_phasor_state(&y, &m), Err(Error::InvalidParameter(_))));
}

/// Noisy measurements of every bus.
fn noisy_full(y: &NetworkAdmittance, seed: u64, sigma: f64) -> (MeasurementSet, CVector, CVector) {
    let (v, i) = truth(y, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    let mut noisy = |x: &CVector| {
        x.map(|z| z * (c(1.0, 0.0) + c(sigma * rng.random_range(-1.0..1.0), sigma * rng.random_range(-1.0..1.0))))
    };
    let (vn, in_) = (noisy(&v), noisy(&i));
    let buses = ["1", "2", "3", "4"];
    (measure(y, &vn, &in_, &buses, &buses[1..]), v, i)
}

#[test]
fn normal_equations_vanish_at_solution() {
    let y = y_of(&radial4());
    let (m, _, _) = noisy_full(&y, 7, 0.01);
    let est = estimate_phasor_state(&y, &m).unwrap();
    // Operator and data assembled directly in canonical order.
    let n = y.index.dim();
    let mut rows: Vec<(Vec<Complex64>, Complex64)> = Vec::new();
    for (b, val) in &m.voltages {
        for (k, idx) in y.index.range(b).unwrap().enumerate() {
            let mut row = vec![c(0.0, 0.0); n];
            row[idx] = c(1.0, 0.0);
            rows.push((row, val[k]));
        }
    }
    for (b, val) in &m.currents {
        for (k, idx) in y.index.range(b).unwrap().enumerate() {
            rows.push(((0..n).map(|j| y.y[(idx, j)]).collect(), val[k]));
        }
    }
    let a = CMatrix::from_fn(rows.len(), n, |r, j| rows[r].0[j]);
    let b = CVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let r = &b - &a * &est.voltages;
    let g = a.adjoint() * &r;
    let scale = (a.adjoint() * &b).norm();
    assert!(g.norm() <= 1e-8 * scale, "{} vs {}", g.norm(), scale);
    assert!((est.objective - r.norm_squared()).abs() <= 1e-9 * r.norm_squared().max(1e-30));
}

#[test]
fn uniform_weights_do_not_move_the_estimate() {
    let y = y_of(&radial4());
    let (mut m, _, _) = noisy_full(&y, 8, 0.01);
    let a = estimate_phasor_state(&y, &m).unwrap();
    for b in ["1", "2", "3", "4"] {
        m.voltage_weights.insert(b.into(), 4.0);
    }
    for b in ["2", "3", "4"] {
        m.current_weights.insert(b.into(), 4.0);
    }
    let b = estimate_phasor_state(&y, &m).unwrap();
    assert!(rel(&b.voltages, &a.voltages) < 1e-10);
    assert!((b.objective - 4.0 * a.objective).abs() < 1e-8 * b.objective);
}

#[test]
fn zero_current_channel_is_down_weighted() {
    let y = y_of(&radial4());
    let (v, i) = truth(&y, 9);
    let mut m = measure(&y, &v, &i, &["1", "2", "3", "4"], &["3"]);
    m.currents.get_mut("3").unwrap()[1] = c(0.0, 0.0);
    let est = estimate_phasor_state(&y, &m).unwrap();
    // With weight zero the bad reading cannot pull the voltages.
    assert!(rel(&est.voltages, &v) < 1e-12);
}

#[test]
fn relabelling_buses_permutes_the_estimate() {
    let (v_truth, est_a) = {
        let y = y_of(&radial4());
        let (m, v, _) = noisy_full(&y, 10, 0.01);
        (v, (estimate_phasor_state(&y, &m).unwrap(), m))
    };
    let _ = v_truth;
    let (est_a, m_a) = est_a;
    // Rename buses so that their sorted order reverses.
    let rename = |b: &str| format!("z{}", 9 - b.parse::<u32>().unwrap());
    let g = radial4();
    let buses: Vec<_> = g
        .buses()
        .map(|b| crate::circuit_model::Bus { id: rename(&b.id), ..b.clone() })
        .collect();
    let edges: Vec<_> = g
        .edges()
        .iter()
        .map(|e| crate::circuit_model::Edge {
            from_bus: rename(&e.from_bus),
            to_bus: rename(&e.to_bus),
            ..e.clone()
        })
        .collect();
    let g2 = CircuitGraph::new("renamed", buses, edges).unwrap();
    let y2 = y_of(&g2);
    let remap = |m: &BTreeMap<String, CVector>| m.iter().map(|(k, v)| (rename(k), v.clone())).collect();
    let m2 = MeasurementSet {
        voltages: remap(&m_a.voltages),
        currents: remap(&m_a.currents),
        ..Default::default()
    };
    let est_b = estimate_phasor_state(&y2, &m2).unwrap();
    let y = y_of(&radial4());
    for b in ["1", "2", "3", "4"] {
        let a = bus_slice(&y, &est_a.voltages, b);
        let r = y2.index.range(&rename(b)).unwrap();
        let bb = est_b.voltages.rows(r.start, r.len()).into_owned();
        assert!(rel(&bb, &a) < 1e-10, "bus {b}");
    }
    assert!((est_a.residual.percent - est_b.residual.percent).abs() < 1e-9);
}

#[test]
fn batch_residual_reports_both_averages() {
    let y = y_of(&radial4());
    let ests: Vec<_> = (0..5)
        .map(|s| {
            let (m, _, _) = noisy_full(&y, 20 + s, 0.01);
            estimate_phasor_state(&y, &m).unwrap()
        })
        .collect();
    let b = BatchResidual::from_estimates(&ests).unwrap();
    let mean = ests.iter().map(|e| e.residual.percent).sum::<f64>() / 5.0;
    assert!((b.per_time_mean - mean).abs() < 1e-12);
    assert!(b.pooled > 0.0 && b.time_points == 5);
    assert!(BatchResidual::from_estimates(&[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noise_free_recovery_is_exact(seed in 0u64..10_000, drop in 1usize..4) {
        let y = y_of(&radial4());
        let (v, i) = truth(&y, seed);
        let all = ["1", "2", "3", "4"];
        let vb: Vec<&str> = all.iter().copied().filter(|b| *b != all[drop]).collect();
        let m = measure(&y, &v, &i, &vb, &all[1..]);
        let est = estimate_phasor_state(&y, &m).unwrap();
        prop_assert!(rel(&est.voltages, &v) <= 1e-8);
    }

    #[test]
    fn extra_measurements_never_hurt(seed in 0u64..10_000, order in Just(()).prop_perturb(|_, mut rng| {
        let mut v = vec!["1", "2", "3", "4"];
        for k in (1..v.len()).rev() {
            v.swap(k, rng.random_range(0..=k));
        }
        v
    })) {
        let y = y_of(&meshed_rl());
        let (v, i) = truth(&y, seed);
        let mut prev = f64::INFINITY;
        for k in 0..=4 {
            let m = measure(&y, &v, &i, &order[..k], &["2"]);
            let (x, _) = min_norm_estimate(&y, &m).unwrap();
            let err = (&x - &v).norm();
            prop_assert!(err <= prev * (1.0 + 1e-9) + 1e-9 * v.norm());
            prev = err;
        }
        prop_assert!(prev <= 1e-8 * v.norm());
    }

    #[test]
    fn residual_is_non_negative(m in prop::collection::vec(-10.0f64..10.0, 1..30), p in prop::collection::vec(-10.0f64..10.0, 1..30)) {
        let n = m.len().min(p.len());
        let a = DMatrix::from_column_slice(n, 1, &m[..n]);
        let b = DMatrix::from_column_slice(n, 1, &p[..n]);
        prop_assert!(residual_metric(&a, &b).unwrap().percent >= 0.0);
    }
}

#[test]
fn partitioned_blocks_match_permuted_matrix() {
    let y = y_of(&radial4());
    let m = PartitionedModel::new(&y.y, &[6, 7, 8, 0], &[3, 9, 10]).unwrap();
    let pi = PartitionedModel::permutation_matrix(&m.p_i).map(|x| c(x, 0.0));
    let pv = PartitionedModel::permutation_matrix(&m.p_v).map(|x| c(x, 0.0));
    let full = &pi * &y.y * pv.transpose();
    let (ni, nv) = (4, 3);
    assert_eq!(full.view((0, 0), (ni, nv)), m.y11);
    assert_eq!(full.view((0, nv), (ni, 12 - nv)), m.y12);
    assert_eq!(full.view((ni, 0), (12 - ni, nv)), m.y21);
    assert_eq!(full.view((ni, nv), (12 - ni, 12 - nv)), m.y22);
    let x = CVector::from_fn(12, |i, _| c(i as f64, -(i as f64)));
    assert_eq!(m.unpermute(&(pv.map(|z| z) * &x)), x);
    assert!(PartitionedModel::new(&y.y, &[1, 1], &[]).is_err());
}

#[test]
fn residual_metric_examples() {
    let m = RMatrix::from_fn(50, 4, |i, j| ((i * 3 + j) as f64 * 0.37).sin() + 0.1);
    assert_eq!(residual_metric(&m, &m).unwrap().percent, 0.0);
    let r = residual_metric(&m, &(&m * 1.01)).unwrap();
    assert!((r.percent - 1.0).abs() < 1e-12);
    assert_eq!(r.channels, 4);
}

#[test]
fn residual_metric_matches_direct_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (rows, cols) = (40, 7);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-5.0..5.0)).collect();
    let pred: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-5.0..5.0)).collect();
    // Column-major: channel j occupies data[j*rows..(j+1)*rows].
    let mut total = 0.0;
    for j in 0..cols {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..rows {
            let (a, b) = (data[j * rows + i], pred[j * rows + i]);
            num += (a - b) * (a - b);
            den += a * a;
        }
        total += num.sqrt() / den.sqrt();
    }
    let expected = 100.0 * total / cols as f64;
    let got = residual_metric(
        &RMatrix::from_column_slice(rows, cols, &data),
        &RMatrix::from_column_slice(rows, cols, &pred),
    )
    .unwrap();
    assert!((got.percent - expected).abs() < 1e-10 * expected);
}

#[test]
fn residual_metric_skips_zero_channels() {
    let mut m = RMatrix::from_element(10, 3, 2.0);
    m.column_mut(1).fill(0.0);
    let p = &m * 1.02;
    let r = residual_metric(&m, &p).unwrap();
    assert_eq!(r.excluded, vec![1]);
    assert_eq!(r.channels, 2);
    assert!((r.percent - 2.0).abs() < 1e-12);
    assert!(residual_metric(&m, &RMatrix::zeros(10, 2)).is_err());
    let cm = CMatrix::from_element(4, 2, c(3.0, 4.0));
    let cp = cm.map(|z| z * c(1.0, 0.01));
    assert!((residual_metric(&cm, &cp).unwrap().percent - 1.0).abs() < 1e-12);
}

// Time domain.

struct TdCase {
    net: crate::network_matrix::TimeDomainNetwork,
    disc: crate::network_matrix::Discretized,
    i_l: RMatrix,
    v_b: RMatrix,
}

/// Trajectory generated by the discrete dynamics themselves.
fn discrete_case(samples: usize, seed: u64) -> TdCase {
    let g = meshed_rl();
    let net = build_time_domain(&g, &line_rl_map(&g).unwrap()).unwrap();
    let dt = 1.0 / 2500.0;
    let disc = zoh_discretize(&net, dt).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 2.0 * std::f64::consts::PI * 60.0;
    let amps: Vec<(f64, f64)> = (0..12).map(|_| (rng.random_range(90.0..110.0), rng.random_range(-0.3..0.3))).collect();
    let v_b = RMatrix::from_fn(12, samples, |r, k| {
        let (a, ph) = amps[r];
        a * (w * k as f64 * dt + ph - 2.0 * std::f64::consts::PI * (r % 3) as f64 / 3.0).cos()
    });
    let mut i_l = RMatrix::zeros(12, samples);
    i_l.set_column(0, &RVector::from_fn(12, |_, _| rng.random_range(-50.0..50.0)));
    for k in 0..samples - 1 {
        let next = &disc.a_d * i_l.column(k) + &disc.b_d * v_b.column(k);
        i_l.set_column(k + 1, &next);
    }
    TdCase { net, disc, i_l, v_b }
}

fn rows3(m: &RMatrix, block: usize) -> RMatrix {
    m.rows(3 * block, 3).into_owned()
}

fn td_measure(case: &TdCase, lines: &[usize], buses_i: &[usize], buses_v: &[usize]) -> TrajectoryMeasurements {
    let inc = &case.net.incidence;
    let i_b = case.net.injections_matrix(&case.i_l);
    TrajectoryMeasurements {
        dt: case.disc.dt,
        line_currents: lines.iter().map(|&e| (inc.edges[e].clone(), rows3(&case.i_l, e))).collect(),
        bus_currents: buses_i.iter().map(|&b| (inc.buses[b].clone(), rows3(&i_b, b))).collect(),
        bus_voltages: buses_v.iter().map(|&b| (inc.buses[b].clone(), rows3(&case.v_b, b))).collect(),
        ..Default::default()
    }
}

#[test]
fn discrete_trajectory_is_recovered_exactly() {
    let case = discrete_case(200, 1);
    let m = td_measure(&case, &[0, 1, 2, 3], &[0, 1, 2, 3], &[0, 1, 2, 3]);
    let est = estimate_time_domain_state(&case.net, &case.disc, &m).unwrap();
    let t = est.v_b.ncols();
    assert_eq!(t, 199);
    assert!((&est.i_l - &case.i_l).amax() <= 1e-8 * case.i_l.amax());
    assert!((&est.v_b - case.v_b.columns(0, t)).amax() <= 1e-8 * case.v_b.amax());
    assert!(est.residual.percent < 1e-7);
}

#[test]
fn withheld_signals_are_recovered() {
    let case = discrete_case(300, 2);
    // Bus "3" (index 2) voltage and line L23 (index 1) current withheld.
    let m = td_measure(&case, &[0, 2, 3], &[0, 1, 2, 3], &[0, 1, 3]);
    let est = estimate_time_domain_state(&case.net, &case.disc, &m).unwrap();
    let t = est.v_b.ncols();
    let v3 = rows3(&case.v_b, 2).columns(0, t).into_owned();
    let got = rows3(&est.v_b, 2);
    assert!((&got - &v3).norm() <= 1e-8 * v3.norm());
    let l23 = rows3(&case.i_l, 1);
    assert!((rows3(&est.i_l, 1) - &l23).norm() <= 1e-8 * l23.norm());
    assert_eq!(&est.line_labels[3..6], ["L23.a", "L23.b", "L23.c"]);
}

#[test]
fn kcl_holds_exactly() {
    let mut case = discrete_case(120, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    case.i_l.iter_mut().for_each(|x| *x *= 1.0 + 0.01 * rng.random_range(-1.0..1.0));
    let m = td_measure(&case, &[0, 1, 2, 3], &[0, 1, 2, 3], &[0, 1, 2, 3]);
    let est = estimate_time_domain_state(&case.net, &case.disc, &m).unwrap();
    assert_eq!(est.i_b, case.net.injections_matrix(&est.i_l));
}

#[test]
fn optimality_conditions_hold_under_noise() {
    let case = discrete_case(150, 5);
    let mut m = td_measure(&case, &[0, 1, 2, 3], &[1, 2, 3], &[0, 1, 2, 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for map in [&mut m.line_currents, &mut m.bus_currents, &mut m.bus_voltages] {
        for x in map.values_mut() {
            x.iter_mut().for_each(|v| *v *= 1.0 + 0.005 * rng.random_range(-1.7..1.7));
        }
    }
    m.voltage_weights.insert("2".into(), 3.0);
    let p = TrajectoryProblem::new(&case.net, &case.disc, &m).unwrap();
    let est = p.solve().unwrap();
    let x0 = est.i_l.column(0).into_owned();
    let (g0, gu) = p.gradient(&x0, &est.v_b);
    let zero_u = RMatrix::zeros(est.v_b.nrows(), est.v_b.ncols());
    let (s0, su) = p.gradient(&RVector::zeros(12), &zero_u);
    let scale = (s0.norm_squared() + su.norm_squared()).sqrt();
    let kkt = (g0.norm_squared() + gu.norm_squared()).sqrt();
    assert!(kkt <= 1e-8 * scale, "gradient {kkt} vs {scale}");
    assert!((p.objective(&x0, &est.v_b) - est.objective).abs() <= 1e-8 * est.objective);
    // The constraint is honoured: the trajectory is the propagation.
    assert!((p.propagate(&x0, &est.v_b) - &est.i_l).amax() <= 1e-9 * est.i_l.amax());
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let case = discrete_case(20, 7);
    let m = td_measure(&case, &[0, 3], &[1, 2], &[0, 2]);
    let p = TrajectoryProblem::new(&case.net, &case.disc, &m).unwrap();
    let x0 = RVector::from_fn(12, |i, _| i as f64 - 4.0);
    let u = RMatrix::from_fn(12, 19, |i, k| ((i + 2 * k) as f64).cos() * 50.0);
    let (g0, gu) = p.gradient(&x0, &u);
    let h = 1e-4;
    for i in [0, 5, 11] {
        let mut xp = x0.clone();
        xp[i] += h;
        let mut xm = x0.clone();
        xm[i] -= h;
        let fd = (p.objective(&xp, &u) - p.objective(&xm, &u)) / (2.0 * h);
        assert!((fd - g0[i]).abs() <= 1e-5 * g0.amax().max(1.0), "x0[{i}]");
    }
    for (i, k) in [(0, 0), (7, 10), (11, 18)] {
        let mut up = u.clone();
        up[(i, k)] += h;
        let mut um = u.clone();
        um[(i, k)] -= h;
        let fd = (p.objective(&x0, &up) - p.objective(&x0, &um)) / (2.0 * h);
        assert!((fd - gu[(i, k)]).abs() <= 1e-5 * gu.amax().max(1.0), "u[{i},{k}]");
    }
}

#[test]
fn currents_alone_leave_voltages_unobservable() {
    let case = discrete_case(40, 8);
    let m = td_measure(&case, &[0, 1, 2, 3], &[0, 1, 2, 3], &[]);
    match estimate_time_domain_state(&case.net, &case.disc, &m) {
        Err(Error::Unobservable { modes, .. }) => {
            assert!(!modes.is_empty());
            assert!(modes.iter().all(|s| s.contains("bus voltage")), "{modes:?}");
        }
        other => panic!("expected unobservable, got {other:?}"),
    }
}

#[test]
fn trajectory_inputs_are_validated() {
    let case = discrete_case(30, 9);
    let mut m = td_measure(&case, &[0], &[1], &[0, 1, 2, 3]);
    m.dt *= 2.0;
    assert!(matches!(
        estimate_time_domain_state(&case.net, &case.disc, &m),
        Err(Error::InvalidParameter(_))
    ));
    let mut m = td_measure(&case, &[0], &[1], &[0, 1, 2, 3]);
    m.bus_voltages.insert("1".into(), RMatrix::zeros(3, 29));
    assert!(estimate_time_domain_state(&case.net, &case.disc, &m).is_err());
    let mut m = td_measure(&case, &[0], &[1], &[0, 1, 2, 3]);
    m.line_currents.insert("nope".into(), RMatrix::zeros(3, 30));
    assert!(estimate_time_domain_state(&case.net, &case.disc, &m).is_err());
}

// Measurement specs.

fn truth_table(y: &NetworkAdmittance, v: &CVector, i: &CVector) -> crate::waveform::PhasorTable {
    let mut channels = Vec::new();
    let mut vals = Vec::new();
    for (q, x) in [('V', v), ('I', i)] {
        for (k, (b, p)) in y.index.labels().into_iter().enumerate() {
            channels.push(format!("{b}.{q}{}", p.label()));
            vals.push(x[k]);
        }
    }
    crate::waveform::PhasorTable {
        times: vec![0.0],
        channels,
        values: CMatrix::from_row_slice(1, vals.len(), &vals),
    }
}

#[test]
fn spec_reads_table_rows() {
    let g = radial4();
    let y = y_of(&g);
    let (v, i) = truth(&y, 31);
    let table = truth_table(&y, &v, &i);
    let spec = MeasurementSpec::from_json(
        r#"{"voltage_buses": ["1", "2", "4"], "current_buses": ["1", "4"],
            "zero_injection_buses": [], "weights": {"current": {"4": 3.0}}}"#,
    )
    .unwrap();
    let m = spec.phasor_measurements(&y.index, &table, 0).unwrap();
    assert_eq!(m.voltages["2"], bus_slice(&y, &v, "2"));
    assert_eq!(m.currents["4"], bus_slice(&y, &i, "4"));
    assert!(!m.voltages.contains_key("3"));
    assert_eq!(m.current_weights["4"], 3.0);
    let est = estimate_phasor_state(&y, &m).unwrap();
    assert!(rel(&est.voltages, &v) < 1e-9);
}

#[test]
fn spec_rejects_missing_channels_and_unknown_fields() {
    let g = radial4();
    let y = y_of(&g);
    let (v, i) = truth(&y, 32);
    let mut table = truth_table(&y, &v, &i);
    let j = table.channel_index("3.Vb").unwrap();
    table.values[(0, j)] = c(f64::NAN, 0.0);
    let spec = MeasurementSpec {
        voltage_buses: vec!["3".into()],
        ..Default::default()
    };
    assert!(matches!(spec.phasor_measurements(&y.index, &table, 0), Err(Error::Integrity(_))));
    let spec = MeasurementSpec {
        voltage_buses: vec!["9".into()],
        ..Default::default()
    };
    assert!(matches!(spec.phasor_measurements(&y.index, &table, 0), Err(Error::Integrity(_))));
    assert!(MeasurementSpec::from_json(r#"{"voltage_bus": ["1"]}"#).is_err());
}

#[test]
fn siting_rule_spec_partitions_buses() {
    let mut g = radial4();
    let mut buses: Vec<_> = g.buses().cloned().collect();
    buses[1].is_injection = false;
    buses[2].is_injection = false;
    g = CircuitGraph::new("r", buses, g.edges().to_vec()).unwrap();
    let s = MeasurementSpec::siting_rule(&g);
    assert_eq!(s.voltage_buses, vec!["1", "4"]);
    assert_eq!(s.current_buses, vec!["1", "4"]);
    assert_eq!(s.zero_injection_buses, vec!["2", "3"]);
}

#[test]
fn spec_builds_trajectory_blocks_from_segments() {
    let case = discrete_case(50, 7);
    let inc = &case.net.incidence;
    let i_b = case.net.injections_matrix(&case.i_l);
    let t: Vec<f64> = (0..50).map(|k| k as f64 * case.disc.dt).collect();
    let seg = |id: &str, q: char, block: RMatrix| {
        let chans = ['a', 'b', 'c'].iter().map(|p| format!("{id}.{q}{p}")).collect();
        crate::waveform::WaveformSegment::new(format!("s{id}{q}"), chans, t.clone(), block.transpose()).unwrap()
    };
    let mut segs = Vec::new();
    for (b, name) in inc.buses.iter().enumerate() {
        segs.push(seg(name, 'V', rows3(&case.v_b, b)));
        segs.push(seg(name, 'I', rows3(&i_b, b)));
    }
    for (e, name) in inc.edges.iter().enumerate() {
        segs.push(seg(name, 'I', rows3(&case.i_l, e)));
    }
    let spec = MeasurementSpec {
        voltage_buses: inc.buses.clone(),
        current_buses: inc.buses.clone(),
        line_currents: vec![inc.edges[0].clone()],
        ..Default::default()
    };
    let m = spec.trajectory_measurements(&segs, case.disc.dt).unwrap();
    let all: Vec<usize> = (0..inc.buses.len()).collect();
    let want = td_measure(&case, &[0], &all, &all);
    assert_eq!(m.bus_voltages, want.bus_voltages);
    assert_eq!(m.bus_currents, want.bus_currents);
    assert_eq!(m.line_currents, want.line_currents);

    let short = vec![segs[0].truncated(40), segs[1].clone()];
    assert!(spec.trajectory_measurements(&short, case.disc.dt).is_err());
    let dup = vec![segs[0].clone(), segs[0].clone()];
    assert!(matches!(spec.trajectory_measurements(&dup, case.disc.dt), Err(Error::Integrity(_))));
}
