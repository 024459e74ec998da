use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use petgraph::unionfind::UnionFind;

use super::{Bus, CircuitGraph, Edge, EdgeKind};
use crate::error::{Error, Result};

enum Fate {
    Keep,
    Contract,
    Delete,
}

fn fate(edge: &Edge, at: DateTime<Utc>) -> Result<Fate> {
    if let EdgeKind::Switch(_) = edge.kind {
        return Ok(if edge.is_zero_impedance(at)? {
            Fate::Contract
        } else {
            Fate::Delete
        });
    }
    Ok(if edge.is_zero_impedance(at)? {
        Fate::Contract
    } else {
        Fate::Keep
    })
}

pub(super) fn reduce(g: &CircuitGraph, at: DateTime<Utc>) -> Result<CircuitGraph> {
    let ids: Vec<&String> = g.buses.keys().collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    let mut uf = UnionFind::<usize>::new(ids.len());
    let mut kept = Vec::new();
    for edge in &g.edges {
        match fate(edge, at)? {
            Fate::Keep => kept.push(edge),
            Fate::Delete => {}
            Fate::Contract => {
                let (from, to) = (&g.buses[&edge.from_bus], &g.buses[&edge.to_bus]);
                if from.phases != to.phases {
                    return Err(Error::PhaseMismatch {
                        edge: edge.id.clone(),
                        message: format!(
                            "cannot merge bus {} ({}) with bus {} ({})",
                            from.id, from.phases, to.id, to.phases
                        ),
                    });
                }
                uf.union(index[edge.from_bus.as_str()], index[edge.to_bus.as_str()]);
            }
        }
    }

    // Ids are visited in sorted order, so the first member seen of each set
    // is its lexicographically smallest id.
    let mut survivor_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let survivor: Vec<usize> = (0..ids.len())
        .map(|i| *survivor_of_root.entry(uf.find(i)).or_insert(i))
        .collect();

    let mut buses: BTreeMap<String, Bus> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let bus = &g.buses[*id];
        let target = ids[survivor[i]];
        buses
            .entry(target.clone())
            .and_modify(|b| {
                b.phases = b.phases.union(bus.phases);
                b.is_injection |= bus.is_injection;
            })
            .or_insert_with(|| Bus {
                id: target.clone(),
                ..bus.clone()
            });
    }

    let resolve = |id: &str| ids[survivor[index[id]]].clone();
    let mut merge_map: BTreeMap<String, String> = g
        .merge_map
        .iter()
        .map(|(orig, mid)| (orig.clone(), resolve(mid)))
        .collect();
    for (i, id) in ids.iter().enumerate() {
        if survivor[i] != i {
            merge_map.insert((*id).clone(), ids[survivor[i]].clone());
        }
    }

    let mut edges = Vec::with_capacity(kept.len());
    for edge in kept {
        let from_bus = resolve(&edge.from_bus);
        let to_bus = resolve(&edge.to_bus);
        if from_bus == to_bus {
            log::warn!(
                "{} {} is shorted by zero-impedance elements at bus {from_bus}; dropped",
                edge.kind.name(),
                edge.id
            );
            continue;
        }
        edges.push(Edge {
            from_bus,
            to_bus,
            ..edge.clone()
        });
    }

    Ok(CircuitGraph {
        name: g.name.clone(),
        frequency: g.frequency,
        earth_resistivity: g.earth_resistivity,
        buses,
        edges,
        merge_map,
        reduced_at: g.reduced_at.or(Some(at)),
    })
}

/// Connected components over all edges currently in the graph.
pub fn connected_components(g: &CircuitGraph) -> Vec<Vec<String>> {
    let ids: Vec<&String> = g.buses.keys().collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut uf = UnionFind::<usize>::new(ids.len());
    for e in &g.edges {
        uf.union(index[e.from_bus.as_str()], index[e.to_bus.as_str()]);
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut first: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let key = *first.entry(uf.find(i)).or_insert(i);
        groups.entry(key).or_default().push((*id).clone());
    }
    groups.into_values().collect()
}
