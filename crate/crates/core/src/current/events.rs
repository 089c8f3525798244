use std::collections::BTreeMap;

use super::{bits, check_size, check_subset, check_vertex, endpoint_mask, Caps, SourceSet, SubsetTables};
use crate::coupling_graph::CouplingGraph;
use crate::error::{Error, Result};

/// One independent current layer: its bond set and source set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub bonds: u64,
    pub sources: SourceSet,
}

/// Connectivity events on the positive bonds of a (superposed) current.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// `u = v` or a positive path joins them.
    Conn(usize, usize),
    /// `u = v` or two bond-disjoint positive paths join them.
    DoubleConn(usize, usize),
    /// Double connection where every positive path from `u` to `v` meets the
    /// vertex mask `a` (endpoints count as visited).
    ThroughA { u: usize, v: usize, a: u64 },
    All(Vec<Event>),
}

impl Event {
    fn vertices(&self, out: &mut Vec<usize>) {
        match self {
            Event::Conn(u, v) | Event::DoubleConn(u, v) | Event::ThroughA { u, v, .. } => out.extend([*u, *v]),
            Event::All(es) => es.iter().for_each(|e| e.vertices(out)),
        }
    }

    pub fn holds(&self, g: &CouplingGraph, pos: u64) -> bool {
        match self {
            Event::Conn(u, v) => connected(g, pos, *u, *v),
            Event::DoubleConn(u, v) => double_connected(g, pos, *u, *v),
            Event::ThroughA { u, v, a } => through_set(g, pos, *u, *v, *a),
            Event::All(es) => es.iter().all(|e| e.holds(g, pos)),
        }
    }
}

/// Event plus the operative bond set that positive paths may use.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSpec {
    pub event: Event,
    pub operative: Option<u64>,
}

impl EventSpec {
    pub fn new(event: Event) -> Self {
        EventSpec { event, operative: None }
    }

    pub fn within(event: Event, bonds: u64) -> Self {
        EventSpec { event, operative: Some(bonds) }
    }

    pub fn holds(&self, g: &CouplingGraph, pos: u64) -> bool {
        self.event.holds(g, pos & self.operative.unwrap_or(u64::MAX))
    }
}

/// Vertices reachable from `u` through bonds of `pos`.
pub fn cluster_of(g: &CouplingGraph, pos: u64, u: usize) -> u64 {
    let mut reach = 1u64 << u;
    loop {
        let mut next = reach;
        for b in bits(pos) {
            let e = endpoint_mask(g, b);
            if e & next != 0 {
                next |= e;
            }
        }
        if next == reach {
            return reach;
        }
        reach = next;
    }
}

pub fn connected(g: &CouplingGraph, pos: u64, u: usize, v: usize) -> bool {
    u == v || cluster_of(g, pos, u) >> v & 1 == 1
}

/// Two bond-disjoint paths exist iff `u, v` are connected and no single bond
/// separates them.
pub fn double_connected(g: &CouplingGraph, pos: u64, u: usize, v: usize) -> bool {
    if u == v {
        return true;
    }
    let comp = cluster_of(g, pos, u);
    if comp >> v & 1 == 0 {
        return false;
    }
    bits(pos)
        .filter(|&b| endpoint_mask(g, b) & comp != 0)
        .all(|b| connected(g, pos & !(1u64 << b), u, v))
}

pub fn through_set(g: &CouplingGraph, pos: u64, u: usize, v: usize, a: u64) -> bool {
    if !double_connected(g, pos, u, v) {
        return false;
    }
    if (a >> u & 1 == 1) || (a >> v & 1 == 1) {
        return true;
    }
    let avoiding = bits(pos).filter(|&b| endpoint_mask(g, b) & a == 0).fold(0u64, |m, b| m | (1 << b));
    !connected(g, avoiding, u, v)
}

/// Normalized law of the positive-bond mask of a current (or superposition).
#[derive(Debug, Clone, PartialEq)]
pub struct PosDistribution {
    entries: Vec<(u64, f64)>,
}

impl PosDistribution {
    /// Law of the positive bonds of one layer, weights divided by `Z` of the
    /// layer's bond set. A layer whose sources cannot be realized has empty law.
    pub fn layer(g: &CouplingGraph, layer: &Layer) -> Self {
        Self::layer_with_z(g, layer).0
    }

    /// `layer` together with the sourceless partition function of the bond set.
    pub fn layer_with_z(g: &CouplingGraph, layer: &Layer) -> (Self, f64) {
        let t = SubsetTables::new(g, layer.bonds);
        let k = t.len();
        let size = 1usize << k;
        let full = size - 1;
        let mut dist = vec![0.0; size];
        let mut z = 0.0;
        for odd in 0..size {
            let bd = t.boundary[odd];
            if bd != layer.sources.0 && bd != 0 {
                continue;
            }
            let rest = full & !odd;
            let mut even = rest;
            loop {
                let w = t.odd_weight[odd] * t.even_weight[even];
                if bd == 0 {
                    z += w;
                }
                if bd == layer.sources.0 {
                    dist[odd | even] += w;
                }
                if even == 0 {
                    break;
                }
                even = (even - 1) & rest;
            }
        }
        let entries = dist
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(sub, &w)| (t.deposit(sub), w / z))
            .collect();
        (PosDistribution { entries }, z)
    }

    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn measure(&self, g: &CouplingGraph, spec: &EventSpec) -> f64 {
        self.entries.iter().filter(|(p, _)| spec.holds(g, *p)).map(|(_, w)| w).sum()
    }

    /// `Σ w · f(pos)`.
    pub fn integrate(&self, mut f: impl FnMut(u64) -> f64) -> f64 {
        self.entries.iter().map(|&(p, w)| w * f(p)).sum()
    }
}

/// Independent superposition: positive iff positive in some layer.
pub fn superpose(dists: &[PosDistribution]) -> PosDistribution {
    let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
    acc.insert(0, 1.0);
    for d in dists {
        let mut next: BTreeMap<u64, f64> = BTreeMap::new();
        for (&p, &w) in &acc {
            for &(q, v) in &d.entries {
                *next.entry(p | q).or_insert(0.0) += w * v;
            }
        }
        acc = next;
    }
    PosDistribution { entries: acc.into_iter().filter(|e| e.1 != 0.0).collect() }
}

/// `Σ Π_layers (w/Z) · 1{event on the superposition}`.
pub fn event_measure(g: &CouplingGraph, layers: &[Layer], spec: &EventSpec, caps: &Caps) -> Result<f64> {
    if layers.is_empty() {
        return Err(Error::InvalidParameters("no current layers".into()));
    }
    let total: u64 = layers.iter().map(|l| l.bonds.count_ones() as u64).sum();
    let cap = if layers.len() == 1 { caps.single } else { caps.multi };
    if total as usize > cap {
        return Err(Error::CapExceeded { bonds: total as usize, cap });
    }
    for l in layers {
        check_size(g, l.bonds, cap)?;
        check_subset(g, l.bonds)?;
        if l.sources.0.count_ones() % 2 == 1 {
            return Err(Error::OddSourceSet);
        }
        if l.sources.0 >> g.num_vertices() != 0 {
            return Err(Error::UnknownVertex("source outside the graph".into()));
        }
    }
    let mut vs = Vec::new();
    spec.event.vertices(&mut vs);
    for v in vs {
        check_vertex(g, v)?;
    }
    let dists: Vec<PosDistribution> = layers.iter().map(|l| PosDistribution::layer(g, l)).collect();
    Ok(superpose(&dists).measure(g, spec))
}
