//! Earliest odd paths, explored bond sets, laces and the exact decomposition
//! of the double-connection coefficient.

use std::collections::BTreeMap;

use crate::coupling_graph::CouplingGraph;
use crate::current::{
    bits, boundary, check_size, double_connected, full_bond_mask, pi0, Caps, Layer, PosDistribution,
    SourceSet,
};
use crate::error::{Error, Result};

/// A trail from `o` to `x` with its explored bond layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EarliestPath {
    pub vertices: Vec<usize>,
    pub bonds: Vec<usize>,
    /// `layers[j-1]` is the explored layer of step `j`.
    pub layers: Vec<u64>,
}

impl EarliestPath {
    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    pub fn path_mask(&self) -> u64 {
        self.bonds.iter().fold(0, |m, &b| m | (1 << b))
    }

    pub fn explored(&self) -> u64 {
        self.layers.iter().fold(0, |m, &l| m | l)
    }

    /// No path bond is explored before the step that traverses it.
    pub fn is_admissible(&self) -> bool {
        let mut seen = 0u64;
        for (j, &b) in self.bonds.iter().enumerate() {
            if seen >> b & 1 == 1 {
                return false;
            }
            seen |= self.layers[j];
        }
        true
    }

    /// Literal indicator: odd on path bonds, even on the rest of the explored set.
    pub fn literal_flag(&self, odd: u64) -> bool {
        let p = self.path_mask();
        p & !odd == 0 && (self.explored() & !p) & odd == 0
    }

    /// Indicator used for the decomposition: the literal one on admissible trails.
    pub fn flag(&self, odd: u64) -> bool {
        self.is_admissible() && self.literal_flag(odd)
    }
}

fn rank_at(g: &CouplingGraph, b: usize) -> usize {
    g.rank(b)
}

/// Explored layers for a trail: at step `j`, the bonds at `ω_{j-1}` not yet
/// explored whose rank does not exceed the traversed bond.
pub fn explored_layers(g: &CouplingGraph, vertices: &[usize], bonds: &[usize]) -> Vec<u64> {
    let mut explored = 0u64;
    let mut layers = Vec::with_capacity(bonds.len());
    for (j, &b) in bonds.iter().enumerate() {
        let u = vertices[j];
        let r = rank_at(g, b);
        let layer = g
            .incident(u)
            .iter()
            .filter(|&&c| explored >> c & 1 == 0 && rank_at(g, c) <= r)
            .fold(0u64, |m, &c| m | (1 << c));
        explored |= layer;
        layers.push(layer);
    }
    layers
}

/// Trails from `o` to `x`: length at least one, no repeated bond, `x` only at the end.
pub fn enumerate_trails(g: &CouplingGraph, o: usize, x: usize) -> Result<Vec<EarliestPath>> {
    if o == x {
        return Err(Error::Diagonal);
    }
    check_size(g, full_bond_mask(g), 64)?;
    let mut out = Vec::new();
    let mut vs = vec![o];
    let mut bs = Vec::new();
    fn dfs(g: &CouplingGraph, x: usize, used: u64, vs: &mut Vec<usize>, bs: &mut Vec<usize>, out: &mut Vec<EarliestPath>) {
        let u = *vs.last().expect("trail has a start");
        let mut inc: Vec<usize> = g.incident(u).to_vec();
        inc.sort_by_key(|&b| g.rank(b));
        for b in inc {
            if used >> b & 1 == 1 {
                continue;
            }
            let v = g.bond(b).other(u);
            vs.push(v);
            bs.push(b);
            if v == x {
                let layers = explored_layers(g, vs, bs);
                out.push(EarliestPath { vertices: vs.clone(), bonds: bs.clone(), layers });
            } else {
                dfs(g, x, used | (1 << b), vs, bs, out);
            }
            vs.pop();
            bs.pop();
        }
    }
    dfs(g, x, 0, &mut vs, &mut bs, &mut out);
    Ok(out)
}

/// Greedy earliest odd path for an odd bond set with boundary `{o, x}`.
pub fn earliest_odd_path(g: &CouplingGraph, odd: u64, o: usize, x: usize) -> Result<EarliestPath> {
    if o == x {
        return Err(Error::Diagonal);
    }
    if boundary(g, odd) != SourceSet::pair(o, x).mask() {
        return Err(Error::ParityPattern("odd bonds do not have sources {o, x}".into()));
    }
    let mut explored = 0u64;
    let mut u = o;
    let mut path = EarliestPath { vertices: vec![o], bonds: Vec::new(), layers: Vec::new() };
    while u != x {
        let mut inc: Vec<usize> = g.incident(u).iter().copied().filter(|&b| explored >> b & 1 == 0).collect();
        inc.sort_by_key(|&b| g.rank(b));
        let mut layer = 0u64;
        let mut chosen = None;
        for b in inc {
            layer |= 1 << b;
            if odd >> b & 1 == 1 {
                chosen = Some(b);
                break;
            }
        }
        let b = chosen.ok_or_else(|| Error::Internal("no unexplored odd bond at the current vertex".into()))?;
        explored |= layer;
        u = g.bond(b).other(u);
        path.vertices.push(u);
        path.bonds.push(b);
        path.layers.push(layer);
    }
    Ok(path)
}

/// Lace edges `(s_j, t_j)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Lace {
    pub edges: Vec<(usize, usize)>,
}

impl Lace {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Membership in the set of `N`-edge laces on `[0, len]`.
    pub fn is_valid(&self, len: usize) -> bool {
        let e = &self.edges;
        let n = e.len();
        if n == 0 || e[0].0 != 0 || e[n - 1].1 != len {
            return false;
        }
        if e.iter().any(|&(s, t)| s >= t) {
            return false;
        }
        if n == 1 {
            return true;
        }
        if !(e[0].0 < e[1].0 && e[1].0 <= e[0].1 && e[0].1 < e[1].1) {
            return false;
        }
        for i in 2..n {
            let (s_prev, t_prev) = e[i - 1];
            let t_prev2 = e[i - 2].1;
            let (s, t) = e[i];
            if !(s_prev <= t_prev2 && t_prev2 < s && s <= t_prev && t_prev < t) {
                return false;
            }
        }
        true
    }
}

/// `Ṽ(j)` for `j = 0..=|ω|`: `ω_j` plus the far ends of positive-even bonds of
/// the layer explored from `ω_j`; `Ṽ(|ω|) = {x}`.
pub fn tilde_v(g: &CouplingGraph, path: &EarliestPath, m_even: u64) -> Vec<u64> {
    let len = path.len();
    let mut out = Vec::with_capacity(len + 1);
    for j in 0..len {
        let w = path.vertices[j];
        let mut set = 1u64 << w;
        for b in bits(path.layers[j] & m_even) {
            set |= 1 << g.bond(b).other(w);
        }
        out.push(set);
    }
    out.push(1u64 << path.vertices[len]);
    out
}

/// Union of the positive clusters of the vertices in `set`.
fn cluster_hull(g: &CouplingGraph, k_pos: u64, set: u64) -> u64 {
    bits(set).fold(0u64, |m, v| m | crate::current::cluster_of(g, k_pos, v))
}

/// Lace from the max/min recursion; `None` when the recursion stalls before
/// reaching `|ω|`, which happens exactly when `o` and `x` are not doubly connected.
pub fn build_lace(g: &CouplingGraph, path: &EarliestPath, m_even: u64, k_pos: u64) -> Result<Option<Lace>> {
    let explored = path.explored();
    let p = path.path_mask();
    if m_even & !(explored & !p) != 0 {
        return Err(Error::ParityPattern("restricted current is positive-even outside the explored set".into()));
    }
    if k_pos & explored != 0 {
        return Err(Error::ParityPattern("outer current is positive on explored bonds".into()));
    }
    let v = tilde_v(g, path, m_even);
    let hulls: Vec<u64> = v.iter().map(|&s| cluster_hull(g, k_pos, s)).collect();
    let len = path.len();
    let linked = |i: usize, j: usize| hulls[i] & v[j] != 0;
    let mut edges = Vec::new();
    let t1 = (0..=len).rev().find(|&j| linked(0, j)).expect("Ṽ(0) is linked to itself");
    if t1 == 0 {
        return Ok(None);
    }
    edges.push((0, t1));
    let mut t = t1;
    while t < len {
        let next = (0..=len).rev().find(|&j| (0..=t).any(|i| linked(i, j))).expect("linked to itself");
        if next <= t {
            return Ok(None);
        }
        let s = (0..=len).find(|&i| linked(i, next)).expect("linked to itself");
        edges.push((s, next));
        t = next;
    }
    Ok(Some(Lace { edges }))
}

/// For every lace edge, the outer clusters that join `Ṽ(s_j)` to `Ṽ(t_j)`;
/// distinct edges must use disjoint clusters.
pub fn lace_witness_clusters(g: &CouplingGraph, path: &EarliestPath, m_even: u64, k_pos: u64, lace: &Lace) -> Vec<u64> {
    let v = tilde_v(g, path, m_even);
    lace.edges
        .iter()
        .map(|&(s, t)| {
            bits(v[s]).fold(0u64, |m, u| {
                let c = crate::current::cluster_of(g, k_pos, u);
                if c & v[t] != 0 {
                    m | c
                } else {
                    m
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub o: usize,
    pub x: usize,
    pub pi0_direct: f64,
    /// Sum over trails of the split weights with the double-connection indicator.
    pub pi0_split: f64,
    /// Sum over trails and laces.
    pub pi0_reconstructed: f64,
    /// `N → (weight, count)`.
    pub histogram: BTreeMap<usize, (f64, usize)>,
    pub trails: usize,
    pub admissible_trails: usize,
    /// Configurations where lace existence and double connection disagree.
    pub mismatches: usize,
    /// Built laces failing the membership validator or the disjoint-cluster property.
    pub invalid_laces: usize,
}

impl DecompositionReport {
    pub fn relative_error(&self) -> f64 {
        rel(self.pi0_direct, self.pi0_reconstructed).max(rel(self.pi0_direct, self.pi0_split))
    }

    pub fn holds(&self, rtol: f64) -> bool {
        self.relative_error() <= rtol && self.mismatches == 0 && self.invalid_laces == 0
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Rebuilds the double-connection coefficient from trails, restricted currents
/// on explored sets, outer currents and laces.
pub fn verify_pi0_decomposition(g: &CouplingGraph, o: usize, x: usize, caps: &Caps) -> Result<DecompositionReport> {
    let full = full_bond_mask(g);
    check_size(g, full, caps.single)?;
    let pi0_direct = pi0(g, o, x, caps)?;
    let (_, z) = PosDistribution::layer_with_z(g, &Layer { bonds: full, sources: SourceSet::empty() });
    let trails = enumerate_trails(g, o, x)?;
    let mut report = DecompositionReport {
        o,
        x,
        pi0_direct,
        pi0_split: 0.0,
        pi0_reconstructed: 0.0,
        histogram: BTreeMap::new(),
        trails: trails.len(),
        admissible_trails: 0,
        mismatches: 0,
        invalid_laces: 0,
    };
    let weights: Vec<(f64, f64)> = (0..g.num_bonds())
        .map(|b| {
            let (s, cm1, _) = crate::current::bond_weights(g, b);
            (s, cm1)
        })
        .collect();
    for path in trails.iter().filter(|p| p.is_admissible()) {
        report.admissible_trails += 1;
        let explored = path.explored();
        let pm = path.path_mask();
        let free = explored & !pm;
        let w_path: f64 = bits(pm).map(|b| weights[b].0).product();
        let (outer, z_outer) =
            PosDistribution::layer_with_z(g, &Layer { bonds: full & !explored, sources: SourceSet::empty() });
        let mut even = free;
        loop {
            let w_m = w_path * bits(even).map(|b| weights[b].1).product::<f64>();
            for &(k_pos, w_k) in outer.entries() {
                let w = w_m * w_k * z_outer / z;
                let dc = double_connected(g, pm | even | k_pos, o, x);
                if dc {
                    report.pi0_split += w;
                }
                match build_lace(g, path, even, k_pos)? {
                    Some(lace) => {
                        if !dc {
                            report.mismatches += 1;
                        }
                        let witnesses = lace_witness_clusters(g, path, even, k_pos, &lace);
                        let disjoint = witnesses
                            .iter()
                            .enumerate()
                            .all(|(i, a)| witnesses[i + 1..].iter().all(|b| a & b == 0));
                        if !lace.is_valid(path.len()) || !disjoint {
                            report.invalid_laces += 1;
                        }
                        report.pi0_reconstructed += w;
                        let e = report.histogram.entry(lace.num_edges()).or_insert((0.0, 0));
                        e.0 += w;
                        e.1 += 1;
                    }
                    None => {
                        if dc {
                            report.mismatches += 1;
                        }
                    }
                }
            }
            if even == 0 {
                break;
            }
            even = (even - 1) & free;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionReport {
    pub odd_sets: usize,
    /// Odd sets where the refined indicator does not flag exactly the greedy trail.
    pub failures: usize,
    /// Odd sets where the literal indicator flags a number of trails other than one.
    pub literal_failures: usize,
}

/// Checks, for every odd set with boundary `{o, x}`, that exactly one trail is
/// flagged and that it is the greedy earliest path.
pub fn partition_of_unity(g: &CouplingGraph, o: usize, x: usize, caps: &Caps) -> Result<PartitionReport> {
    let full = full_bond_mask(g);
    check_size(g, full, caps.single)?;
    let trails = enumerate_trails(g, o, x)?;
    let target = SourceSet::pair(o, x).mask();
    let list: Vec<usize> = bits(full).collect();
    let mut report = PartitionReport { odd_sets: 0, failures: 0, literal_failures: 0 };
    for sub in 0..(1u64 << list.len()) {
        let odd = list.iter().enumerate().filter(|(i, _)| sub >> i & 1 == 1).fold(0u64, |m, (_, &b)| m | (1 << b));
        if boundary(g, odd) != target {
            continue;
        }
        report.odd_sets += 1;
        let greedy = earliest_odd_path(g, odd, o, x)?;
        let flagged: Vec<&EarliestPath> = trails.iter().filter(|p| p.flag(odd)).collect();
        if flagged.len() != 1 || flagged[0] != &greedy {
            report.failures += 1;
        }
        if trails.iter().filter(|p| p.literal_flag(odd)).count() != 1 {
            report.literal_failures += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> CouplingGraph {
        CouplingGraph::from_labels(&["o", "x", "y"], &[("o", "x", 1.0), ("o", "y", 1.0), ("x", "y", 1.0)], 0.7).unwrap()
    }

    #[test]
    fn single_odd_bond_path() {
        let g = CouplingGraph::from_labels(&["o", "x"], &[("o", "x", 1.0)], 0.5).unwrap();
        let p = earliest_odd_path(&g, 1, 0, 1).unwrap();
        assert_eq!(p.vertices, vec![0, 1]);
        assert_eq!(p.explored(), 1);
    }

    #[test]
    fn triangle_all_odd_is_rejected_and_direct_path_is_taken() {
        let g = triangle();
        assert!(earliest_odd_path(&g, 0b111, 0, 1).is_err());
        let p = earliest_odd_path(&g, 0b001, 0, 1).unwrap();
        assert_eq!(p.vertices, vec![0, 1]);
        let p = earliest_odd_path(&g, 0b110, 0, 1).unwrap();
        assert_eq!(p.vertices, vec![0, 2, 1]);
        assert_eq!(p.layers, vec![0b011, 0b100]);
    }

    #[test]
    fn lace_validator_patterns() {
        assert!(Lace { edges: vec![(0, 3)] }.is_valid(3));
        assert!(!Lace { edges: vec![(0, 2)] }.is_valid(3));
        assert!(Lace { edges: vec![(0, 2), (1, 4)] }.is_valid(4));
        assert!(!Lace { edges: vec![(0, 2), (0, 4)] }.is_valid(4));
        assert!(!Lace { edges: vec![(0, 2), (3, 4)] }.is_valid(4));
        assert!(Lace { edges: vec![(0, 2), (1, 4), (3, 6)] }.is_valid(6));
        assert!(!Lace { edges: vec![(0, 2), (1, 4), (2, 6)] }.is_valid(6));
    }

    fn graph(n: usize, edges: &[(usize, usize)], beta: f64) -> CouplingGraph {
        let labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let named: Vec<(String, String, f64)> =
            edges.iter().map(|&(a, b)| (a.to_string(), b.to_string(), 1.0)).collect();
        CouplingGraph::from_labels(&labels, &named, beta).unwrap()
    }

    fn figure_eight() -> CouplingGraph {
        graph(
            10,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 7), (2, 7), (1, 8), (4, 8), (3, 9), (6, 9)],
            0.5,
        )
    }

    fn bond_mask(g: &CouplingGraph, pairs: &[(usize, usize)]) -> u64 {
        pairs.iter().fold(0, |m, &(a, b)| m | 1 << g.bond_between(a, b).unwrap())
    }

    #[test]
    fn three_edge_lace_on_overlapping_bypasses() {
        let g = figure_eight();
        let path_pairs: Vec<(usize, usize)> = (0..6).map(|i| (i, i + 1)).collect();
        let odd = bond_mask(&g, &path_pairs);
        let path = earliest_odd_path(&g, odd, 0, 6).unwrap();
        assert_eq!(path.vertices, vec![0, 1, 2, 3, 4, 5, 6]);
        let k = bond_mask(&g, &[(0, 7), (2, 7), (1, 8), (4, 8), (3, 9), (6, 9)]) & !path.explored();
        let lace = build_lace(&g, &path, 0, k).unwrap().unwrap();
        assert_eq!(lace.edges, vec![(0, 2), (1, 4), (3, 6)]);
        assert!(lace.is_valid(6));
        let w = lace_witness_clusters(&g, &path, 0, k, &lace);
        assert!(w[0] & w[1] == 0 && w[1] & w[2] == 0 && w[0] & w[2] == 0);
    }

    #[test]
    fn missing_bypass_leaves_no_lace() {
        let g = figure_eight();
        let path_pairs: Vec<(usize, usize)> = (0..6).map(|i| (i, i + 1)).collect();
        let path = earliest_odd_path(&g, bond_mask(&g, &path_pairs), 0, 6).unwrap();
        let k = bond_mask(&g, &[(0, 7), (2, 7), (3, 9), (6, 9)]) & !path.explored();
        assert_eq!(build_lace(&g, &path, 0, k).unwrap(), None);
    }

    #[test]
    fn literal_indicator_double_counts_on_revisiting_trails() {
        // o=0, w=1, a=2, c=3, x=4; the bond o–w precedes o–a.
        let g = graph(5, &[(0, 1), (0, 2), (1, 2), (0, 3), (3, 4)], 0.5);
        let odd = full_bond_mask(&g);
        let trails = enumerate_trails(&g, 0, 4).unwrap();
        let literal: Vec<_> = trails.iter().filter(|p| p.literal_flag(odd)).collect();
        assert_eq!(literal.len(), 2);
        let refined: Vec<_> = trails.iter().filter(|p| p.flag(odd)).collect();
        assert_eq!(refined.len(), 1);
        assert_eq!(refined[0].vertices, vec![0, 1, 2, 0, 3, 4]);
        assert_eq!(*refined[0], earliest_odd_path(&g, odd, 0, 4).unwrap());
        let r = partition_of_unity(&g, 0, 4, &Caps::default()).unwrap();
        assert_eq!(r.failures, 0);
        assert!(r.literal_failures > 0);
    }

    #[test]
    fn decomposition_on_small_graphs() {
        let caps = Caps::default();
        let cases = [
            (graph(3, &[(0, 1), (1, 2), (0, 2)], 0.7), 0, 1),
            (graph(4, &[(0, 1), (1, 2), (2, 3)], 0.6), 0, 3),
            (graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 0.4), 0, 2),
            (graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)], 0.3), 0, 1),
            (graph(5, &[(0, 1), (0, 2), (1, 2), (0, 3), (3, 4)], 0.8), 0, 4),
        ];
        for (g, o, x) in cases {
            for g in [g.clone(), g.reversed_bond_order()] {
                let r = verify_pi0_decomposition(&g, o, x, &caps).unwrap();
                assert!(r.holds(1e-10), "{r:?}");
                let p = partition_of_unity(&g, o, x, &caps).unwrap();
                assert_eq!(p.failures, 0);
            }
        }
    }

    #[test]
    fn tree_has_no_laces() {
        let g = graph(4, &[(0, 1), (1, 2), (1, 3)], 0.9);
        let r = verify_pi0_decomposition(&g, 0, 2, &Caps::default()).unwrap();
        assert_eq!(r.pi0_direct, 0.0);
        assert!(r.histogram.is_empty());
    }
}
