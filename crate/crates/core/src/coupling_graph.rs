//! Finite ferromagnetic coupling graphs, bond orders and spread-out couplings.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertex label. Lattice boxes use integer vectors, generic graphs opaque names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteLabel {
    Name(String),
    Point(Vec<i64>),
}

impl fmt::Display for SiteLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteLabel::Name(s) => write!(f, "{s}"),
            SiteLabel::Point(p) => {
                let parts: Vec<String> = p.iter().map(|c| c.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
        }
    }
}

impl From<&str> for SiteLabel {
    fn from(s: &str) -> Self {
        SiteLabel::Name(s.to_string())
    }
}

impl From<String> for SiteLabel {
    fn from(s: String) -> Self {
        SiteLabel::Name(s)
    }
}

impl From<Vec<i64>> for SiteLabel {
    fn from(p: Vec<i64>) -> Self {
        SiteLabel::Point(p)
    }
}

/// A bond between vertex indices `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub u: usize,
    pub v: usize,
    pub coupling: f64,
}

impl Bond {
    pub fn other(&self, w: usize) -> usize {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn touches(&self, w: usize) -> bool {
        self.u == w || self.v == w
    }
}

/// Connected graph with positive couplings, an inverse temperature and a
/// strict total order on bonds.
///
/// Vertex indices follow the injected vertex order; bonds are stored sorted
/// lexicographically by `(u, v)`. The bond order is a separate rank table so
/// it can be replaced without renumbering bonds.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    labels: Vec<SiteLabel>,
    bonds: Vec<Bond>,
    beta: f64,
    rank: Vec<usize>,
    incident: Vec<Vec<usize>>,
    index: HashMap<(usize, usize), usize>,
}

impl CouplingGraph {
    /// Builds a graph from vertex indices. The canonical lexicographic bond
    /// order is assigned.
    pub fn new(labels: Vec<SiteLabel>, bonds: Vec<(usize, usize, f64)>, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameters(format!("beta must be finite and nonnegative, got {beta}")));
        }
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidParameters("graph has no vertices".into()));
        }
        let mut seen_labels = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if seen_labels.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidParameters(format!("duplicate vertex label {l}")));
            }
        }
        let mut list = Vec::with_capacity(bonds.len());
        let mut index = HashMap::new();
        for (a, b, j) in bonds {
            if a >= n {
                return Err(Error::UnknownVertex(a.to_string()));
            }
            if b >= n {
                return Err(Error::UnknownVertex(b.to_string()));
            }
            if a == b {
                return Err(Error::SelfLoop(labels[a].to_string()));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if !(j.is_finite() && j > 0.0) {
                return Err(Error::NonPositiveCoupling {
                    u: labels[u].to_string(),
                    v: labels[v].to_string(),
                    coupling: j,
                });
            }
            if index.insert((u, v), usize::MAX).is_some() {
                return Err(Error::DuplicateBond { u: labels[u].to_string(), v: labels[v].to_string() });
            }
            list.push(Bond { u, v, coupling: j });
        }
        list.sort_by_key(|b| (b.u, b.v));
        let mut incident = vec![Vec::new(); n];
        for (i, b) in list.iter().enumerate() {
            index.insert((b.u, b.v), i);
            incident[b.u].push(i);
            incident[b.v].push(i);
        }
        let g = CouplingGraph { labels, rank: (0..list.len()).collect(), bonds: list, beta, incident, index };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    /// Builds a graph from labels; bonds reference vertices by label.
    pub fn from_labels<L: Into<SiteLabel> + Clone>(
        vertices: &[L],
        bonds: &[(L, L, f64)],
        beta: f64,
    ) -> Result<Self> {
        let labels: Vec<SiteLabel> = vertices.iter().cloned().map(Into::into).collect();
        let lookup: HashMap<SiteLabel, usize> = labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        let find = |l: &L| -> Result<usize> {
            let key: SiteLabel = l.clone().into();
            lookup.get(&key).copied().ok_or_else(|| Error::UnknownVertex(key.to_string()))
        };
        let mut idx = Vec::with_capacity(bonds.len());
        for (a, b, j) in bonds {
            idx.push((find(a)?, find(b)?, *j));
        }
        Self::new(labels, idx, beta)
    }

    fn is_connected(&self) -> bool {
        let n = self.labels.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(w) = stack.pop() {
            for &b in &self.incident[w] {
                let o = self.bonds[b].other(w);
                if !seen[o] {
                    seen[o] = true;
                    count += 1;
                    stack.push(o);
                }
            }
        }
        count == n
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn labels(&self) -> &[SiteLabel] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &SiteLabel {
        &self.labels[v]
    }

    pub fn vertex(&self, label: &SiteLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameters(format!("beta must be finite and nonnegative, got {beta}")));
        }
        let mut g = self.clone();
        g.beta = beta;
        Ok(g)
    }

    /// Bond indices incident to `v`, in storage order.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.index.get(&key).copied()
    }

    /// Coupling J between two vertices, zero if they share no bond.
    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        self.bond_between(a, b).map_or(0.0, |i| self.bonds[i].coupling)
    }

    /// Rank of bond `i` in the bond order (0 is earliest).
    pub fn rank(&self, i: usize) -> usize {
        self.rank[i]
    }

    pub fn bond_ranks(&self) -> &[usize] {
        &self.rank
    }

    /// Replaces the bond order. `ranks[i]` is the position of bond `i`; it must
    /// be a permutation of `0..num_bonds`.
    pub fn with_bond_order(&self, ranks: Vec<usize>) -> Result<Self> {
        let m = self.bonds.len();
        if ranks.len() != m {
            return Err(Error::InvalidParameters(format!("bond order has {} entries, expected {m}", ranks.len())));
        }
        let mut seen = vec![false; m];
        for &r in &ranks {
            if r >= m || seen[r] {
                return Err(Error::InvalidParameters("bond order is not a permutation".into()));
            }
            seen[r] = true;
        }
        let mut g = self.clone();
        g.rank = ranks;
        Ok(g)
    }

    /// Bond order with every comparison reversed.
    pub fn reversed_bond_order(&self) -> Self {
        let m = self.bonds.len();
        let ranks = self.rank.iter().map(|&r| m - 1 - r).collect();
        self.with_bond_order(ranks).expect("reversal of a permutation is a permutation")
    }

    /// `tanh(βJ)` on the bond between `a` and `b`, zero elsewhere.
    pub fn tau(&self, a: usize, b: usize) -> f64 {
        (self.beta * self.coupling(a, b)).tanh()
    }

    /// Dense matrix of `tanh(βJ)`, row-major `n × n`.
    pub fn tau_matrix(&self) -> Vec<f64> {
        let n = self.num_vertices();
        let mut t = vec![0.0; n * n];
        for b in &self.bonds {
            let v = (self.beta * b.coupling).tanh();
            t[b.u * n + b.v] = v;
            t[b.v * n + b.u] = v;
        }
        t
    }

    /// Bonds with both endpoints outside `a_set`.
    pub fn bonds_avoiding(&self, in_a: impl Fn(usize) -> bool) -> Vec<usize> {
        (0..self.bonds.len()).filter(|&i| !in_a(self.bonds[i].u) && !in_a(self.bonds[i].v)).collect()
    }

    pub fn is_tree(&self) -> bool {
        self.bonds.len() + 1 == self.labels.len()
    }
}

/// Named coupling profile `h` on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `h(x) = 1` for `‖x‖_∞ ≤ 1`.
    #[default]
    UniformBox,
    /// `h(x) = 1` for `‖x‖_2 ≤ 1`.
    UniformBall,
}

impl Profile {
    fn h(&self, scaled: &[f64]) -> f64 {
        match self {
            Profile::UniformBox => {
                if scaled.iter().all(|c| c.abs() <= 1.0) {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::UniformBall => {
                if scaled.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadOutSpec {
    pub dimension: usize,
    pub range: f64,
    #[serde(default)]
    pub profile: Profile,
}

impl SpreadOutSpec {
    pub fn uniform(dimension: usize, range: f64) -> Self {
        SpreadOutSpec { dimension, range, profile: Profile::UniformBox }
    }

    pub fn theta(&self) -> f64 {
        self.range.powi(-2)
    }

    fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidParameters("dimension must be positive".into()));
        }
        if !(self.range.is_finite() && self.range >= 1.0) {
            return Err(Error::InvalidParameters(format!("range must be at least 1, got {}", self.range)));
        }
        Ok(())
    }
}

/// Coupling function on `Z^d` offsets with finite support `‖x‖_∞ ≤ radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetCoupling {
    pub dimension: usize,
    pub radius: i64,
    support: Vec<(Vec<i64>, f64)>,
}

impl OffsetCoupling {
    /// Nonzero offsets in lexicographic order with their couplings.
    pub fn support(&self) -> &[(Vec<i64>, f64)] {
        &self.support
    }

    pub fn value(&self, x: &[i64]) -> f64 {
        self.support
            .binary_search_by(|(p, _)| p.as_slice().cmp(x))
            .map_or(0.0, |i| self.support[i].1)
    }

    pub fn total(&self) -> f64 {
        self.support.iter().map(|(_, j)| j).sum()
    }
}

fn box_points(d: usize, radius: i64) -> Vec<Vec<i64>> {
    let width = (2 * radius + 1) as usize;
    let count = width.pow(d as u32);
    (0..count)
        .map(|mut k| {
            let mut p = vec![0; d];
            for c in (0..d).rev() {
                p[c] = (k % width) as i64 - radius;
                k /= width;
            }
            p
        })
        .collect()
}

/// `J(x) = h(x/L) 1{x≠o} / Σ_{y≠o} h(y/L)`.
pub fn spread_out_coupling(spec: &SpreadOutSpec) -> Result<OffsetCoupling> {
    spec.validate()?;
    let radius = spec.range.floor() as i64;
    let mut support = Vec::new();
    for p in box_points(spec.dimension, radius) {
        if p.iter().all(|&c| c == 0) {
            continue;
        }
        let scaled: Vec<f64> = p.iter().map(|&c| c as f64 / spec.range).collect();
        let h = spec.profile.h(&scaled);
        if h > 0.0 {
            support.push((p, h));
        }
    }
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let norm: f64 = support.iter().map(|(_, h)| h).sum();
    for (_, h) in support.iter_mut() {
        *h /= norm;
    }
    Ok(OffsetCoupling { dimension: spec.dimension, radius, support })
}

/// Periodic box `[0, side)^d` with the spread-out coupling of the minimal
/// periodic displacement. Requires `side > 2L` so no bond wraps onto itself.
pub fn embed_on_torus(spec: &SpreadOutSpec, side: usize, beta: f64) -> Result<CouplingGraph> {
    spec.validate()?;
    if (side as f64) <= 2.0 * spec.range {
        return Err(Error::TorusTooSmall { side, range: spec.range });
    }
    let j = spread_out_coupling(spec)?;
    let d = spec.dimension;
    let n = side.pow(d as u32);
    let coords = |mut k: usize| {
        let mut p = vec![0i64; d];
        for c in (0..d).rev() {
            p[c] = (k % side) as i64;
            k /= side;
        }
        p
    };
    let flat = |p: &[i64]| p.iter().fold(0usize, |acc, &c| acc * side + c.rem_euclid(side as i64) as usize);
    let labels: Vec<SiteLabel> = (0..n).map(|k| SiteLabel::Point(coords(k))).collect();
    let zero = vec![0i64; d];
    let mut bonds = Vec::new();
    for k in 0..n {
        let p = coords(k);
        for (e, jv) in j.support() {
            if e.as_slice() <= zero.as_slice() {
                continue;
            }
            let q: Vec<i64> = p.iter().zip(e).map(|(a, b)| a + b).collect();
            bonds.push((k, flat(&q), *jv));
        }
    }
    CouplingGraph::new(labels, bonds, beta)
}

/// On-disk graph description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<String>,
    pub bonds: Vec<(String, String, f64)>,
    pub beta: f64,
}

impl GraphFile {
    pub fn build(&self) -> Result<CouplingGraph> {
        CouplingGraph::from_labels(&self.vertices, &self.bonds, self.beta)
    }

    pub fn from_graph(g: &CouplingGraph) -> Self {
        GraphFile {
            vertices: g.labels().iter().map(|l| l.to_string()).collect(),
            bonds: g
                .bonds()
                .iter()
                .map(|b| (g.label(b.u).to_string(), g.label(b.v).to_string(), b.coupling))
                .collect(),
            beta: g.beta(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn render(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_bonds_are_lexicographic() {
        let g = CouplingGraph::from_labels(&["o", "x", "y"], &[("x", "y", 1.0), ("o", "y", 1.0), ("o", "x", 1.0)], 1.0)
            .unwrap();
        let pairs: Vec<(usize, usize)> = g.bonds().iter().map(|b| (b.u, b.v)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(g.bond_ranks(), &[0, 1, 2]);
    }

    #[test]
    fn rejects_disconnected_and_bad_couplings() {
        let e = CouplingGraph::from_labels(&["a", "b", "c"], &[("a", "b", 1.0)], 0.5).unwrap_err();
        assert_eq!(e, Error::Disconnected);
        let e = CouplingGraph::from_labels(&["a", "b"], &[("a", "b", 0.0)], 0.5).unwrap_err();
        assert!(matches!(e, Error::NonPositiveCoupling { .. }));
        let e = CouplingGraph::from_labels(&["a", "b"], &[("a", "b", 1.0), ("b", "a", 2.0)], 0.5).unwrap_err();
        assert!(matches!(e, Error::DuplicateBond { .. }));
    }

    #[test]
    fn single_bond_graph() {
        let g = CouplingGraph::from_labels(&["o", "x"], &[("o", "x", 1.0)], 0.5).unwrap();
        assert_eq!(g.num_vertices(), 2);
        assert_eq!(g.num_bonds(), 1);
        assert!((g.tau(0, 1) - 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn spread_out_normalisation() {
        let j = spread_out_coupling(&SpreadOutSpec::uniform(1, 1.0)).unwrap();
        assert_eq!(j.support().len(), 2);
        assert_eq!(j.value(&[1]), 0.5);
        assert_eq!(j.value(&[-1]), 0.5);
        let j = spread_out_coupling(&SpreadOutSpec::uniform(2, 2.0)).unwrap();
        assert_eq!(j.support().len(), 24);
        for (_, v) in j.support() {
            assert!((v - 1.0 / 24.0).abs() < 1e-15);
        }
        assert!((j.total() - 1.0).abs() < 1e-12);
        assert_eq!(j.value(&[0, 0]), 0.0);
    }

    #[test]
    fn torus_embeddings() {
        let g = embed_on_torus(&SpreadOutSpec::uniform(1, 1.0), 4, 1.0).unwrap();
        assert_eq!(g.num_vertices(), 4);
        assert_eq!(g.num_bonds(), 4);
        assert!(g.bonds().iter().all(|b| b.coupling == 0.5));
        let g = embed_on_torus(&SpreadOutSpec::uniform(2, 1.0), 3, 1.0).unwrap();
        assert_eq!(g.num_vertices(), 9);
        assert_eq!(g.num_bonds(), 9 * 8 / 2);
        assert!(g.bonds().iter().all(|b| (b.coupling - 0.125).abs() < 1e-15));
        let ball = SpreadOutSpec { dimension: 2, range: 1.0, profile: Profile::UniformBall };
        let g = embed_on_torus(&ball, 3, 1.0).unwrap();
        assert_eq!(g.num_vertices(), 9);
        assert_eq!(g.num_bonds(), 18);
        assert!(g.bonds().iter().all(|b| (b.coupling - 0.25).abs() < 1e-15));
        assert!(matches!(
            embed_on_torus(&SpreadOutSpec::uniform(1, 2.0), 4, 1.0),
            Err(Error::TorusTooSmall { .. })
        ));
    }

    #[test]
    fn graph_file_round_trip() {
        let g = CouplingGraph::from_labels(&["o", "x", "y"], &[("o", "x", 1.0), ("x", "y", 0.5)], 0.3).unwrap();
        let text = GraphFile::from_graph(&g).render().unwrap();
        let back = GraphFile::parse(&text).unwrap().build().unwrap();
        assert_eq!(back, g);
    }
}
