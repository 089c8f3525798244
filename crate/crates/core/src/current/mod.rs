//! Exact random-current computations by parity-class enumeration.
//!
//! A current on a bond is reduced to its parity class: `Zero`, `EvenPos` or
//! `Odd`, with aggregated weights `1`, `cosh(βJ) − 1` and `sinh(βJ)`. Bond and
//! vertex sets are `u64` bitmasks indexed by the graph's bond and vertex
//! indices, so enumeration requires at most 64 vertices and 64 bonds.

mod events;
mod expansion;

pub use events::{
    connected, cluster_of, double_connected, event_measure, superpose, through_set, Event, EventSpec, Layer,
    PosDistribution,
};
pub use expansion::{
    pi0, pi0_tilde, pi1_upper, sst_lhs, sst_lhs_two_layer, theta_double_prime, theta_prime, ThetaTable,
};

use crate::coupling_graph::CouplingGraph;
use crate::error::{Error, Result};

/// Enumeration caps on bond counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Caps {
    pub single: usize,
    pub multi: usize,
    pub nested: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { single: 16, multi: 12, nested: 10 }
    }
}

impl Caps {
    /// Caps scaled so that `single` equals `n`; the others keep their ratio.
    pub fn with_single(n: usize) -> Self {
        let d = Caps::default();
        Caps { single: n, multi: (n * d.multi) / d.single, nested: (n * d.nested) / d.single }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondState {
    Zero,
    EvenPos,
    Odd,
}

/// A parity class of currents with its exact aggregated weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityConfig {
    pub states: Vec<BondState>,
    pub weight: f64,
}

impl ParityConfig {
    pub fn odd_mask(&self) -> u64 {
        mask_where(&self.states, |s| s == BondState::Odd)
    }

    pub fn positive_mask(&self) -> u64 {
        mask_where(&self.states, |s| s != BondState::Zero)
    }

    /// Vertices with an odd number of odd bonds.
    pub fn sources(&self, g: &CouplingGraph) -> u64 {
        boundary(g, self.odd_mask())
    }
}

fn mask_where(states: &[BondState], f: impl Fn(BondState) -> bool) -> u64 {
    states.iter().enumerate().filter(|(_, &s)| f(s)).fold(0, |m, (i, _)| m | (1 << i))
}

/// Source set encoded as a vertex mask of even cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SourceSet(pub u64);

impl SourceSet {
    pub fn empty() -> Self {
        SourceSet(0)
    }

    /// `{x} △ {y}`.
    pub fn pair(x: usize, y: usize) -> Self {
        SourceSet((1u64 << x) ^ (1u64 << y))
    }

    pub fn from_vertices(vs: &[usize]) -> Result<Self> {
        let m = vs.iter().fold(0u64, |m, &v| m ^ (1 << v));
        if m.count_ones() % 2 == 1 {
            return Err(Error::OddSourceSet);
        }
        Ok(SourceSet(m))
    }

    pub fn mask(&self) -> u64 {
        self.0
    }
}

pub(crate) fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

pub fn full_bond_mask(g: &CouplingGraph) -> u64 {
    mask_of(0..g.num_bonds())
}

pub fn mask_of(bonds: impl IntoIterator<Item = usize>) -> u64 {
    bonds.into_iter().fold(0, |m, b| m | (1u64 << b))
}

pub fn vertex_mask(vs: impl IntoIterator<Item = usize>) -> u64 {
    mask_of(vs)
}

/// Bonds with both endpoints outside the vertex mask `a`.
pub fn bonds_outside(g: &CouplingGraph, a: u64) -> u64 {
    mask_of(g.bonds_avoiding(|v| a >> v & 1 == 1))
}

pub(crate) fn endpoint_mask(g: &CouplingGraph, b: usize) -> u64 {
    let bond = g.bond(b);
    (1u64 << bond.u) | (1u64 << bond.v)
}

/// Vertices of odd degree in the bond set `odd`.
pub fn boundary(g: &CouplingGraph, odd: u64) -> u64 {
    bits(odd).fold(0, |acc, b| acc ^ endpoint_mask(g, b))
}

pub(crate) fn check_size(g: &CouplingGraph, bonds: u64, cap: usize) -> Result<()> {
    if g.num_vertices() > 64 || g.num_bonds() > 64 {
        return Err(Error::CapExceeded { bonds: g.num_bonds(), cap: cap.min(64) });
    }
    let k = bonds.count_ones() as usize;
    if k > cap {
        return Err(Error::CapExceeded { bonds: k, cap });
    }
    Ok(())
}

pub(crate) fn check_vertex(g: &CouplingGraph, v: usize) -> Result<()> {
    if v >= g.num_vertices() {
        return Err(Error::UnknownVertex(v.to_string()));
    }
    Ok(())
}

pub(crate) fn check_subset(g: &CouplingGraph, bonds: u64) -> Result<()> {
    if bonds & !full_bond_mask(g) != 0 {
        return Err(Error::InvalidParameters("bond set is not a subset of the graph's bonds".into()));
    }
    Ok(())
}

/// `(sinh βJ, cosh βJ − 1, cosh βJ)` on a bond; `cosh − 1` is formed as
/// `2 sinh²(βJ/2)` to keep relative accuracy at small couplings.
pub fn bond_weights(g: &CouplingGraph, b: usize) -> (f64, f64, f64) {
    let k = g.beta() * g.bond(b).coupling;
    let half = (0.5 * k).sinh();
    (k.sinh(), 2.0 * half * half, k.cosh())
}

/// Per-subset tables over the bonds of a mask, indexed by local subset bits.
pub(crate) struct SubsetTables {
    pub global: Vec<usize>,
    pub boundary: Vec<u64>,
    pub odd_weight: Vec<f64>,
    pub even_weight: Vec<f64>,
}

impl SubsetTables {
    pub fn new(g: &CouplingGraph, bonds: u64) -> Self {
        let global: Vec<usize> = bits(bonds).collect();
        let k = global.len();
        let size = 1usize << k;
        let mut boundary = vec![0u64; size];
        let mut odd_weight = vec![1.0; size];
        let mut even_weight = vec![1.0; size];
        let per: Vec<(f64, f64)> = global
            .iter()
            .map(|&b| {
                let (s, cm1, _) = bond_weights(g, b);
                (s, cm1)
            })
            .collect();
        for sub in 1..size {
            let low = sub.trailing_zeros() as usize;
            let prev = sub & (sub - 1);
            boundary[sub] = boundary[prev] ^ endpoint_mask(g, global[low]);
            odd_weight[sub] = odd_weight[prev] * per[low].0;
            even_weight[sub] = even_weight[prev] * per[low].1;
        }
        SubsetTables { global, boundary, odd_weight, even_weight }
    }

    pub fn deposit(&self, sub: usize) -> u64 {
        let mut m = 0u64;
        for (i, &b) in self.global.iter().enumerate() {
            if sub >> i & 1 == 1 {
                m |= 1 << b;
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.global.len()
    }
}

/// Sum of `Π_S sinh · Π_{B∖S} cosh` over odd sets `S ⊆ B` with `∂S = target`.
/// This is the total weight of all parity classes with that source set.
fn source_weight(g: &CouplingGraph, bonds: u64, target: u64) -> f64 {
    let t = SubsetTables::new(g, bonds);
    let tanh: Vec<f64> = t.global.iter().map(|&b| (g.beta() * g.bond(b).coupling).tanh()).collect();
    let cosh_all: f64 = t.global.iter().map(|&b| bond_weights(g, b).2).product();
    let mut sum = 0.0;
    for sub in 0..(1usize << t.len()) {
        if t.boundary[sub] == target {
            sum += bits(sub as u64).map(|i| tanh[i]).product::<f64>();
        }
    }
    cosh_all * sum
}

/// `Z_B`: total weight of parity classes on `B` without sources.
pub fn partition_function(g: &CouplingGraph, bonds: u64, caps: &Caps) -> Result<f64> {
    check_size(g, bonds, caps.single)?;
    check_subset(g, bonds)?;
    Ok(source_weight(g, bonds, 0))
}

/// `Σ_{∂=sources} w / Z_B`.
pub fn correlation(g: &CouplingGraph, sources: SourceSet, bonds: u64, caps: &Caps) -> Result<f64> {
    check_size(g, bonds, caps.single)?;
    check_subset(g, bonds)?;
    if sources.0.count_ones() % 2 == 1 {
        return Err(Error::OddSourceSet);
    }
    if sources.0 >> g.num_vertices() != 0 {
        return Err(Error::UnknownVertex("source outside the graph".into()));
    }
    if sources.0 == 0 {
        return Ok(1.0);
    }
    Ok(source_weight(g, bonds, sources.0) / source_weight(g, bonds, 0))
}

pub fn four_point(g: &CouplingGraph, x: usize, y: usize, u: usize, v: usize, caps: &Caps) -> Result<f64> {
    for w in [x, y, u, v] {
        check_vertex(g, w)?;
    }
    let s = (1u64 << x) ^ (1u64 << y) ^ (1u64 << u) ^ (1u64 << v);
    correlation(g, SourceSet(s), full_bond_mask(g), caps)
}

/// Finite-volume two-point matrix `G[a][b] = ⟨φ_a φ_b⟩`, row-major.
pub fn two_point_matrix(g: &CouplingGraph, caps: &Caps) -> Result<Vec<f64>> {
    let bonds = full_bond_mask(g);
    check_size(g, bonds, caps.single)?;
    let n = g.num_vertices();
    let t = SubsetTables::new(g, bonds);
    let tanh: Vec<f64> = t.global.iter().map(|&b| (g.beta() * g.bond(b).coupling).tanh()).collect();
    let mut z = 0.0;
    let mut pair = vec![0.0; n * n];
    for sub in 0..(1usize << t.len()) {
        let bd = t.boundary[sub];
        match bd.count_ones() {
            0 => z += bits(sub as u64).map(|i| tanh[i]).product::<f64>(),
            2 => {
                let a = bd.trailing_zeros() as usize;
                let b = 63 - bd.leading_zeros() as usize;
                pair[a * n + b] += bits(sub as u64).map(|i| tanh[i]).product::<f64>();
            }
            _ => {}
        }
    }
    let mut gm = vec![0.0; n * n];
    for a in 0..n {
        gm[a * n + a] = 1.0;
        for b in a + 1..n {
            let v = pair[a * n + b] / z;
            gm[a * n + b] = v;
            gm[b * n + a] = v;
        }
    }
    Ok(gm)
}

/// All parity classes on `B` with the given sources; bonds outside `B` are `Zero`.
pub fn parity_configs(g: &CouplingGraph, bonds: u64, sources: SourceSet, caps: &Caps) -> Result<Vec<ParityConfig>> {
    check_size(g, bonds, caps.single)?;
    check_subset(g, bonds)?;
    let t = SubsetTables::new(g, bonds);
    let k = t.len();
    let full = (1usize << k) - 1;
    let mut out = Vec::new();
    for odd in 0..=full {
        if t.boundary[odd] != sources.0 {
            continue;
        }
        let rest = full & !odd;
        let mut even = rest;
        loop {
            let mut states = vec![BondState::Zero; g.num_bonds()];
            for i in 0..k {
                if odd >> i & 1 == 1 {
                    states[t.global[i]] = BondState::Odd;
                } else if even >> i & 1 == 1 {
                    states[t.global[i]] = BondState::EvenPos;
                }
            }
            out.push(ParityConfig { states, weight: t.odd_weight[odd] * t.even_weight[even] });
            if even == 0 {
                break;
            }
            even = (even - 1) & rest;
        }
    }
    Ok(out)
}

fn spin_energy_sum(g: &CouplingGraph, bonds: u64, observable: impl Fn(u64) -> f64) -> f64 {
    let n = g.num_vertices();
    let list: Vec<(usize, usize, f64)> =
        bits(bonds).map(|b| (g.bond(b).u, g.bond(b).v, g.beta() * g.bond(b).coupling)).collect();
    let mut sum = 0.0;
    for s in 0..(1u64 << n) {
        let e: f64 = list
            .iter()
            .map(|&(u, v, k)| if (s >> u & 1) == (s >> v & 1) { k } else { -k })
            .sum();
        sum += observable(s) * e.exp();
    }
    sum
}

/// Direct spin sum `Σ_φ exp(β Σ_{b∈B} J_b φ_u φ_v)`.
pub fn spin_sum_partition(g: &CouplingGraph, bonds: u64) -> Result<f64> {
    if g.num_vertices() > 24 {
        return Err(Error::CapExceeded { bonds: g.num_vertices(), cap: 24 });
    }
    check_subset(g, bonds)?;
    Ok(spin_energy_sum(g, bonds, |_| 1.0))
}

/// Direct spin-sum expectation of `Π_{v∈sites} φ_v` with interactions on `B`.
pub fn spin_sum_moment(g: &CouplingGraph, sites: &[usize], bonds: u64) -> Result<f64> {
    let z = spin_sum_partition(g, bonds)?;
    for &v in sites {
        check_vertex(g, v)?;
    }
    let num = spin_energy_sum(g, bonds, |s| {
        let neg = sites.iter().filter(|&&v| s >> v & 1 == 0).count();
        if neg % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    });
    Ok(num / z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(beta: f64) -> CouplingGraph {
        CouplingGraph::from_labels(&["o", "x", "y"], &[("o", "x", 1.0), ("o", "y", 1.0), ("x", "y", 1.0)], beta).unwrap()
    }

    #[test]
    fn single_bond_values() {
        let g = CouplingGraph::from_labels(&["o", "x"], &[("o", "x", 1.0)], 0.5).unwrap();
        let caps = Caps::default();
        let b = full_bond_mask(&g);
        assert!((partition_function(&g, b, &caps).unwrap() - 0.5f64.cosh()).abs() < 1e-15);
        let c = correlation(&g, SourceSet::pair(0, 1), b, &caps).unwrap();
        assert!((c - 0.5f64.tanh()).abs() < 1e-15);
        assert_eq!(correlation(&g, SourceSet::empty(), b, &caps).unwrap(), 1.0);
    }

    #[test]
    fn triangle_partition_function() {
        let g = triangle(1.0);
        let z = partition_function(&g, full_bond_mask(&g), &Caps::default()).unwrap();
        let (c, s) = (1f64.cosh(), 1f64.sinh());
        assert!((z - (c.powi(3) + s.powi(3))).abs() < 1e-13);
        let spins = spin_sum_partition(&g, full_bond_mask(&g)).unwrap();
        assert!((z * 8.0 - spins).abs() < 1e-12 * spins);
    }

    #[test]
    fn zero_beta_partition_is_one() {
        let g = triangle(0.0);
        assert_eq!(partition_function(&g, full_bond_mask(&g), &Caps::default()).unwrap(), 1.0);
    }

    #[test]
    fn odd_sources_and_caps_rejected() {
        let g = triangle(0.3);
        assert_eq!(SourceSet::from_vertices(&[0]).unwrap_err(), Error::OddSourceSet);
        assert_eq!(
            correlation(&g, SourceSet(1), full_bond_mask(&g), &Caps::default()).unwrap_err(),
            Error::OddSourceSet
        );
        let caps = Caps { single: 2, multi: 2, nested: 2 };
        assert!(matches!(partition_function(&g, full_bond_mask(&g), &caps), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn parity_configs_have_even_sources_and_sum_to_z() {
        let g = triangle(0.7);
        let caps = Caps::default();
        let all = parity_configs(&g, full_bond_mask(&g), SourceSet::empty(), &caps).unwrap();
        assert_eq!(all.len(), 8 + 1);
        let z: f64 = all.iter().map(|c| c.weight).sum();
        assert!((z - partition_function(&g, full_bond_mask(&g), &caps).unwrap()).abs() < 1e-13);
        assert!(all.iter().all(|c| c.sources(&g) == 0));
    }
}
