use std::collections::BTreeMap;

use super::events::{cluster_of, double_connected, superpose, through_set, PosDistribution};
use super::{
    bonds_outside, check_size, check_subset, check_vertex, event_measure, full_bond_mask, two_point_matrix,
    Caps, Event, EventSpec, Layer, SourceSet,
};
use crate::coupling_graph::CouplingGraph;
use crate::error::Result;

fn source_layer(g: &CouplingGraph, o: usize, x: usize) -> Layer {
    Layer { bonds: full_bond_mask(g), sources: SourceSet::pair(o, x) }
}

/// `Σ_{∂n=o△x} (w/Z) 1{o ⇔ x}`; equals 1 at `x = o`.
pub fn pi0(g: &CouplingGraph, o: usize, x: usize, caps: &Caps) -> Result<f64> {
    event_measure(g, &[source_layer(g, o, x)], &EventSpec::new(Event::DoubleConn(o, x)), caps)
}

/// `Σ_{∂n=o△x} (w/Z) 1{o ⇔ x, o ↔ y}`.
pub fn pi0_tilde(g: &CouplingGraph, o: usize, x: usize, y: usize, caps: &Caps) -> Result<f64> {
    let e = Event::All(vec![Event::DoubleConn(o, x), Event::Conn(o, y)]);
    event_measure(g, &[source_layer(g, o, x)], &EventSpec::new(e), caps)
}

fn theta_layers(g: &CouplingGraph, o: usize, x: usize, a: u64) -> [Layer; 2] {
    [Layer { bonds: bonds_outside(g, a), sources: SourceSet::empty() }, source_layer(g, o, x)]
}

/// Two-layer measure of `o ⇔_A x`: the first layer lives on bonds avoiding
/// `A` without sources, the second on all bonds with sources `o△x`.
pub fn theta_prime(g: &CouplingGraph, o: usize, x: usize, a: u64, caps: &Caps) -> Result<f64> {
    event_measure(g, &theta_layers(g, o, x, a), &EventSpec::new(Event::ThroughA { u: o, v: x, a }), caps)
}

/// `theta_prime` with the extra indicator `o ↔ y` in the superposition.
pub fn theta_double_prime(g: &CouplingGraph, o: usize, x: usize, y: usize, a: u64, caps: &Caps) -> Result<f64> {
    let e = Event::All(vec![Event::ThroughA { u: o, v: x, a }, Event::Conn(o, y)]);
    event_measure(g, &theta_layers(g, o, x, a), &EventSpec::new(e), caps)
}

/// Θ′ and Θ″ for one `(o, A)` and every `x`, `y`, from one superposed law per `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    n: usize,
    prime: Vec<f64>,
    double: Vec<f64>,
}

impl ThetaTable {
    pub fn compute(g: &CouplingGraph, o: usize, a: u64, caps: &Caps) -> Result<Self> {
        let n = g.num_vertices();
        check_vertex(g, o)?;
        let outer = bonds_outside(g, a);
        let total = (outer.count_ones() + g.num_bonds() as u32) as usize;
        if total > caps.multi {
            return Err(crate::error::Error::CapExceeded { bonds: total, cap: caps.multi });
        }
        check_size(g, full_bond_mask(g), caps.multi)?;
        let first = PosDistribution::layer(g, &Layer { bonds: outer, sources: SourceSet::empty() });
        let mut prime = vec![0.0; n];
        let mut double = vec![0.0; n * n];
        for x in 0..n {
            let second = PosDistribution::layer(g, &source_layer(g, o, x));
            let sup = superpose(&[first.clone(), second]);
            for &(p, w) in sup.entries() {
                if !through_set(g, p, o, x, a) {
                    continue;
                }
                prime[x] += w;
                let c = cluster_of(g, p, o);
                for y in 0..n {
                    if c >> y & 1 == 1 {
                        double[x * n + y] += w;
                    }
                }
            }
        }
        Ok(ThetaTable { n, prime, double })
    }

    pub fn prime(&self, x: usize) -> f64 {
        self.prime[x]
    }

    pub fn double_prime(&self, x: usize, y: usize) -> f64 {
        self.double[x * self.n + y]
    }
}

/// Nested upper-bound expression for the first-order coefficient:
/// `Σ_u Σ_{∂n=o△u} (w/Z) 1{o⇔u} Σ_{v,y} τ(u,v) G(v,y) Θ′_{y,x; C̃ⁿ_{u,v}(o)}`,
/// where `C̃ⁿ_b(o)` is the positive cluster of `o` after removing bond `b`.
pub fn pi1_upper(g: &CouplingGraph, o: usize, x: usize, caps: &Caps) -> Result<f64> {
    check_vertex(g, o)?;
    check_vertex(g, x)?;
    check_size(g, full_bond_mask(g), caps.nested)?;
    let n = g.num_vertices();
    let inner_caps = Caps { single: caps.single.max(caps.nested), multi: 2 * caps.nested, nested: caps.nested };
    let gm = two_point_matrix(g, &inner_caps)?;
    let mut weights: BTreeMap<(u64, usize, usize), f64> = BTreeMap::new();
    for u in 0..n {
        let dist = PosDistribution::layer(g, &source_layer(g, o, u));
        for &(p, w) in dist.entries() {
            if !double_connected(g, p, o, u) {
                continue;
            }
            for &b in g.incident(u) {
                let v = g.bond(b).other(u);
                let cluster = cluster_of(g, p & !(1u64 << b), o);
                *weights.entry((cluster, u, v)).or_insert(0.0) += w;
            }
        }
    }
    let mut theta: BTreeMap<(usize, u64), f64> = BTreeMap::new();
    let mut total = 0.0;
    for (&(a, u, v), &w) in &weights {
        let tau = g.tau(u, v);
        let mut inner = 0.0;
        for y in 0..n {
            let t = match theta.get(&(y, a)) {
                Some(&t) => t,
                None => {
                    let t = theta_prime(g, y, x, a, &inner_caps)?;
                    theta.insert((y, a), t);
                    t
                }
            };
            inner += gm[v * n + y] * t;
        }
        total += w * tau * inner;
    }
    Ok(total)
}

/// `Σ_{∂n=o△x on B} (w_B/Z_B) 1{o ↔ y in n}`.
pub fn sst_lhs(g: &CouplingGraph, o: usize, x: usize, y: usize, b: u64, caps: &Caps) -> Result<f64> {
    check_subset(g, b)?;
    let layer = Layer { bonds: b, sources: SourceSet::pair(o, x) };
    event_measure(g, &[layer], &EventSpec::new(Event::Conn(o, y)), caps)
}

/// Two-layer form: an extra sourceless layer on `B'`, connection through the
/// superposition restricted to bonds of `B`.
pub fn sst_lhs_two_layer(
    g: &CouplingGraph,
    o: usize,
    x: usize,
    y: usize,
    b: u64,
    b_prime: u64,
    caps: &Caps,
) -> Result<f64> {
    check_subset(g, b)?;
    check_subset(g, b_prime)?;
    let layers =
        [Layer { bonds: b_prime, sources: SourceSet::empty() }, Layer { bonds: b, sources: SourceSet::pair(o, x) }];
    event_measure(g, &layers, &EventSpec::within(Event::Conn(o, y), b), caps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(beta: f64) -> CouplingGraph {
        CouplingGraph::from_labels(&["o", "x", "y"], &[("o", "x", 1.0), ("o", "y", 1.0), ("x", "y", 1.0)], beta).unwrap()
    }

    #[test]
    fn pi0_triangle_closed_form() {
        for beta in [0.1, 0.5, 1.0] {
            let g = triangle(beta);
            let (c, s) = (beta.cosh(), beta.sinh());
            let expect = (s * (c - 1.0).powi(2) + (c - 1.0) * s * s) / (c.powi(3) + s.powi(3));
            let got = pi0(&g, 0, 1, &Caps::default()).unwrap();
            assert!((got - expect).abs() < 1e-12 * expect, "{beta}: {got} vs {expect}");
        }
    }

    #[test]
    fn diagonal_conventions() {
        let g = triangle(0.4);
        let caps = Caps::default();
        assert_eq!(pi0(&g, 0, 0, &caps).unwrap(), 1.0);
        assert!((theta_prime(&g, 0, 0, 1, &caps).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(theta_prime(&g, 0, 0, 0b110, &caps).unwrap(), 0.0);
        assert_eq!(theta_prime(&g, 0, 1, 0, &caps).unwrap(), 0.0);
    }

    #[test]
    fn theta_table_matches_direct_calls() {
        let g = triangle(0.6);
        let caps = Caps::default();
        for a in [1u64, 2, 4, 7] {
            let t = ThetaTable::compute(&g, 0, a, &caps).unwrap();
            for x in 0..3 {
                assert!((t.prime(x) - theta_prime(&g, 0, x, a, &caps).unwrap()).abs() < 1e-15);
                for y in 0..3 {
                    let d = theta_double_prime(&g, 0, x, y, a, &caps).unwrap();
                    assert!((t.double_prime(x, y) - d).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn pi1_upper_vanishes_at_zero_beta() {
        let g = triangle(0.0);
        assert_eq!(pi1_upper(&g, 0, 1, &Caps::default()).unwrap(), 0.0);
    }
}
