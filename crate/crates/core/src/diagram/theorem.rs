use std::collections::HashMap;

use ndarray::{Array1, Array2};

use super::chain::{ChainEvaluator, ChainFamily};
use super::{DiagramFields, Mode};
use crate::error::{Error, Result};
use crate::field::ChainLength;

/// Relative allowance for floating-point rounding in the upper values.
pub const ROUNDING: f64 = 1e-12;

/// Which right-hand side, with its anchors; `a` is a vertex mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    One,
    Two { a: u64 },
    Three { y: usize },
    Four { y: usize, a: u64 },
}

impl Theorem {
    pub fn number(&self) -> u8 {
        match self {
            Theorem::One => 1,
            Theorem::Two { .. } => 2,
            Theorem::Three { .. } => 3,
            Theorem::Four { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundStatus {
    /// `lhs ≤ lower`, so the inequality holds whatever the omitted terms are.
    Conclusive,
    /// `lower < lhs ≤ upper`.
    Certified,
    /// `lhs > lower` and no finite upper value was certified.
    Uncertified,
    Violated,
}

/// Right-hand side bracketed between truncated partial sums and the
/// certified upper value (`∞` when certification failed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremBound {
    pub lower: f64,
    pub upper: f64,
}

impl TheoremBound {
    pub fn status(&self, lhs: f64) -> BoundStatus {
        if lhs <= self.lower {
            BoundStatus::Conclusive
        } else if self.upper.is_infinite() {
            BoundStatus::Uncertified
        } else if lhs <= self.upper * (1.0 + ROUNDING) {
            BoundStatus::Certified
        } else {
            BoundStatus::Violated
        }
    }
}

type ChainMap = HashMap<ChainFamily, Array1<f64>>;

/// Builds the `m = 1` and `m = ∞` blocks of one graph in both modes.
pub struct TheoremEvaluator {
    n: usize,
    lower: [DiagramFields; 2],
    upper: [Option<DiagramFields>; 2],
}

fn families(n: usize, m1: bool) -> Vec<ChainFamily> {
    let mut out = vec![ChainFamily::X];
    out.extend((0..n).map(ChainFamily::DotX));
    out.extend((0..n).map(ChainFamily::DdotX));
    if !m1 {
        for a in 0..n {
            out.extend((0..n).map(|y| ChainFamily::DddotX(a, y)));
        }
    }
    out
}

/// `None` when the `U` series of these fields cannot be certified.
fn chains(fields: &DiagramFields, o: usize, m1: bool) -> Result<Option<ChainMap>> {
    let ev = ChainEvaluator::new(fields)?;
    let mut map = HashMap::new();
    for fam in families(fields.n, m1) {
        match ev.chain(o, fam) {
            Ok(v) => map.insert(fam, v.values),
            Err(Error::DivergentChain { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
    }
    Ok(Some(map))
}

impl TheoremEvaluator {
    /// `lower_terms` truncates every infinite sum of the lower values.
    pub fn new(g: &Array2<f64>, tau: &Array2<f64>, lower_terms: usize) -> Result<Self> {
        let mode = Mode::Lower { terms: lower_terms.max(1) };
        let lower = [
            DiagramFields::new(g, tau, ChainLength::Finite(1), mode)?,
            DiagramFields::new(g, tau, ChainLength::Infinite, mode)?,
        ];
        let upper = [
            Some(DiagramFields::new(g, tau, ChainLength::Finite(1), Mode::Upper)?),
            match DiagramFields::new(g, tau, ChainLength::Infinite, Mode::Upper) {
                Ok(f) => Some(f),
                Err(Error::DivergentChain { .. }) => None,
                Err(e) => return Err(e),
            },
        ];
        Ok(TheoremEvaluator { n: g.nrows(), lower, upper })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Whether the upper `m = ∞` blocks exist, which needs `ρ(G̃²) < 1`.
    pub fn bubble_certified(&self) -> bool {
        self.upper[1].is_some()
    }

    /// All chain values needed from the start `o`.
    pub fn origin(&self, o: usize) -> Result<OriginTable> {
        if o >= self.n {
            return Err(Error::UnknownVertex(o.to_string()));
        }
        let lower = Table {
            m1: chains(&self.lower[0], o, true)?,
            inf: chains(&self.lower[1], o, false)?,
            hsum: self.lower[1].bsum.clone(),
        };
        let upper = Table {
            m1: match &self.upper[0] {
                Some(f) => chains(f, o, true)?,
                None => None,
            },
            inf: match &self.upper[1] {
                Some(f) => chains(f, o, false)?,
                None => None,
            },
            hsum: self.upper[1].as_ref().map_or_else(|| self.lower[1].bsum.clone(), |f| f.bsum.clone()),
        };
        Ok(OriginTable { o, n: self.n, lower, upper })
    }
}

#[derive(Debug, Clone)]
struct Table {
    m1: Option<ChainMap>,
    inf: Option<ChainMap>,
    hsum: Array2<f64>,
}

/// Chain values from a fixed start, assembled into theorem right-hand sides.
#[derive(Debug, Clone)]
pub struct OriginTable {
    o: usize,
    n: usize,
    lower: Table,
    upper: Table,
}

fn members(n: usize, a: u64) -> impl Iterator<Item = usize> {
    (0..n).filter(move |v| a >> v & 1 == 1)
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// `∞` when a needed chain map is missing.
fn assemble(t: &Table, n: usize, x: usize, thm: Theorem) -> f64 {
    use ChainFamily::*;
    let map = match thm {
        Theorem::One | Theorem::Three { .. } => &t.m1,
        Theorem::Two { .. } | Theorem::Four { .. } => &t.inf,
    };
    let Some(c) = map else { return f64::INFINITY };
    let at = |f: ChainFamily| c[&f][x];
    match thm {
        Theorem::One => 2.0 * at(X),
        Theorem::Two { a } => 2.0 * members(n, a).map(|a| at(X) * delta(x, a) + at(DotX(a))).sum::<f64>(),
        Theorem::Three { y } => 2.0 * (at(X) * delta(x, y) + at(DotX(y)) + at(DdotX(y))),
        Theorem::Four { y, a } => {
            2.0 * members(n, a)
                .map(|a| {
                    let near = at(DdotX(y)) * delta(a, x) + at(DddotX(a, y));
                    let far: f64 = (0..n)
                        .map(|y2| (at(DdotX(a)) * delta(y2, x) + at(DddotX(y2, a))) * t.hsum[[y2, y]])
                        .sum();
                    near + far
                })
                .sum::<f64>()
        }
    }
}

impl OriginTable {
    pub fn origin(&self) -> usize {
        self.o
    }

    /// Right-hand side at `x ≠ o`.
    pub fn rhs(&self, x: usize, thm: Theorem) -> Result<TheoremBound> {
        if x == self.o {
            return Err(Error::Diagonal);
        }
        let n = self.n;
        let y = match thm {
            Theorem::Three { y } | Theorem::Four { y, .. } => y,
            _ => x,
        };
        if let Some(v) = [x, y].into_iter().find(|&v| v >= n) {
            return Err(Error::UnknownVertex(v.to_string()));
        }
        if let Theorem::Two { a } | Theorem::Four { a, .. } = thm {
            if a >> n != 0 {
                return Err(Error::InvalidParameters(format!("anchor mask {a:#b} exceeds {n} vertices")));
            }
        }
        Ok(TheoremBound { lower: assemble(&self.lower, n, x, thm), upper: assemble(&self.upper, n, x, thm) })
    }
}

/// Right-hand side of one theorem at `(o, x)` from `G` and `τ` matrices.
pub fn theorem_rhs(
    g: &Array2<f64>,
    tau: &Array2<f64>,
    o: usize,
    x: usize,
    thm: Theorem,
    lower_terms: usize,
) -> Result<TheoremBound> {
    if x == o {
        return Err(Error::Diagonal);
    }
    TheoremEvaluator::new(g, tau, lower_terms)?.origin(o)?.rhs(x, thm)
}
