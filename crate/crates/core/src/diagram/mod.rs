//! Diagram kernels, chain sums and theorem right-hand sides on finite graphs,
//! plus the decay trend of `X¹` on torus proxy fields.
//!
//! Graph fields use the convention `f(b − a) ↦ F[a][b]`, so convolution is the
//! matrix product and a kernel argument such as `G̃(z′ − y)` reads `G̃[y][z′]`.

mod chain;
mod decay;
mod kernel;
mod theorem;

pub use chain::{chain_patterns, evaluate_chain, ChainEvaluator, ChainFamily, ChainValue, Pattern, Slot};
pub use decay::{decay_trend, DecayPoint, DecayReport};
pub use kernel::{
    mass, pair_delta, DenseKernel, PairField, PairKernel, ProductKernel, ProductTerminal, TerminalKernel,
};
pub use theorem::{theorem_rhs, BoundStatus, OriginTable, Theorem, TheoremBound, TheoremEvaluator, ROUNDING};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::{bubble_chain, triangle_t, ChainLength, DirectConvolver, LatticeField};

/// How infinite sums are closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Certified geometric tails are added, giving pointwise upper values.
    Upper,
    /// Every infinite sum is truncated after `terms` terms, giving lower values.
    Lower { terms: usize },
}

/// Kernel families with their anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    U,
    V,
    DotU(usize),
    DotV(usize),
    DdotU(usize),
    DdotV(usize),
    DddotU(usize, usize),
    DddotV(usize, usize),
    /// Closed forms `Ü⁰_a`, `V̈⁰_a`, `U⃛⁰_{a,v}`, `V⃛⁰_{a,v}`.
    DdotU0(usize),
    DdotV0(usize),
    DddotU0(usize, usize),
    DddotV0(usize, usize),
}

impl Family {
    pub fn label(&self) -> String {
        match *self {
            Family::U => "U".into(),
            Family::V => "V".into(),
            Family::DotU(a) => format!("dotU[{a}]"),
            Family::DotV(a) => format!("dotV[{a}]"),
            Family::DdotU(a) => format!("ddotU[{a}]"),
            Family::DdotV(a) => format!("ddotV[{a}]"),
            Family::DddotU(a, v) => format!("dddotU[{a},{v}]"),
            Family::DddotV(a, v) => format!("dddotV[{a},{v}]"),
            Family::DdotU0(a) => format!("ddotU0[{a}]"),
            Family::DdotV0(a) => format!("ddotV0[{a}]"),
            Family::DddotU0(a, v) => format!("dddotU0[{a},{v}]"),
            Family::DddotV0(a, v) => format!("dddotV0[{a},{v}]"),
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            Family::V | Family::DotV(_) | Family::DdotV(_) | Family::DddotV(..) | Family::DdotV0(_) | Family::DddotV0(..)
        )
    }

    fn anchors(&self) -> Vec<usize> {
        match *self {
            Family::U | Family::V => vec![],
            Family::DotU(a) | Family::DotV(a) | Family::DdotU(a) | Family::DdotV(a) => vec![a],
            Family::DdotU0(a) | Family::DdotV0(a) => vec![a],
            Family::DddotU(a, v) | Family::DddotV(a, v) | Family::DddotU0(a, v) | Family::DddotV0(a, v) => vec![a, v],
        }
    }
}

/// Building blocks for one graph, one `m` and one closing mode.
#[derive(Debug, Clone)]
pub struct DiagramFields {
    pub n: usize,
    pub m: ChainLength,
    pub mode: Mode,
    pub g: Array2<f64>,
    pub tau: Array2<f64>,
    /// `G̃ = τ * G`.
    pub gt: Array2<f64>,
    /// `δ + τ²`.
    pub e: Array2<f64>,
    /// `ψ^m`, with `ψ⁰ = G²`.
    pub psi: Array2<f64>,
    /// `Σ_{j=1}^{m} (G̃²)^{*j}`, the `V` chain.
    pub c: Array2<f64>,
    /// `Σ_{j=0}^{m−1} (G̃²)^{*j}`, the chains around the triangle.
    pub bsum: Array2<f64>,
    /// `Bsum * (δ + τ²)`.
    q: Array2<f64>,
    /// `T(v₁, v₂, v₃)` stored at `(v₁·n + v₂)·n + v₃`.
    t: Vec<f64>,
    /// Sum of the certified tails added to the chain sums.
    pub tail: f64,
}

/// Truncated lower sums stop adding terms past this sup, which keeps them
/// finite when the full series diverges; any partial sum is a lower value.
pub const LOWER_CEILING: f64 = 1e20;

fn chain_sum(gt: &Array2<f64>, len: ChainLength, start: usize, mode: Mode) -> Result<(Array2<f64>, f64)> {
    if let (ChainLength::Infinite, Mode::Lower { terms }) = (len, mode) {
        let h = gt * gt;
        let mut power = Array2::eye(gt.nrows());
        let mut acc = Array2::zeros(gt.raw_dim());
        for j in 0..terms.max(1) + start {
            if j >= start {
                let next = &acc + &power;
                if j > start && next.iter().any(|&v: &f64| v > LOWER_CEILING) {
                    break;
                }
                acc = next;
            }
            power = power.dot(&h);
        }
        return Ok((acc, 0.0));
    }
    let b = bubble_chain(&LatticeField::from_matrix(gt)?, len, start, &DirectConvolver)?;
    Ok((b.field.matrix()?, b.tail))
}

impl DiagramFields {
    /// Builds the blocks from `G` and `τ`; in upper mode an infinite `m`
    /// needs `ρ(G̃²) < 1` and fails with `DivergentChain` otherwise.
    pub fn new(g: &Array2<f64>, tau: &Array2<f64>, m: ChainLength, mode: Mode) -> Result<Self> {
        let n = g.nrows();
        if g.dim() != (n, n) || tau.dim() != (n, n) {
            return Err(Error::GeometryMismatch);
        }
        for (index, &value) in g.iter().chain(tau.iter()).enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::NegativeField { index: index % (n * n), value });
            }
        }
        let gt = tau.dot(g);
        let id = Array2::<f64>::eye(n);
        let e = &id + &tau.mapv(|v| v * v);
        let mut tail = 0.0;
        let (psi, c, bsum) = match m {
            ChainLength::Finite(0) => (g.mapv(|v| v * v), Array2::zeros((n, n)), Array2::zeros((n, n))),
            _ => {
                let (s0, t0) = chain_sum(&gt, m, 0, mode)?;
                let (c, t1) = chain_sum(&gt, m, 1, mode)?;
                let bl = match m {
                    ChainLength::Finite(k) => ChainLength::Finite(k - 1),
                    ChainLength::Infinite => ChainLength::Infinite,
                };
                let (bsum, t2) = chain_sum(&gt, bl, 0, mode)?;
                tail = t0 + t1 + t2;
                (e.dot(&s0).dot(&e), c, bsum)
            }
        };
        let q = bsum.dot(&e);
        let mut t = vec![0.0; n * n * n];
        for v1 in 0..n {
            for v2 in 0..n {
                for v3 in 0..n {
                    t[(v1 * n + v2) * n + v3] = triangle_t(g, v1, v2, v3);
                }
            }
        }
        Ok(DiagramFields { n, m, mode, g: g.clone(), tau: tau.clone(), gt, e, psi, c, bsum, q, t, tail })
    }

    pub fn triangle(&self, v1: usize, v2: usize, v3: usize) -> f64 {
        self.t[(v1 * self.n + v2) * self.n + v3]
    }

    /// `Tz_a[v₁][v₂] = Σ_{v₃} Bsum[v₃][a]·T(v₁, v₂, v₃)`.
    fn tz(&self, a: usize) -> Array2<f64> {
        let n = self.n;
        Array2::from_shape_fn((n, n), |(v1, v2)| (0..n).map(|v3| self.bsum[[v3, a]] * self.triangle(v1, v2, v3)).sum())
    }

    /// `R_a[z][y′] = Σ E(z−u₁)E(y′−u₂) Π B(u_i−v_i) T(v₁,v₂,v₃)` with `u₃ = a`.
    pub fn r(&self, a: usize) -> Array2<f64> {
        self.q.t().dot(&self.tz(a)).dot(&self.q)
    }

    /// `S_a[z][x]`, the same sum with `u₂ = x` in place of the `E(y′−u₂)` factor.
    pub fn s(&self, a: usize) -> Array2<f64> {
        self.q.t().dot(&self.tz(a)).dot(&self.bsum)
    }

    /// `(G *_a G̃)(y, z′) = G[y][a]·G̃[a][z′]` as a matrix in `(y, z′)`.
    fn g_a_gt(&self, a: usize) -> Array2<f64> {
        let n = self.n;
        Array2::from_shape_fn((n, n), |(y, z)| self.g[[y, a]] * self.gt[[a, z]])
    }

    /// `(G̃ *_a G)(y′, z′) = G̃[y′][a]·G[a][z′]`.
    fn gt_a_g(&self, a: usize) -> Array2<f64> {
        let n = self.n;
        Array2::from_shape_fn((n, n), |(y, z)| self.gt[[y, a]] * self.g[[a, z]])
    }

    /// `(G *_v G)(z, y′) = G[z][v]·G[v][y′]`.
    fn g_v_g(&self, v: usize) -> Array2<f64> {
        let n = self.n;
        Array2::from_shape_fn((n, n), |(z, y)| self.g[[z, v]] * self.g[[v, y]])
    }

    fn check_anchors(&self, family: Family) -> Result<()> {
        match family.anchors().into_iter().find(|&a| a >= self.n) {
            Some(a) => Err(Error::UnknownVertex(a.to_string())),
            None => Ok(()),
        }
    }

    fn dot_prefactors(&self, a: usize) -> [[Array2<f64>; 2]; 2] {
        [[self.g_a_gt(a), self.g.clone()], [self.gt.clone(), self.gt_a_g(a)]]
    }

    /// A non-terminal family as a pair kernel.
    pub fn kernel(&self, family: Family) -> Result<Box<dyn PairKernel>> {
        self.check_anchors(family)?;
        let label = family.label();
        let with = |pre: [[Array2<f64>; 2]; 2], f3: Array2<f64>| {
            pre.into_iter().map(|[f1, f2]| [f1, f2, f3.clone()]).collect::<Vec<_>>()
        };
        let terms = match family {
            Family::U => vec![[self.gt.clone(), self.g.clone(), self.psi.clone()]],
            Family::DotU(a) => with(self.dot_prefactors(a), self.psi.clone()),
            Family::DdotU(a) => vec![[self.gt.clone(), self.g.clone(), self.r(a)]],
            Family::DddotU(a, v) => with(self.dot_prefactors(a), self.r(v)),
            Family::DdotU0(a) => vec![[self.gt.clone(), self.g.clone(), &self.g * &self.g_v_g(a)]],
            Family::DddotU0(a, v) => with(self.dot_prefactors(a), &self.g * &self.g_v_g(v)),
            _ => return Err(Error::InvalidParameters(format!("{label} is a terminal family"))),
        };
        Ok(Box::new(ProductKernel { label, terms }))
    }

    /// A terminal family closing chains at every `x`.
    pub fn terminal(&self, family: Family) -> Result<Box<dyn TerminalKernel>> {
        self.check_anchors(family)?;
        let label = family.label();
        let gt_v_g = |v: usize| {
            let n = self.n;
            Array2::from_shape_fn((n, n), |(z, x)| self.gt[[z, x]] * self.gt[[z, v]] * self.g[[v, x]])
        };
        let (terms, gate) = match family {
            Family::V => (vec![[self.gt.clone(), self.c.clone()]], false),
            Family::DotV(a) => (vec![[self.g_a_gt(a), self.c.clone()]], false),
            Family::DdotV(a) => (vec![[self.gt.clone(), self.s(a)]], true),
            Family::DddotV(a, v) => (vec![[self.g_a_gt(a), self.s(v)]], true),
            Family::DdotV0(a) => (vec![[self.gt.clone(), gt_v_g(a)]], false),
            Family::DddotV0(a, v) => (vec![[self.g_a_gt(a), gt_v_g(v)]], false),
            _ => return Err(Error::InvalidParameters(format!("{label} is not a terminal family"))),
        };
        Ok(Box::new(ProductTerminal { label, terms, gate }))
    }
}
