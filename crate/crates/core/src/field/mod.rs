//! Nonnegative fields on periodic boxes and on finite graphs.
//!
//! A torus field stores one value per site of `(Z/side)^d`, read as a
//! function of the offset from the origin. A graph field stores an `n × n`
//! matrix `F[a][b]`, read as the value for the ordered pair `(a, b)`;
//! convolution on graphs is the matrix product.

mod chain;
mod convbd;
mod convolve;
mod dump;
mod proxy;

pub use chain::{bubble_chain, psi1_chain, triangle_t, BubbleChain, ChainLength, Psi1Report};
pub use convbd::{convolution_bound_check, convolution_bound_stability, ConvBoundReport};
pub use convolve::{convolver, convolver_names, Convolver, DirectConvolver, SpectralConvolver};
pub use dump::{read_binary, read_text, write_binary, write_text};
pub use proxy::{
    reduction_ratios, rw_green_proxy, spread_out_field, HypReport, ProxyFields, Reduction, ReductionRatio,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Geometry {
    Torus { dimension: usize, side: usize },
    Graph { vertices: usize },
}

impl Geometry {
    pub fn len(&self) -> usize {
        match *self {
            Geometry::Torus { dimension, side } => side.pow(dimension as u32),
            Geometry::Graph { vertices } => vertices * vertices,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    geometry: Geometry,
    values: Vec<f64>,
}

impl LatticeField {
    /// Rejects negative or non-finite entries.
    pub fn new(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::GeometryMismatch);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NegativeField { index, value });
        }
        Ok(LatticeField { geometry, values })
    }

    /// Constructor for results of operations that preserve nonnegativity.
    pub(crate) fn from_parts(geometry: Geometry, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), geometry.len());
        LatticeField { geometry, values }
    }

    pub fn zeros(geometry: Geometry) -> Self {
        Self::from_parts(geometry, vec![0.0; geometry.len()])
    }

    /// Kronecker delta at the origin, or the identity matrix on a graph.
    pub fn delta(geometry: Geometry) -> Self {
        let mut f = Self::zeros(geometry);
        match geometry {
            Geometry::Torus { .. } => f.values[0] = 1.0,
            Geometry::Graph { vertices } => (0..vertices).for_each(|a| f.values[a * vertices + a] = 1.0),
        }
        f
    }

    pub fn from_matrix(m: &Array2<f64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::GeometryMismatch);
        }
        Self::new(Geometry::Graph { vertices: r }, m.iter().copied().collect())
    }

    /// Builds a torus field from a function of the centred offset.
    pub fn torus_from_fn(dimension: usize, side: usize, f: impl Fn(&[i64]) -> f64) -> Result<Self> {
        let geometry = Geometry::Torus { dimension, side };
        let values = (0..geometry.len()).map(|i| f(&centred(i, dimension, side))).collect();
        Self::new(geometry, values)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matrix(&self) -> Result<Array2<f64>> {
        match self.geometry {
            Geometry::Graph { vertices } => {
                Ok(Array2::from_shape_vec((vertices, vertices), self.values.clone()).expect("square storage"))
            }
            Geometry::Torus { .. } => Err(Error::GeometryMismatch),
        }
    }

    /// Value at a torus offset (wrapped) or at a graph pair `[a, b]`.
    pub fn at(&self, point: &[i64]) -> f64 {
        self.values[self.index_of(point)]
    }

    pub fn index_of(&self, point: &[i64]) -> usize {
        match self.geometry {
            Geometry::Torus { side, dimension } => {
                debug_assert_eq!(point.len(), dimension);
                let s = side as i64;
                point.iter().rev().fold(0usize, |acc, &c| acc * side + c.rem_euclid(s) as usize)
            }
            Geometry::Graph { vertices } => point[0] as usize * vertices + point[1] as usize,
        }
    }

    /// Centred torus coordinates of a storage index, each in `(-side/2, side/2]`.
    pub fn coords(&self, index: usize) -> Vec<i64> {
        match self.geometry {
            Geometry::Torus { dimension, side } => centred(index, dimension, side),
            Geometry::Graph { vertices } => vec![(index / vertices) as i64, (index % vertices) as i64],
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.geometry, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_geometry(other)?;
        Self::new(self.geometry, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn square(&self) -> Self {
        Self::from_parts(self.geometry, self.values.iter().map(|v| v * v).collect())
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `x ↦ f(-x)` on a torus, the transpose on a graph.
    pub fn reflect(&self) -> Self {
        let values = (0..self.len())
            .map(|i| {
                let c: Vec<i64> = self.coords(i).iter().map(|v| -v).collect();
                match self.geometry {
                    Geometry::Torus { .. } => self.at(&c),
                    Geometry::Graph { .. } => self.at(&[-c[1], -c[0]]),
                }
            })
            .collect();
        Self::from_parts(self.geometry, values)
    }

    /// Torus translate `x ↦ f(x - v)`.
    pub fn translate(&self, v: &[i64]) -> Result<Self> {
        if !matches!(self.geometry, Geometry::Torus { .. }) {
            return Err(Error::GeometryMismatch);
        }
        let values = (0..self.len())
            .map(|i| {
                let c: Vec<i64> = self.coords(i).iter().zip(v).map(|(a, b)| a - b).collect();
                self.at(&c)
            })
            .collect();
        Ok(Self::from_parts(self.geometry, values))
    }

    /// Largest entrywise difference relative to `max(1, sup)`.
    pub fn max_relative_difference(&self, other: &Self) -> Result<f64> {
        self.same_geometry(other)?;
        let scale = self.sup().max(other.sup()).max(1.0);
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale)
    }

    pub(crate) fn same_geometry(&self, other: &Self) -> Result<()> {
        if self.geometry == other.geometry {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }
}

fn centred(mut index: usize, dimension: usize, side: usize) -> Vec<i64> {
    let half = (side / 2) as i64;
    (0..dimension)
        .map(|_| {
            let c = (index % side) as i64;
            index /= side;
            if c > half {
                c - side as i64
            } else {
                c
            }
        })
        .collect()
}

/// `⟨x⟩_L = max(|x|, L)` with the Euclidean norm.
pub fn weighted_norm(x: &[i64], l: f64) -> f64 {
    let r = x.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    r.max(l)
}

/// Torus field `x ↦ ⟨x⟩_L^{-a}`.
pub fn power_field(dimension: usize, side: usize, l: f64, a: f64) -> Result<LatticeField> {
    if l <= 0.0 {
        return Err(Error::InvalidParameters("L must be positive".into()));
    }
    LatticeField::torus_from_fn(dimension, side, |x| weighted_norm(x, l).powf(-a))
}

/// `τ(b − a) = tanh(βJ_{ab})` as a graph field.
pub fn tau_field(g: &crate::coupling_graph::CouplingGraph) -> LatticeField {
    let n = g.num_vertices();
    LatticeField::from_parts(Geometry::Graph { vertices: n }, g.tau_matrix())
}

/// Finite-volume two-point function as a graph field.
pub fn two_point_field(g: &crate::coupling_graph::CouplingGraph, caps: &crate::current::Caps) -> Result<LatticeField> {
    let n = g.num_vertices();
    LatticeField::new(Geometry::Graph { vertices: n }, crate::current::two_point_matrix(g, caps)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_mismatched_storage() {
        let g = Geometry::Torus { dimension: 1, side: 3 };
        assert!(matches!(LatticeField::new(g, vec![0.0, -1.0, 0.0]), Err(Error::NegativeField { index: 1, .. })));
        assert_eq!(LatticeField::new(g, vec![0.0; 2]), Err(Error::GeometryMismatch));
    }

    #[test]
    fn centred_coordinates_and_wrapping() {
        let f = LatticeField::torus_from_fn(2, 4, |x| (10 * x[0] + x[1] + 30) as f64).unwrap();
        assert_eq!(f.at(&[1, -1]), 39.0);
        assert_eq!(f.at(&[5, 3]), 39.0);
        assert_eq!(f.coords(f.index_of(&[-1, 2])), vec![-1, 2]);
    }

    #[test]
    fn weighted_norm_cases() {
        assert_eq!(weighted_norm(&[0, 0], 3.0), 3.0);
        assert_eq!(weighted_norm(&[6, 8], 5.0), 10.0);
        assert_eq!(weighted_norm(&[4, 0], 2.0), 4.0);
        let p = power_field(1, 16, 2.0, 1.5).unwrap();
        for r in 0..8 {
            assert!(p.at(&[r + 1]) <= p.at(&[r]));
        }
    }

    #[test]
    fn reflect_is_transpose_on_graphs() {
        let m = ndarray::arr2(&[[0.0, 1.0], [2.0, 3.0]]);
        let f = LatticeField::from_matrix(&m).unwrap();
        assert_eq!(f.reflect().matrix().unwrap(), m.t().to_owned());
        let t = LatticeField::torus_from_fn(1, 5, |x| (x[0] + 2) as f64).unwrap();
        assert_eq!(t.reflect().at(&[1]), 1.0);
    }
}
