use ndarray::{Array1, Array2, Zip};

/// Values on ordered vertex pairs `(y, z)`.
pub type PairField = Array2<f64>;

/// `δ` at `(o, o)`.
pub fn pair_delta(n: usize, o: usize) -> PairField {
    let mut p = Array2::zeros((n, n));
    p[[o, o]] = 1.0;
    p
}

/// Total mass of a nonnegative pair field.
pub fn mass(p: &PairField) -> f64 {
    p.sum()
}

/// A four-point kernel `K(y, z; y′, z′)` acting on pair fields.
pub trait PairKernel: Send + Sync {
    fn label(&self) -> String;

    /// `Q(y′, z′) = Σ_{y,z} P(y, z) K(y, z; y′, z′)`.
    fn apply(&self, p: &PairField) -> PairField;

    /// `(Kf)(y, z) = Σ_{y′,z′} K(y, z; y′, z′) f(y′, z′)`.
    fn pull(&self, f: &PairField) -> PairField;

    fn entry(&self, y: usize, z: usize, y2: usize, z2: usize) -> f64;

    fn size(&self) -> usize;

    /// `sup_{y,z} Σ_{y′,z′} K(y, z; y′, z′)`, the norm of `apply` in total mass.
    fn norm(&self) -> f64 {
        let n = self.size();
        self.pull(&Array2::ones((n, n))).iter().copied().fold(0.0, f64::max)
    }
}

/// A terminal kernel `V(y, z; x)` closing a chain at every `x` at once.
pub trait TerminalKernel: Send + Sync {
    fn label(&self) -> String;

    /// `x ↦ Σ_{y,z} P(y, z) V(y, z; x)`.
    fn close(&self, p: &PairField) -> Array1<f64>;

    fn entry(&self, y: usize, z: usize, x: usize) -> f64;

    fn size(&self) -> usize;

    /// `x ↦ sup_{y,z} V(y, z; x)`.
    fn sup(&self) -> Array1<f64> {
        let n = self.size();
        Array1::from_iter((0..n).map(|x| {
            let mut m = 0.0f64;
            for y in 0..n {
                for z in 0..n {
                    m = m.max(self.entry(y, z, x));
                }
            }
            m
        }))
    }
}

/// `Σ_t F1_t[y][z′]·F2_t[y′][z′]·F3_t[z][y′]`.
#[derive(Debug, Clone)]
pub struct ProductKernel {
    pub label: String,
    pub terms: Vec<[Array2<f64>; 3]>,
}

impl PairKernel for ProductKernel {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn apply(&self, p: &PairField) -> PairField {
        let n = p.nrows();
        let mut out = Array2::zeros((n, n));
        for [f1, f2, f3] in &self.terms {
            let inner = f3.t().dot(&p.t()).dot(f1);
            Zip::from(&mut out).and(f2).and(&inner).for_each(|o, &a, &b| *o += a * b);
        }
        out
    }

    fn pull(&self, f: &PairField) -> PairField {
        let n = f.nrows();
        let mut out = Array2::zeros((n, n));
        for [f1, f2, f3] in &self.terms {
            let w = f2 * f;
            out += &f1.dot(&f3.dot(&w).t());
        }
        out
    }

    fn entry(&self, y: usize, z: usize, y2: usize, z2: usize) -> f64 {
        self.terms.iter().map(|[f1, f2, f3]| f1[[y, z2]] * f2[[y2, z2]] * f3[[z, y2]]).sum()
    }

    fn size(&self) -> usize {
        self.terms.first().map_or(0, |t| t[0].nrows())
    }
}

/// `Σ_t F1_t[y][x]·F3_t[z][x]`, optionally gated by `z ≠ x`.
#[derive(Debug, Clone)]
pub struct ProductTerminal {
    pub label: String,
    pub terms: Vec<[Array2<f64>; 2]>,
    pub gate: bool,
}

impl TerminalKernel for ProductTerminal {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn close(&self, p: &PairField) -> Array1<f64> {
        let n = p.nrows();
        let mut out = Array1::zeros(n);
        for [f1, f3] in &self.terms {
            let mut f3 = f3.clone();
            if self.gate {
                f3.diag_mut().fill(0.0);
            }
            // Σ_{y,z} P[y][z] F1[y][x] F3[z][x] = Σ_z (Pᵀ F1)[z][x] F3[z][x].
            let a = p.t().dot(f1);
            out += &(&a * &f3).sum_axis(ndarray::Axis(0));
        }
        out
    }

    fn entry(&self, y: usize, z: usize, x: usize) -> f64 {
        if self.gate && z == x {
            return 0.0;
        }
        self.terms.iter().map(|[f1, f3]| f1[[y, x]] * f3[[z, x]]).sum()
    }

    fn size(&self) -> usize {
        self.terms.first().map_or(0, |t| t[0].nrows())
    }
}

/// Fully materialized four-index kernel evaluated by quadruple sums.
#[derive(Debug, Clone)]
pub struct DenseKernel {
    pub label: String,
    n: usize,
    data: Vec<f64>,
}

impl DenseKernel {
    pub fn from_fn(label: impl Into<String>, n: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n.pow(4));
        for y in 0..n {
            for z in 0..n {
                for y2 in 0..n {
                    for z2 in 0..n {
                        data.push(f(y, z, y2, z2));
                    }
                }
            }
        }
        DenseKernel { label: label.into(), n, data }
    }

    pub fn materialize(k: &dyn PairKernel) -> Self {
        Self::from_fn(k.label(), k.size(), |a, b, c, d| k.entry(a, b, c, d))
    }

    fn at(&self, y: usize, z: usize, y2: usize, z2: usize) -> f64 {
        let n = self.n;
        self.data[((y * n + z) * n + y2) * n + z2]
    }
}

impl PairKernel for DenseKernel {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn apply(&self, p: &PairField) -> PairField {
        let n = self.n;
        Array2::from_shape_fn((n, n), |(y2, z2)| {
            let mut s = 0.0;
            for y in 0..n {
                for z in 0..n {
                    s += p[[y, z]] * self.at(y, z, y2, z2);
                }
            }
            s
        })
    }

    fn pull(&self, f: &PairField) -> PairField {
        let n = self.n;
        Array2::from_shape_fn((n, n), |(y, z)| {
            let mut s = 0.0;
            for y2 in 0..n {
                for z2 in 0..n {
                    s += self.at(y, z, y2, z2) * f[[y2, z2]];
                }
            }
            s
        })
    }

    fn entry(&self, y: usize, z: usize, y2: usize, z2: usize) -> f64 {
        self.at(y, z, y2, z2)
    }

    fn size(&self) -> usize {
        self.n
    }
}
