use rustfft::num_complex::Complex;

use super::convolve::{forward, inverse_real};
use super::{weighted_norm, Convolver, Geometry, LatticeField};
use crate::coupling_graph::{spread_out_coupling, SpreadOutSpec};
use crate::error::{Error, Result};

/// One-step distribution `D` of the spread-out model wrapped onto the torus.
pub fn spread_out_field(spec: &SpreadOutSpec, side: usize) -> Result<LatticeField> {
    if (side as f64) <= 2.0 * spec.range.floor() {
        return Err(Error::TorusTooSmall { side, range: spec.range });
    }
    let j = spread_out_coupling(spec)?;
    let geometry = Geometry::Torus { dimension: spec.dimension, side };
    let mut f = LatticeField::zeros(geometry);
    let mut values = f.values().to_vec();
    for (x, w) in j.support() {
        values[f.index_of(x)] += w;
    }
    f = LatticeField::new(geometry, values)?;
    Ok(f)
}

/// `S_p = Σ_n p^n D^{*n}` by spectral inversion of `1 − pD̂`.
pub fn rw_green_proxy(spec: &SpreadOutSpec, side: usize, p: f64) -> Result<LatticeField> {
    let d = spread_out_field(spec, side)?;
    green_of(&d, p)
}

fn green_of(d: &LatticeField, p: f64) -> Result<LatticeField> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::DivergentChain { rho: p });
    }
    let Geometry::Torus { dimension, side } = d.geometry() else { return Err(Error::GeometryMismatch) };
    let hat = forward(d, dimension, side);
    let inv: Vec<Complex<f64>> = hat.into_iter().map(|z| Complex::new(1.0, 0.0) / (Complex::new(1.0, 0.0) - z * p)).collect();
    Ok(inverse_real(inv, d.geometry()))
}

/// Proxy two-point data on a torus: `τ = pD`, `G = S_p`, `G̃ = τ * G`, `θ = L^{-2}`.
#[derive(Debug, Clone)]
pub struct ProxyFields {
    pub spec: SpreadOutSpec,
    pub side: usize,
    pub p: f64,
    pub theta: f64,
    pub tau: LatticeField,
    pub g: LatticeField,
    pub tilde_g: LatticeField,
    /// Fraction of the mass of `G̃` at sup-distance beyond `side/4`.
    pub far_mass: f64,
}

impl ProxyFields {
    pub fn build(spec: &SpreadOutSpec, side: usize, p: f64, conv: &dyn Convolver) -> Result<Self> {
        let d = spread_out_field(spec, side)?;
        let g = green_of(&d, p)?;
        let tau = d.scale(p)?;
        let tilde_g = conv.convolve(&tau, &g)?;
        let quarter = (side / 4) as i64;
        let far: f64 = (0..tilde_g.len())
            .filter(|&i| tilde_g.coords(i).iter().any(|c| c.abs() > quarter))
            .map(|i| tilde_g.values()[i])
            .sum();
        let far_mass = far / tilde_g.sum().max(f64::MIN_POSITIVE);
        Ok(ProxyFields { spec: *spec, side, p, theta: spec.theta(), tau, g, tilde_g, far_mass })
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn range(&self) -> f64 {
        self.spec.range
    }

    /// `θ⟨x⟩_L^{2−d}`.
    pub fn envelope(&self, x: &[i64]) -> f64 {
        self.theta * weighted_norm(x, self.range()).powf(2.0 - self.dimension() as f64)
    }

    pub fn hypotheses(&self, conv: &dyn Convolver) -> Result<HypReport> {
        let n = self.g.len();
        let mut sup_g = 0.0f64;
        let mut c2 = 0.0f64;
        let mut below = 0usize;
        let delta = LatticeField::delta(self.g.geometry());
        // Both sides come out of transforms whose absolute error scales with the total mass.
        let roundoff = 64.0 * f64::EPSILON * self.g.sum();
        for i in 0..n {
            let x = self.g.coords(i);
            let gi = self.g.values()[i];
            let gt = self.tilde_g.values()[i];
            if gi - delta.values()[i] > gt + roundoff {
                below += 1;
            }
            if i != 0 {
                let env = self.envelope(&x);
                sup_g = sup_g.max(gi / env);
                c2 = c2.max(gt / env);
            }
        }
        let hyp1 = self.tau.sum().max(sup_g);
        let t1 = conv.convolve(&self.tau, &self.tilde_g)?;
        let t2 = conv.convolve(&self.tau, &t1)?;
        let ratio = |f: &LatticeField| {
            f.values().iter().zip(self.tilde_g.values()).filter(|(_, &d)| d > 0.0).map(|(a, d)| a / d).fold(0.0, f64::max)
        };
        Ok(HypReport { hyp1, hyp1_holds: hyp1 <= 2.0, hyp2_violations: below, hyp2_constant: c2, hyp3_constants: [ratio(&t1), ratio(&t2)] })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypReport {
    /// `‖τ‖₁ ∨ sup_{x≠o} G(x)/(θ⟨x⟩^{2−d})`.
    pub hyp1: f64,
    pub hyp1_holds: bool,
    /// Sites with `G − δ > G̃`.
    pub hyp2_violations: usize,
    /// `sup_{x≠o} G̃(x)/(θ⟨x⟩^{2−d})`.
    pub hyp2_constant: f64,
    /// `sup (τ^{*j} * G̃)/G̃` for `j = 1, 2`.
    pub hyp3_constants: [f64; 2],
}

/// Elimination of a degree-4 vertex `x` with lines `u–x`, `x–u′`, `v–x`,
/// `x–v′`, each carried by `G` or `G̃`, bounded by a product of two lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reduction {
    /// All four lines `G̃`.
    AllTilde,
    /// `u–x` carries `G`.
    OneFull,
    /// Both lines of the `(u, u′)` pair carry `G`.
    FullPair,
    /// One `G` in each pair, on `u–x` and `v–x`.
    CrossedSame,
    /// One `G` in each pair, on `u–x` and `x–v′`.
    CrossedOpposite,
    /// Three lines carry `G`.
    ThreeFull,
    /// All four lines `G`.
    AllFull,
}

impl Reduction {
    pub const ALL: [Reduction; 7] = [
        Reduction::AllTilde,
        Reduction::OneFull,
        Reduction::FullPair,
        Reduction::CrossedSame,
        Reduction::CrossedOpposite,
        Reduction::ThreeFull,
        Reduction::AllFull,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Reduction::AllTilde => "all-tilde",
            Reduction::OneFull => "one-full",
            Reduction::FullPair => "full-pair",
            Reduction::CrossedSame => "crossed-same",
            Reduction::CrossedOpposite => "crossed-opposite",
            Reduction::ThreeFull => "three-full",
            Reduction::AllFull => "all-full",
        }
    }

    /// Whether the ratio is expected to carry a factor `L^{-d}`.
    pub fn gains_volume_factor(&self) -> bool {
        matches!(self, Reduction::AllTilde | Reduction::OneFull | Reduction::FullPair)
    }

    /// `[u–x, x–u′, v–x, x–v′, (u,u′), (v,v′)]`, `true` meaning `G`.
    fn lines(&self) -> [bool; 6] {
        match self {
            Reduction::AllTilde => [false, false, false, false, false, false],
            Reduction::OneFull => [true, false, false, false, false, false],
            Reduction::FullPair => [true, true, false, false, true, false],
            Reduction::CrossedSame => [true, false, true, false, false, false],
            Reduction::CrossedOpposite => [true, false, false, true, false, false],
            Reduction::ThreeFull => [true, true, true, false, true, false],
            Reduction::AllFull => [true, true, true, true, true, true],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionRatio {
    pub reduction: Reduction,
    /// `sup LHS/RHS` over `u = o`, all `u′`, and the sampled `(v, v′)`, plus the diagonal `v = u`, `v′ = u′`.
    pub ratio: f64,
}

fn axis_samples(d: usize, side: usize) -> Vec<Vec<i64>> {
    let half = (side / 2) as i64;
    let mut pts: Vec<Vec<i64>> = Vec::new();
    let mut push = |mut p: Vec<i64>| {
        p.resize(d, 0);
        if p.iter().all(|c| c.abs() <= half) && !pts.contains(&p) {
            pts.push(p);
        }
    };
    push(vec![0]);
    push(vec![2]);
    push(vec![4]);
    if d >= 2 {
        push(vec![2, 2]);
    }
    push(vec![6]);
    pts
}

/// Measured sup-ratios of every reduction on proxy fields.
pub fn reduction_ratios(fields: &ProxyFields) -> Result<Vec<ReductionRatio>> {
    let geometry = fields.g.geometry();
    let Geometry::Torus { dimension, side } = geometry else { return Err(Error::GeometryMismatch) };
    let pick = |full: bool| if full { &fields.g } else { &fields.tilde_g };
    let samples = axis_samples(dimension, side);
    let hat_g = forward(&fields.g, dimension, side);
    let hat_gt = forward(&fields.tilde_g, dimension, side);
    let mut out = Vec::new();
    for r in Reduction::ALL {
        let [a, b, c, d, r1, r2] = r.lines();
        let (fa, fc, fd) = (pick(a), pick(c), pick(d));
        let (fr1, fr2) = (pick(r1), pick(r2));
        let hat_b = if b { &hat_g } else { &hat_gt };
        let fd_reflected = fd.reflect();
        let mut sup = 0.0f64;
        for v in &samples {
            let cv = fc.translate(v)?;
            for vp in &samples {
                let dv = fd_reflected.translate(vp)?;
                let p = fa.mul(&cv)?.mul(&dv)?;
                let lhs = spectral_with(&p, hat_b);
                let diff: Vec<i64> = vp.iter().zip(v).map(|(x, y)| x - y).collect();
                let rhs_v = fr2.at(&diff);
                for (i, &l) in lhs.values().iter().enumerate() {
                    let rhs = fr1.values()[i] * rhs_v;
                    if rhs > 0.0 {
                        sup = sup.max(l / rhs);
                    }
                }
            }
        }
        let pb = pick(b).mul(fd)?;
        let diag = spectral_with(&fa.mul(fc)?, &forward(&pb, dimension, side));
        for (i, &l) in diag.values().iter().enumerate() {
            let rhs = fr1.values()[i] * fr2.values()[i];
            if rhs > 0.0 {
                sup = sup.max(l / rhs);
            }
        }
        out.push(ReductionRatio { reduction: r, ratio: sup });
    }
    Ok(out)
}

fn spectral_with(f: &LatticeField, hat: &[Complex<f64>]) -> LatticeField {
    let Geometry::Torus { dimension, side } = f.geometry() else { unreachable!("torus only") };
    let a = forward(f, dimension, side);
    inverse_real(a.into_iter().zip(hat).map(|(x, y)| x * y).collect(), f.geometry())
}

#[cfg(test)]
mod tests {
    use super::super::SpectralConvolver;
    use super::*;

    fn nn(d: usize) -> SpreadOutSpec {
        SpreadOutSpec::uniform(d, 1.0)
    }

    #[test]
    fn zero_fugacity_is_delta() {
        let s = rw_green_proxy(&nn(2), 5, 0.0).unwrap();
        assert!(s.max_relative_difference(&LatticeField::delta(s.geometry())).unwrap() < 1e-15);
    }

    #[test]
    fn matches_linear_solve_on_a_ring() {
        // d=1, side=4, D = ½ on ±1, p = ½: (I − pD)^{-1} first column by hand.
        let s = rw_green_proxy(&nn(1), 4, 0.5).unwrap();
        // Circulant [1, -1/4, 0, -1/4]; inverse entries from its eigenvalues 1/2, 1, 3/2, 1.
        let eig = [0.5f64, 1.0, 1.5, 1.0];
        for x in 0..4 {
            let oracle: f64 = (0..4).map(|k| (2.0 * std::f64::consts::PI * (k * x) as f64 / 4.0).cos() / eig[k]).sum::<f64>() / 4.0;
            assert!((s.at(&[x as i64]) - oracle).abs() < 1e-14);
        }
    }

    #[test]
    fn total_mass_is_geometric() {
        for p in [0.2, 0.5, 0.9] {
            let s = rw_green_proxy(&SpreadOutSpec::uniform(2, 2.0), 9, p).unwrap();
            assert!((s.sum() - 1.0 - p / (1.0 - p)).abs() < 1e-10);
        }
        assert!(matches!(rw_green_proxy(&nn(1), 4, 1.0), Err(Error::DivergentChain { .. })));
    }

    #[test]
    fn proxy_tilde_g_is_g_minus_delta() {
        let f = ProxyFields::build(&SpreadOutSpec::uniform(2, 1.0), 8, 0.6, &SpectralConvolver).unwrap();
        let gm = f.g.zip_with(&LatticeField::delta(f.g.geometry()), |a, b| (a - b).max(0.0)).unwrap();
        assert!(gm.max_relative_difference(&f.tilde_g).unwrap() < 1e-14);
        let h = f.hypotheses(&SpectralConvolver).unwrap();
        assert_eq!(h.hyp2_violations, 0);
        assert!((f.tau.sum() - 0.6).abs() < 1e-14);
    }
}
