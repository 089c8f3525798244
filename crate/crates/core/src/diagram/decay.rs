use crate::error::{Error, Result};
use crate::field::{weighted_norm, Convolver, LatticeField, ProxyFields};

/// `X¹_{o,x}` at `x = r·e₁`, split into the chain orders.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayPoint {
    pub r: i64,
    /// `V¹(o,o;x) = G̃(x)³`.
    pub t0: f64,
    /// `(U¹ ⋆ V¹)_{o,x}`.
    pub t1: f64,
    /// Geometric estimate `t1·q/(1−q)` of the higher orders, `q = t1/t0`.
    pub tail: f64,
    pub value: f64,
    /// `X¹ / (θ³ ⟨x⟩_L^{−3(d−2)})`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub dimension: usize,
    pub side: usize,
    pub range: f64,
    pub points: Vec<DecayPoint>,
    /// Minus the least-squares slope of `ln X¹` against `ln ⟨x⟩_L`.
    pub exponent: f64,
    pub prefactor: f64,
    pub target: f64,
    /// Too few resolvable points for a fit.
    pub degenerate: bool,
    /// Orders beyond the first are estimated, not summed.
    pub tail_estimated: bool,
}

/// Fits the decay of `X¹` along the first axis for `r` from `⌈L⌉` to `side/2`.
pub fn decay_trend(fields: &ProxyFields, conv: &dyn Convolver) -> Result<DecayReport> {
    let hyp = fields.hypotheses(conv)?;
    if !hyp.hyp1_holds {
        return Err(Error::Hypothesis(format!("G(x) ≤ δ + θ·envelope fails with constant {}", hyp.hyp1)));
    }
    let d = fields.dimension();
    let l = fields.range();
    let gt = &fields.tilde_g;
    let geometry = gt.geometry();
    let delta = LatticeField::delta(geometry);
    let h = gt.square();
    let e = delta.add(&fields.tau.square())?;
    let psi = conv.convolve(&e, &conv.convolve(&delta.add(&h)?, &e)?)?;
    let target = 3.0 * (d as f64 - 2.0);
    let mut points = Vec::new();
    for r in (l.ceil() as i64).max(1)..=(fields.side / 2) as i64 {
        let mut x = vec![0i64; d];
        x[0] = r;
        let t0 = gt.at(&x) * h.at(&x);
        let a = gt.mul(&h.translate(&x)?)?;
        let inner = conv.convolve(&fields.g, &a)?;
        let shifted = gt.translate(&x)?;
        let t1: f64 = (0..psi.len()).map(|i| psi.values()[i] * shifted.values()[i] * inner.values()[i]).sum();
        let q = if t0 > 0.0 { t1 / t0 } else { f64::INFINITY };
        let tail = if q < 1.0 { t1 * q / (1.0 - q) } else { f64::INFINITY };
        let value = t0 + t1 + tail;
        let ratio = value / (fields.theta.powi(3) * weighted_norm(&x, l).powf(-target));
        points.push(DecayPoint { r, t0, t1, tail, value, ratio });
    }
    let top = points.iter().map(|p| p.value).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.value.is_finite() && p.value > 1e-12 * top)
        .map(|p| (weighted_norm(&[p.r], l).ln(), p.value.ln()))
        .collect();
    let (slope, intercept) = least_squares(&usable);
    let degenerate = usable.len() < 3 || !slope.is_finite();
    Ok(DecayReport {
        dimension: d,
        side: fields.side,
        range: l,
        points,
        exponent: -slope,
        prefactor: intercept.exp(),
        target,
        degenerate,
        tail_estimated: true,
    })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
