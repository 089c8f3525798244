use ndarray::Array2;

use super::{Convolver, Geometry, LatticeField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainLength {
    Finite(usize),
    Infinite,
}

/// `Σ_{j=start}^{m} (G̃²)^{*j}`; for the infinite chain, `tail` has been added
/// to every entry and bounds the omitted terms from above.
#[derive(Debug, Clone, PartialEq)]
pub struct BubbleChain {
    pub field: LatticeField,
    pub rho: f64,
    pub tail: f64,
    pub terms: usize,
}

/// Contraction factor bounding every entry of `h^{*j}` by `ρ^j`: the total
/// mass on a torus, the smaller of the row and column norms on a graph.
pub fn contraction(h: &LatticeField) -> f64 {
    match h.geometry() {
        Geometry::Torus { .. } => h.sum(),
        Geometry::Graph { vertices: n } => {
            let v = h.values();
            let row = (0..n).map(|a| (0..n).map(|b| v[a * n + b]).sum::<f64>()).fold(0.0, f64::max);
            let col = (0..n).map(|b| (0..n).map(|a| v[a * n + b]).sum::<f64>()).fold(0.0, f64::max);
            row.min(col)
        }
    }
}

const MAX_TERMS: usize = 100_000;

pub fn bubble_chain(gt: &LatticeField, m: ChainLength, start: usize, conv: &dyn Convolver) -> Result<BubbleChain> {
    let h = gt.square();
    let rho = contraction(&h);
    let delta = LatticeField::delta(gt.geometry());
    let mut power = delta.clone();
    let mut acc = LatticeField::zeros(gt.geometry());
    let last = match m {
        ChainLength::Finite(m) => m,
        ChainLength::Infinite => {
            if rho >= 1.0 {
                return Err(Error::DivergentChain { rho });
            }
            usize::MAX
        }
    };
    let mut j = 0usize;
    let mut terms = 0usize;
    loop {
        if j > last {
            break;
        }
        if j >= start {
            acc = acc.add(&power)?;
            terms += 1;
        }
        if m == ChainLength::Infinite && j >= start {
            let tail = if rho == 0.0 { 0.0 } else { rho.powi(j as i32 + 1) / (1.0 - rho) };
            if tail <= 1e-16 * acc.sup().max(f64::MIN_POSITIVE) || j >= MAX_TERMS {
                let field = acc.map(|v| v + tail)?;
                return Ok(BubbleChain { field, rho, tail, terms });
            }
        }
        if j == last {
            break;
        }
        power = conv.convolve(&power, &h)?;
        j += 1;
    }
    Ok(BubbleChain { field: acc, rho, tail: 0.0, terms })
}

/// `Σ_z G(v₁,z)G(z,v₂)G(v₃,z)·[G(v₁,v₂)G(v₃,z) + G(v₁,v₃)G(v₂,z) + G(v₁,z)G(v₂,v₃)]`.
pub fn triangle_t(g: &Array2<f64>, v1: usize, v2: usize, v3: usize) -> f64 {
    (0..g.nrows())
        .map(|z| {
            let bracket = g[[v1, v2]] * g[[v3, z]] + g[[v1, v3]] * g[[v2, z]] + g[[v1, z]] * g[[v2, v3]];
            g[[v1, z]] * g[[z, v2]] * g[[v3, z]] * bracket
        })
        .sum()
}

/// Pointwise four-line chain bounding `(δ+τ²)*(δ+G̃²)*(δ+τ²) − δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psi1Report {
    /// Largest relative gap between the composed and expanded forms.
    pub expansion_error: f64,
    /// Entries where a later line falls below an earlier one beyond rounding.
    pub violations: usize,
    /// Sup of the first line over the last, off the origin.
    pub worst_ratio: f64,
}

pub fn psi1_chain(tau: &LatticeField, gt: &LatticeField, conv: &dyn Convolver) -> Result<Psi1Report> {
    tau.same_geometry(gt)?;
    let delta = LatticeField::delta(tau.geometry());
    let tau2 = tau.square();
    let e = delta.add(&tau2)?;
    let h = gt.square();
    let dt = delta.add(tau)?;
    let composed = conv.convolve(&e, &conv.convolve(&delta.add(&h)?, &e)?)?;
    let e_tau2 = conv.convolve(&e, &tau2)?;
    let e_h_e = conv.convolve(&e, &conv.convolve(&h, &e)?)?;
    let dt_tau = conv.convolve(&dt, tau)?;
    let dt_gt_dt = conv.convolve(&dt, &conv.convolve(gt, &dt)?)?;
    let dt_gt = conv.convolve(&dt, gt)?;
    let mut report = Psi1Report { expansion_error: 0.0, violations: 0, worst_ratio: 0.0 };
    let d = delta.values();
    // Spectral roundoff is absolute, of order 1e-16 of the largest entry.
    let floor = 1e-4 * composed.sup();
    let noise = 1e-13 * (gt.sup().powi(2) + dt_gt.sup().powi(2) + dt_gt_dt.sup().powi(2));
    for (i, &di) in d.iter().enumerate() {
        let line1 = composed.values()[i] - di;
        let line2 = e.values()[i] + e_tau2.values()[i] + e_h_e.values()[i] - di;
        let line3 = tau.values()[i].powi(2) + dt_tau.values()[i].powi(2) + dt_gt_dt.values()[i].powi(2);
        let line4 = gt.values()[i].powi(2) + dt_gt.values()[i].powi(2) + dt_gt_dt.values()[i].powi(2);
        let scale = line1.abs().max(line2.abs()).max(floor).max(f64::MIN_POSITIVE);
        report.expansion_error = report.expansion_error.max((line1 - line2).abs() / scale);
        let slack = 1e-12 * line4.abs().max(line3.abs()).max(line2.abs()) + noise;
        if line2 > line3 + slack || line3 > line4 + slack {
            report.violations += 1;
        }
        if di == 0.0 && line4 > 0.0 {
            report.worst_ratio = report.worst_ratio.max(line1 / line4);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::{convolver, SpectralConvolver};
    use super::*;

    fn small_field(side: usize, c: f64) -> LatticeField {
        LatticeField::torus_from_fn(2, side, |x| if x.iter().all(|&v| v.abs() <= 1) { c } else { 0.0 }).unwrap()
    }

    #[test]
    fn finite_chain_conventions() {
        let gt = small_field(5, 0.1);
        let c = SpectralConvolver;
        let one = bubble_chain(&gt, ChainLength::Finite(1), 1, &c).unwrap();
        assert!(one.field.max_relative_difference(&gt.square()).unwrap() < 1e-15);
        let zero = LatticeField::zeros(gt.geometry());
        let d = bubble_chain(&zero, ChainLength::Finite(3), 0, &c).unwrap();
        assert_eq!(d.field, LatticeField::delta(gt.geometry()));
    }

    #[test]
    fn infinite_chain_dominates_truncation_by_at_most_the_tail() {
        // Nine sites of weight 0.1/9 in G̃² give total mass 0.1.
        let gt = small_field(7, (0.1f64 / 9.0).sqrt());
        let c = SpectralConvolver;
        let inf = bubble_chain(&gt, ChainLength::Infinite, 0, &c).unwrap();
        let m20 = bubble_chain(&gt, ChainLength::Finite(20), 0, &c).unwrap();
        assert!((inf.rho - 0.1).abs() < 1e-15);
        let bound = 0.1f64.powi(21) / 0.9 + inf.tail + 1e-15;
        for (a, b) in inf.field.values().iter().zip(m20.field.values()) {
            assert!(a + 1e-16 >= *b);
            assert!(a - b <= bound);
        }
    }

    #[test]
    fn divergent_chain_is_refused() {
        let gt = small_field(5, 0.5);
        let r = bubble_chain(&gt, ChainLength::Infinite, 0, &SpectralConvolver);
        assert!(matches!(r, Err(Error::DivergentChain { .. })));
    }

    #[test]
    fn triangle_t_delta_collapse_and_symmetry() {
        let id = Array2::<f64>::eye(4);
        assert_eq!(triangle_t(&id, 0, 0, 0), 3.0);
        assert_eq!(triangle_t(&id, 0, 1, 0), 0.0);
        let g = ndarray::arr2(&[
            [1.0, 0.4, 0.2, 0.4],
            [0.4, 1.0, 0.4, 0.2],
            [0.2, 0.4, 1.0, 0.4],
            [0.4, 0.2, 0.4, 1.0],
        ]);
        // Direct four-term sum for (o, x, y) = (0, 1, 2).
        let mut oracle = 0.0;
        for z in 0..4 {
            let (gox, goy, goz, gxz, gyz, gxy) = (g[[0, 1]], g[[0, 2]], g[[0, z]], g[[1, z]], g[[2, z]], g[[1, 2]]);
            oracle += goz * gxz * gyz * (gox * gyz + goy * gxz + goz * gxy);
        }
        assert!((triangle_t(&g, 0, 1, 2) - oracle).abs() < 1e-15);
        assert!((triangle_t(&g, 0, 1, 2) - triangle_t(&g, 0, 2, 1)).abs() < 1e-12);
    }

    #[test]
    fn psi1_chain_holds_on_a_smooth_field() {
        let tau = small_field(9, 0.05);
        let c = convolver("spectral").unwrap();
        let gt = c.convolve(&tau, &LatticeField::delta(tau.geometry()).add(&tau).unwrap()).unwrap();
        let r = psi1_chain(&tau, &gt, c.as_ref()).unwrap();
        assert!(r.expansion_error < 1e-10, "{r:?}");
        assert_eq!(r.violations, 0);
    }
}
