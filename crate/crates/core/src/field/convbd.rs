use rayon::prelude::*;

use crate::error::{Error, Result};

/// Measured constant of `Σ_y ⟨x−y⟩_L^{-a}⟨y⟩_L^{-b} ≤ C·envelope(x)` over
/// sample points `x`, with `y` summed over the box `‖y‖_∞ ≤ radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBoundReport {
    pub dimension: usize,
    pub a: f64,
    pub b: f64,
    pub l: f64,
    pub radius: i64,
    pub ratio: f64,
    pub argmax: Vec<i64>,
    pub samples: usize,
}

fn validate(d: usize, a: f64, b: f64, l: f64, radius: i64) -> Result<()> {
    if d == 0 || l <= 0.0 || radius < 1 {
        return Err(Error::InvalidParameters("dimension, L and radius must be positive".into()));
    }
    if !(a >= b && b > 0.0) {
        return Err(Error::InvalidParameters(format!("need a ≥ b > 0, got a={a}, b={b}")));
    }
    if a + b <= d as f64 {
        return Err(Error::InvalidParameters(format!("need a + b > d, got {} ≤ {d}", a + b)));
    }
    if a == d as f64 {
        return Err(Error::InvalidParameters("a = d is outside both branches".into()));
    }
    Ok(())
}

/// Points with nondecreasing coordinates drawn from `{0} ∪ {2^k ≤ radius/2}`.
fn sample_points(d: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut vals = vec![0i64];
    let mut v = 1;
    while v <= radius / 2 {
        vals.push(v);
        v *= 2;
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    fn rec(vals: &[i64], start: usize, d: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..vals.len() {
            cur.push(vals[i]);
            rec(vals, i, d, cur, out);
            cur.pop();
        }
    }
    rec(&vals, 0, d, &mut cur, &mut out);
    out
}

fn bracket_table(max_sq: usize, l: f64, power: f64) -> Vec<f64> {
    (0..=max_sq).map(|s| (s as f64).sqrt().max(l).powf(-power)).collect()
}

pub fn convolution_bound_check(d: usize, a: f64, b: f64, l: f64, radius: i64) -> Result<ConvBoundReport> {
    validate(d, a, b, l, radius)?;
    let reach = (radius + radius / 2) as usize;
    let max_sq = d * reach * reach;
    let ta = bracket_table(max_sq, l, a);
    let tb = bracket_table(max_sq, l, b);
    let side = (2 * radius + 1) as usize;
    let total = side.pow(d as u32);
    let samples = sample_points(d, radius);
    let ratios: Vec<f64> = samples
        .par_iter()
        .map(|x| {
            let mut y = vec![-radius; d];
            let mut sum = 0.0;
            for _ in 0..total {
                let mut sy = 0usize;
                let mut sxy = 0usize;
                for k in 0..d {
                    sy += (y[k] * y[k]) as usize;
                    let t = x[k] - y[k];
                    sxy += (t * t) as usize;
                }
                sum += ta[sxy] * tb[sy];
                for c in y.iter_mut() {
                    if *c < radius {
                        *c += 1;
                        break;
                    }
                    *c = -radius;
                }
            }
            let xs: usize = x.iter().map(|c| (c * c) as usize).sum();
            let nx = (xs as f64).sqrt().max(l);
            let envelope =
                if a > d as f64 { l.powf(d as f64 - a) * nx.powf(-b) } else { nx.powf(d as f64 - a - b) };
            sum / envelope
        })
        .collect();
    let (i, &ratio) = ratios.iter().enumerate().fold((0, &0.0), |m, (i, r)| if *r > *m.1 { (i, r) } else { m });
    Ok(ConvBoundReport {
        dimension: d,
        a,
        b,
        l,
        radius,
        ratio,
        argmax: samples[i].clone(),
        samples: samples.len(),
    })
}

/// Reports for each `L` and the spread `max/min` of the measured constants.
pub fn convolution_bound_stability(
    d: usize,
    a: f64,
    b: f64,
    ls: &[f64],
    radius: i64,
) -> Result<(Vec<ConvBoundReport>, f64)> {
    let reports = ls.iter().map(|&l| convolution_bound_check(d, a, b, l, radius)).collect::<Result<Vec<_>>>()?;
    let hi = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let lo = reports.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok((reports, hi / lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_region() {
        assert!(convolution_bound_check(3, 1.0, 1.0, 1.0, 5).is_err());
        assert!(convolution_bound_check(2, 2.0, 1.0, 1.0, 5).is_err());
        assert!(convolution_bound_check(1, 1.0, 2.0, 1.0, 5).is_err());
        assert!(convolution_bound_check(1, 2.0, 0.0, 1.0, 5).is_err());
    }

    #[test]
    fn one_dimensional_sum_at_origin() {
        // At x = 0 with L = 1 the sum is 1 + 2 Σ_{k=1}^{R} k^{-3}.
        let r = convolution_bound_check(1, 2.0, 1.0, 1.0, 200).unwrap();
        let at_origin = 1.0 + 2.0 * (1..=200).map(|k| (k as f64).powi(-3)).sum::<f64>();
        assert!(r.ratio >= at_origin - 1e-12);
        assert!(r.ratio.is_finite());
    }

    #[test]
    fn stable_across_small_l() {
        let (_, spread) = convolution_bound_stability(1, 2.0, 1.0, &[1.0, 2.0], 200).unwrap();
        assert!(spread <= 2.0, "{spread}");
    }

    #[test]
    fn sample_points_are_sorted_tuples() {
        let s = sample_points(2, 8);
        assert!(s.iter().all(|p| p[0] <= p[1]));
        assert_eq!(s.len(), 10);
    }
}
