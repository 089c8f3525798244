use std::collections::VecDeque;

use ndarray::Array1;

use super::kernel::{mass, pair_delta, PairField, PairKernel};
use super::{DiagramFields, Family, Mode, LOWER_CEILING};
use crate::error::{Error, Result};

/// One position in a chain `U^{⋆i} ⋆ K₁ ⋆ U^{⋆j} ⋆ … ⋆ c·V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    /// `Σ_{i≥0} U^{⋆i}`.
    Series,
    Kernel(Family),
    /// Closing kernel with its coefficient.
    Terminal(Family, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub label: &'static str,
    pub slots: Vec<Slot>,
}

/// `X`, `Ẋ_a`, `Ẍ_y` and `X⃛_{a,y}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainFamily {
    X,
    DotX(usize),
    DdotX(usize),
    DddotX(usize, usize),
}

/// The terms of each chain family as slot lists, with the ½ on every
/// doubly and triply dotted terminal.
pub fn chain_patterns(family: ChainFamily) -> Vec<Pattern> {
    use Slot::{Kernel as K, Series as S, Terminal as T};
    let p = |label, slots| Pattern { label, slots };
    match family {
        ChainFamily::X => vec![p("U*V", vec![S, T(Family::V, 1.0)])],
        ChainFamily::DotX(a) => vec![
            p("U*dotV", vec![S, T(Family::DotV(a), 1.0)]),
            p("U*dotU*U*V", vec![S, K(Family::DotU(a)), S, T(Family::V, 1.0)]),
        ],
        ChainFamily::DdotX(y) => vec![
            p("U*ddotV/2", vec![S, T(Family::DdotV(y), 0.5)]),
            p("U*ddotU*U*V", vec![S, K(Family::DdotU(y)), S, T(Family::V, 1.0)]),
        ],
        ChainFamily::DddotX(a, y) => vec![
            p("U*dddotV/2", vec![S, T(Family::DddotV(a, y), 0.5)]),
            p("U*dddotU*U*V", vec![S, K(Family::DddotU(a, y)), S, T(Family::V, 1.0)]),
            p("U*dotU*U*ddotV/2", vec![S, K(Family::DotU(a)), S, T(Family::DdotV(y), 0.5)]),
            p("U*ddotU*U*dotV", vec![S, K(Family::DdotU(y)), S, T(Family::DotV(a), 1.0)]),
            p("U*dotU*U*ddotU*U*V", vec![S, K(Family::DotU(a)), S, K(Family::DdotU(y)), S, T(Family::V, 1.0)]),
            p("U*ddotU*U*dotU*U*V", vec![S, K(Family::DdotU(y)), S, K(Family::DotU(a)), S, T(Family::V, 1.0)]),
        ],
    }
}

/// Chain values at every `x` for a fixed start `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainValue {
    pub values: Array1<f64>,
    /// Total certified tail mass that entered the values.
    pub tail: f64,
}

const MAX_BLOCK: usize = 32;
const MAX_STEPS: usize = 20_000;

/// Evaluates chains over one set of diagram fields, caching `U` and its
/// power norms `‖U^r‖` for `r ≤ 32`.
pub struct ChainEvaluator<'a> {
    fields: &'a DiagramFields,
    u: Box<dyn PairKernel>,
    powers: Vec<f64>,
}

impl<'a> ChainEvaluator<'a> {
    pub fn new(fields: &'a DiagramFields) -> Result<Self> {
        let u = fields.kernel(Family::U)?;
        let n = fields.n;
        let mut f = PairField::ones((n, n));
        let mut powers = vec![1.0];
        for _ in 0..MAX_BLOCK {
            f = u.pull(&f);
            powers.push(f.iter().copied().fold(0.0, f64::max));
        }
        Ok(ChainEvaluator { fields, u, powers })
    }

    /// Smallest block length `k` with `‖U^k‖ < 1`, with `‖U^k‖` and the
    /// bound `σ = Σ_{r<k} ‖U^r‖ / (1 − ‖U^k‖)` on the series norm.
    pub fn certificate(&self) -> Result<(usize, f64, f64)> {
        let mut k = 1;
        while k <= MAX_BLOCK {
            let rho = self.powers[k];
            if rho < 1.0 {
                let sigma = self.powers[..k].iter().sum::<f64>() / (1.0 - rho);
                return Ok((k, rho, sigma));
            }
            k *= 2;
        }
        Err(Error::DivergentChain { rho: self.powers[1] })
    }

    /// `Σ_i P ⋆ U^{⋆i}`, with the mass bound on the omitted terms.
    fn series(&self, p: PairField) -> Result<(PairField, f64)> {
        match self.fields.mode {
            Mode::Lower { terms } => {
                let mut acc = p.clone();
                let mut cur = p;
                for _ in 1..terms {
                    cur = self.u.apply(&cur);
                    let next = &acc + &cur;
                    if next.iter().any(|&v| v > LOWER_CEILING) {
                        break;
                    }
                    acc = next;
                }
                Ok((acc, 0.0))
            }
            Mode::Upper => {
                let (k, rho, _) = self.certificate()?;
                let mut window = VecDeque::with_capacity(k);
                window.push_back(p);
                while window.len() < k {
                    let next = self.u.apply(window.back().expect("nonempty"));
                    window.push_back(next);
                }
                let mut acc = PairField::zeros(window[0].dim());
                for step in 0.. {
                    let w: f64 = window.iter().map(mass).sum();
                    let tail = w / (1.0 - rho);
                    if tail <= 1e-17 * mass(&acc) || w == 0.0 || step >= MAX_STEPS {
                        return Ok((acc, tail));
                    }
                    let front = window.pop_front().expect("nonempty");
                    let next = self.u.apply(window.back().unwrap_or(&front));
                    acc += &front;
                    window.push_back(next);
                }
                unreachable!()
            }
        }
    }

    /// One pattern started from `δ_{(o,o)}`.
    pub fn pattern(&self, o: usize, pattern: &Pattern) -> Result<ChainValue> {
        if o >= self.fields.n {
            return Err(Error::UnknownVertex(o.to_string()));
        }
        let sigma = match self.fields.mode {
            Mode::Upper => self.certificate()?.2,
            Mode::Lower { .. } => 0.0,
        };
        let mut p = pair_delta(self.fields.n, o);
        let mut slack = 0.0;
        let mut total_tail = 0.0;
        for slot in &pattern.slots {
            match *slot {
                Slot::Series => {
                    let (s, tail) = self.series(p)?;
                    p = s;
                    slack = slack * sigma + tail;
                    total_tail += tail;
                }
                Slot::Kernel(f) => {
                    let k = self.fields.kernel(f)?;
                    slack *= k.norm();
                    p = k.apply(&p);
                }
                Slot::Terminal(f, c) => {
                    let v = self.fields.terminal(f)?;
                    let mut values = v.close(&p);
                    if slack > 0.0 {
                        values += &(v.sup() * slack);
                    }
                    return Ok(ChainValue { values: values * c, tail: total_tail });
                }
            }
        }
        Err(Error::InvalidParameters(format!("pattern {} has no terminal", pattern.label)))
    }

    pub fn chain(&self, o: usize, family: ChainFamily) -> Result<ChainValue> {
        let n = self.fields.n;
        let mut out = ChainValue { values: Array1::zeros(n), tail: 0.0 };
        for p in chain_patterns(family) {
            let v = self.pattern(o, &p)?;
            out.values += &v.values;
            out.tail += v.tail;
        }
        Ok(out)
    }
}

/// Chain family values at every `x` from the start `o`.
///
/// In upper mode a chain whose `U` series cannot be certified within block
/// length 32 fails with `DivergentChain`.
pub fn evaluate_chain(fields: &DiagramFields, o: usize, family: ChainFamily) -> Result<ChainValue> {
    ChainEvaluator::new(fields)?.chain(o, family)
}

#[cfg(test)]
mod tests {
    use super::super::tests::sample;
    use super::*;
    use crate::field::ChainLength;
    use ndarray::Array2;

    #[test]
    fn pattern_counts_and_halves() {
        assert_eq!(chain_patterns(ChainFamily::X).len(), 1);
        assert_eq!(chain_patterns(ChainFamily::DotX(0)).len(), 2);
        let six = chain_patterns(ChainFamily::DddotX(0, 1));
        assert_eq!(six.len(), 6);
        let halves = six
            .iter()
            .filter(|p| p.slots.iter().any(|s| matches!(s, Slot::Terminal(_, c) if *c == 0.5)))
            .count();
        assert_eq!(halves, 2);
    }

    #[test]
    fn zeroth_term_is_v_at_the_origin() {
        let (g, tau) = sample();
        let f = DiagramFields::new(&g, &tau, ChainLength::Finite(1), Mode::Lower { terms: 1 }).unwrap();
        let x = evaluate_chain(&f, 0, ChainFamily::X).unwrap();
        for t in 0..3 {
            let direct = f.gt[[0, t]] * f.gt.mapv(|v| v * v)[[0, t]];
            assert!((x.values[t] - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn upper_dominates_lower_and_lower_grows() {
        let (g, tau) = sample();
        let up = DiagramFields::new(&g, &tau, ChainLength::Infinite, Mode::Upper).unwrap();
        let u = evaluate_chain(&up, 1, ChainFamily::DddotX(0, 2)).unwrap();
        let mut prev = Array1::<f64>::zeros(3);
        for terms in [1, 2, 4, 16, 64] {
            let lo = DiagramFields::new(&g, &tau, ChainLength::Infinite, Mode::Lower { terms }).unwrap();
            let l = evaluate_chain(&lo, 1, ChainFamily::DddotX(0, 2)).unwrap();
            for x in 0..3 {
                assert!(l.values[x] >= prev[x]);
                assert!(l.values[x] <= u.values[x] * (1.0 + 1e-12));
            }
            prev = l.values;
        }
        for x in 0..3 {
            assert!(u.values[x] - prev[x] <= 1e-10 * u.values[x].max(1e-300));
        }
    }

    #[test]
    fn zero_fields_give_zero() {
        let z = Array2::<f64>::zeros((3, 3));
        let f = DiagramFields::new(&z, &z, ChainLength::Infinite, Mode::Upper).unwrap();
        for fam in [ChainFamily::X, ChainFamily::DotX(1), ChainFamily::DdotX(2), ChainFamily::DddotX(0, 1)] {
            assert!(evaluate_chain(&f, 0, fam).unwrap().values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn divergent_u_is_refused_in_upper_mode() {
        let g = Array2::<f64>::from_elem((3, 3), 1.0);
        let tau = Array2::<f64>::from_elem((3, 3), 0.1);
        let f = DiagramFields::new(&g, &tau, ChainLength::Finite(1), Mode::Upper).unwrap();
        assert!(matches!(evaluate_chain(&f, 0, ChainFamily::X), Err(Error::DivergentChain { .. })));
    }
}
