use ndarray::Array2;
use rayon::prelude::*;

use super::{Instance, Row, RunConfig, Status, Suite};
use crate::coupling_graph::{CouplingGraph, SpreadOutSpec};
use crate::current::{
    bonds_outside, connected, correlation, double_connected, four_point, full_bond_mask, partition_function,
    spin_sum_moment, spin_sum_partition, superpose, two_point_matrix, vertex_mask, Caps, Layer, PosDistribution,
    SourceSet, ThetaTable,
};
use crate::diagram::{BoundStatus, Theorem, TheoremBound, TheoremEvaluator, ROUNDING};
use crate::error::{Error, Result};
use crate::field::{
    bubble_chain, convolution_bound_stability, psi1_chain, reduction_ratios, triangle_t, ChainLength, DirectConvolver,
    LatticeField, ProxyFields, SpectralConvolver,
};
use crate::lace::{partition_of_unity, verify_pi0_decomposition};

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Worst case of a family of identity comparisons `(value, oracle, where)`.
fn identity_row(suite: &str, inst: &str, check: &str, items: Vec<(f64, f64, String)>, rtol: f64) -> Option<Row> {
    let worst = items.into_iter().max_by(|a, b| relative(a.0, a.1).total_cmp(&relative(b.0, b.1)))?;
    let err = relative(worst.0, worst.1);
    Some(Row {
        lhs: worst.0,
        rhs: worst.1,
        margin: err,
        status: if err <= rtol { Status::Pass } else { Status::Fail },
        detail: worst.2,
        ..Row::new(suite, inst, check)
    })
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + ROUNDING)
}

/// Worst case of a family of inequalities `lhs ≤ rhs`; `rhs = ∞` counts as uncertified.
fn inequality_row(suite: &str, inst: &str, check: &str, items: Vec<(f64, f64, String)>) -> Option<Row> {
    let n = items.len();
    let fails = items.iter().filter(|i| !holds(i.0, i.1)).count();
    let open = items.iter().filter(|i| i.1.is_infinite()).count();
    let worst = items.into_iter().min_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))?;
    let status = if fails > 0 {
        Status::Fail
    } else if open > 0 {
        Status::Uncertified
    } else {
        Status::Pass
    };
    Some(Row {
        lhs: worst.0,
        rhs: worst.1,
        margin: worst.1 - worst.0,
        status,
        detail: format!("{} of {n} violated; worst at {}", fails, worst.2),
        ..Row::new(suite, inst, check)
    })
}

fn per_instance(
    suite: &str,
    corpus: &[Instance],
    f: impl Fn(&Instance) -> Result<Vec<Row>> + Sync,
) -> Vec<Row> {
    corpus
        .par_iter()
        .map(|inst| f(inst).unwrap_or_else(|e| vec![Row::from_error(suite, &inst.id, "instance", &e)]))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn gmatrix(g: &CouplingGraph, caps: &Caps) -> Result<Array2<f64>> {
    let n = g.num_vertices();
    Ok(Array2::from_shape_vec((n, n), two_point_matrix(g, caps)?).expect("square"))
}

fn taumatrix(g: &CouplingGraph) -> Array2<f64> {
    let n = g.num_vertices();
    Array2::from_shape_vec((n, n), g.tau_matrix()).expect("square")
}

/// Enumeration against direct spin sums.
pub struct IdentitiesSuite;

impl Suite for IdentitiesSuite {
    fn name(&self) -> &'static str {
        "identities"
    }

    fn run(&self, config: &RunConfig, corpus: &[Instance]) -> Result<Vec<Row>> {
        let rtol = config.tolerances.identity_rtol;
        let caps = config.caps;
        Ok(per_instance(self.name(), corpus, |inst| {
            let g = &inst.graph;
            let n = g.num_vertices();
            let full = full_bond_mask(g);
            let scale = 2f64.powi(n as i32);
            let mut rows = Vec::new();
            let mut z = vec![(partition_function(g, full, &caps)?, spin_sum_partition(g, full)? / scale, "B=all".into())];
            for b in 0..g.num_bonds() {
                let sub = full & !(1u64 << b);
                z.push((partition_function(g, sub, &caps)?, spin_sum_partition(g, sub)? / scale, format!("B=all-{b}")));
            }
            rows.extend(identity_row(self.name(), &inst.id, "partition", z, rtol));
            let mut two = Vec::new();
            for x in 0..n {
                for y in x + 1..n {
                    let c = correlation(g, SourceSet::pair(x, y), full, &caps)?;
                    two.push((c, spin_sum_moment(g, &[x, y], full)?, format!("({x},{y})")));
                }
            }
            rows.extend(identity_row(self.name(), &inst.id, "two-point", two, rtol));
            let mut four = Vec::new();
            for x in 0..n {
                for y in x..n {
                    for u in y..n {
                        for v in u..n {
                            let c = four_point(g, x, y, u, v, &caps)?;
                            four.push((c, spin_sum_moment(g, &[x, y, u, v], full)?, format!("({x},{y},{u},{v})")));
                        }
                    }
                }
            }
            rows.extend(identity_row(self.name(), &inst.id, "four-point", four, rtol));
            Ok(rows)
        }))
    }
}

/// Source-switching bounds, the triangle bound, Lebowitz and the bubble-chain bound.
pub struct SstSuite;

impl SstSuite {
    fn instance(inst: &Instance, caps: &Caps, lower_terms: usize) -> Result<Vec<Row>> {
        let name = "sst";
        let g = &inst.graph;
        let n = g.num_vertices();
        let full = full_bond_mask(g);
        let gm = gmatrix(g, caps)?;
        let mut sets = vec![(full, "all".to_string())];
        sets.extend((0..g.num_bonds()).map(|b| (full & !(1u64 << b), format!("all-{b}"))));
        let (mut l1, mut l0, mut l2) = (Vec::new(), Vec::new(), Vec::new());
        for (b, label) in &sets {
            for o in 0..n {
                for x in 0..n {
                    let dist = PosDistribution::layer(g, &Layer { bonds: *b, sources: SourceSet::pair(o, x) });
                    for y in 0..n {
                        let lhs = dist.integrate(|p| connected(g, p, o, y) as u8 as f64);
                        let at = format!("B={label} o={o} x={x} y={y}");
                        if o == x {
                            l0.push((lhs, gm[[o, y]].powi(2), at));
                        } else {
                            l1.push((lhs, gm[[o, y]] * gm[[y, x]], at));
                        }
                    }
                }
                let dist = PosDistribution::layer(g, &Layer { bonds: *b, sources: SourceSet::empty() });
                for x in 0..n {
                    for y in 0..n {
                        let lhs = dist.integrate(|p| (connected(g, p, o, x) && connected(g, p, o, y)) as u8 as f64);
                        l2.push((lhs, triangle_t(&gm, o, x, y), format!("B={label} o={o} x={x} y={y}")));
                    }
                }
            }
        }
        let mut leb = Vec::new();
        for x in 0..n {
            for y in 0..n {
                for u in 0..n {
                    for v in 0..n {
                        let lhs = four_point(g, x, y, u, v, caps)?;
                        let rhs = gm[[x, y]] * gm[[u, v]] + gm[[x, u]] * gm[[y, v]] + gm[[x, v]] * gm[[y, u]];
                        leb.push((lhs, rhs, format!("({x},{y},{u},{v})")));
                    }
                }
            }
        }
        let mut rows: Vec<Row> = [("switching", l1), ("switching-diagonal", l0), ("triangle", l2), ("lebowitz", leb)]
            .into_iter()
            .filter_map(|(c, items)| inequality_row(name, &inst.id, c, items))
            .collect();
        rows.push(Self::bubble(inst, &gm, caps, lower_terms)?);
        Ok(rows)
    }

    /// Two layers on `B′ = all∖{b′}` and `B = all∖{b}` with `b′ = b + 1`, so that
    /// `B′ ⊅ B`; the single-bond graph uses `B′ = ∅`.
    fn bubble(inst: &Instance, gm: &Array2<f64>, caps: &Caps, lower_terms: usize) -> Result<Row> {
        let g = &inst.graph;
        let n = g.num_vertices();
        let e = g.num_bonds();
        let full = full_bond_mask(g);
        let gt = taumatrix(g).dot(gm);
        let field = LatticeField::from_matrix(&gt)?;
        let lower = bubble_chain(&field, ChainLength::Finite(lower_terms), 0, &DirectConvolver)?.field.matrix()?;
        let upper = match bubble_chain(&field, ChainLength::Infinite, 0, &DirectConvolver) {
            Ok(c) => Some(c.field.matrix()?),
            Err(Error::DivergentChain { .. }) => None,
            Err(err) => return Err(err),
        };
        let mut items = Vec::new();
        for b in 0..e {
            let bset = full & !(1u64 << b);
            let bprime = if e == 1 { 0 } else { full & !(1u64 << ((b + 1) % e)) };
            let total = (bset.count_ones() + bprime.count_ones()) as usize;
            if total > caps.multi {
                return Err(Error::CapExceeded { bonds: total, cap: caps.multi });
            }
            let outer = PosDistribution::layer(g, &Layer { bonds: bprime, sources: SourceSet::empty() });
            for o in 0..n {
                for x in 0..n {
                    let inner = PosDistribution::layer(g, &Layer { bonds: bset, sources: SourceSet::pair(o, x) });
                    let both = superpose(&[outer.clone(), inner]);
                    for y in 0..n {
                        let lhs = both.integrate(|p| connected(g, p & bset, o, y) as u8 as f64);
                        let rhs = |h: &Array2<f64>| (0..n).map(|v| gm[[o, v]] * gm[[v, x]] * h[[v, y]]).sum::<f64>();
                        let lo = rhs(&lower);
                        // The truncated sum already bounds the full series from below.
                        let bound = if lhs <= lo { lo } else { upper.as_ref().map_or(f64::INFINITY, rhs) };
                        items.push((lhs, bound, format!("b={b} o={o} x={x} y={y}")));
                    }
                }
            }
        }
        Ok(inequality_row("sst", &inst.id, "bubble-chain", items).expect("nonempty"))
    }
}

impl Suite for SstSuite {
    fn name(&self) -> &'static str {
        "sst"
    }

    fn run(&self, config: &RunConfig, corpus: &[Instance]) -> Result<Vec<Row>> {
        Ok(per_instance(self.name(), corpus, |inst| Self::instance(inst, &config.caps, config.lower_terms)))
    }
}

/// Reconstruction of the double-connection coefficient through laces under two bond orders.
pub struct LaceSuite;

impl Suite for LaceSuite {
    fn name(&self) -> &'static str {
        "lace"
    }

    fn run(&self, config: &RunConfig, corpus: &[Instance]) -> Result<Vec<Row>> {
        let rtol = config.tolerances.identity_rtol;
        let caps = config.caps;
        Ok(per_instance(self.name(), corpus, |inst| {
            let mut rows = Vec::new();
            for (order, g) in [("canonical", inst.graph.clone()), ("reversed", inst.graph.reversed_bond_order())] {
                let n = g.num_vertices();
                let mut items = Vec::new();
                let (mut sets, mut failures, mut bad) = (0, 0, 0);
                for o in 0..n {
                    for x in (0..n).filter(|&x| x != o) {
                        let r = verify_pi0_decomposition(&g, o, x, &caps)?;
                        if r.mismatches + r.invalid_laces > 0 {
                            bad += 1;
                        }
                        items.push((r.pi0_reconstructed, r.pi0_direct, format!("o={o} x={x}")));
                        let p = partition_of_unity(&g, o, x, &caps)?;
                        sets += p.odd_sets;
                        failures += p.failures;
                    }
                }
                if let Some(mut row) = identity_row(self.name(), &inst.id, &format!("reconstruction[{order}]"), items, rtol) {
                    if bad > 0 {
                        row.status = Status::Fail;
                        row.detail = format!("{}; {bad} pairs with lace mismatches", row.detail);
                    }
                    rows.push(row);
                }
                rows.push(Row {
                    lhs: failures as f64,
                    rhs: 0.0,
                    margin: 0.0 - failures as f64,
                    status: if failures == 0 { Status::Pass } else { Status::Fail },
                    detail: format!("{failures} of {sets} odd sets"),
                    ..Row::new(self.name(), &inst.id, format!("partition[{order}]"))
                });
            }
            Ok(rows)
        }))
    }
}

/// One theorem inequality at one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCheck {
    pub theorem: Theorem,
    pub o: usize,
    pub x: usize,
    pub lhs: f64,
    pub bound: TheoremBound,
    pub status: BoundStatus,
}

/// Theorems 1–4 at every `o`, `x ≠ o`, `y`, and `A` over singletons and the
/// full vertex set, with the right-hand sides built from `gm` and `τ`.
pub fn theorem_checks(g: &CouplingGraph, gm: &Array2<f64>, caps: &Caps, lower_terms: usize) -> Result<Vec<TheoremCheck>> {
    let n = g.num_vertices();
    let ev = TheoremEvaluator::new(gm, &taumatrix(g), lower_terms)?;
    let full = full_bond_mask(g);
    let mut anchors: Vec<u64> = (0..n).map(|v| 1u64 << v).collect();
    if n > 1 {
        anchors.push(vertex_mask(0..n));
    }
    let mut out = Vec::new();
    for o in 0..n {
        let table = ev.origin(o)?;
        let mut push = |thm: Theorem, x: usize, lhs: f64| -> Result<()> {
            let bound = table.rhs(x, thm)?;
            out.push(TheoremCheck { theorem: thm, o, x, lhs, bound, status: bound.status(lhs) });
            Ok(())
        };
        let thetas = anchors
            .iter()
            .map(|&a| {
                if bonds_outside(g, a).count_ones() + full.count_ones() > caps.multi as u32 {
                    Err(Error::CapExceeded { bonds: (bonds_outside(g, a) | full).count_ones() as usize, cap: caps.multi })
                } else {
                    ThetaTable::compute(g, o, a, caps)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for x in (0..n).filter(|&x| x != o) {
            let dist = PosDistribution::layer(g, &Layer { bonds: full, sources: SourceSet::pair(o, x) });
            let pi0 = dist.integrate(|p| double_connected(g, p, o, x) as u8 as f64);
            push(Theorem::One, x, pi0)?;
            for y in 0..n {
                let lhs = dist.integrate(|p| (double_connected(g, p, o, x) && connected(g, p, o, y)) as u8 as f64);
                push(Theorem::Three { y }, x, lhs)?;
            }
            for (&a, t) in anchors.iter().zip(&thetas) {
                push(Theorem::Two { a }, x, t.prime(x))?;
                for y in 0..n {
                    push(Theorem::Four { y, a }, x, t.double_prime(x, y))?;
                }
            }
        }
    }
    Ok(out)
}

/// Theorems 1–4 on every corpus instance.
pub struct TheoremsSuite;

impl Suite for TheoremsSuite {
    fn name(&self) -> &'static str {
        "theorems"
    }

    fn run(&self, config: &RunConfig, corpus: &[Instance]) -> Result<Vec<Row>> {
        let caps = config.caps;
        Ok(per_instance(self.name(), corpus, |inst| {
            let mut gm = gmatrix(&inst.graph, &caps)?;
            if let Some([a, b]) = config.negate_g_entry {
                if a < gm.nrows() && b < gm.ncols() {
                    gm[[a, b]] = -gm[[a, b]];
                }
            }
            let checks = theorem_checks(&inst.graph, &gm, &caps, config.lower_terms)?;
            let rows = (1..=4u8)
                .filter_map(|k| {
                    let items: Vec<&TheoremCheck> = checks.iter().filter(|c| c.theorem.number() == k).collect();
                    let count = |s: BoundStatus| items.iter().filter(|c| c.status == s).count();
                    let worst = items.iter().max_by(|a, b| {
                        (a.lhs / a.bound.upper).total_cmp(&(b.lhs / b.bound.upper))
                    })?;
                    let (conclusive, certified, open, violated) = (
                        count(BoundStatus::Conclusive),
                        count(BoundStatus::Certified),
                        count(BoundStatus::Uncertified),
                        count(BoundStatus::Violated),
                    );
                    let status = if violated > 0 {
                        Status::Fail
                    } else if open > 0 {
                        Status::Uncertified
                    } else {
                        Status::Pass
                    };
                    Some(Row {
                        lhs: worst.lhs,
                        rhs: worst.bound.upper,
                        margin: worst.bound.upper - worst.lhs,
                        status,
                        detail: format!(
                            "{} checks: {conclusive} below partial sums, {certified} certified, {open} uncertified, {violated} violated; worst o={} x={} {:?}",
                            items.len(),
                            worst.o,
                            worst.x,
                            worst.theorem
                        ),
                        ..Row::new(self.name(), &inst.id, format!("theorem{k}"))
                    })
                })
                .collect();
            Ok(rows)
        }))
    }
}

fn proxy(config: &RunConfig, range: f64) -> Result<ProxyFields> {
    let t = &config.torus;
    ProxyFields::build(&SpreadOutSpec::uniform(t.dimension, range), t.side, t.p_fraction, &SpectralConvolver)
}

fn flag(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Proxy-field hypotheses, reduction scaling in `L` and convolution-bound constants.
pub struct ReductionsSuite;

impl Suite for ReductionsSuite {
    fn name(&self) -> &'static str {
        "reductions"
    }

    fn run(&self, config: &RunConfig, _corpus: &[Instance]) -> Result<Vec<Row>> {
        let name = self.name();
        let mut rows = Vec::new();
        let [l1, l2] = config.torus.ranges;
        let id = |l: f64| format!("torus d={} side={} L={l}", config.torus.dimension, config.torus.side);
        let mut ratios = Vec::new();
        for l in [l1, l2] {
            let f = match proxy(config, l) {
                Ok(f) => f,
                Err(e) => {
                    rows.push(Row::from_error(name, &id(l), "proxy", &e));
                    continue;
                }
            };
            let h = f.hypotheses(&SpectralConvolver)?;
            rows.push(Row {
                lhs: h.hyp1,
                rhs: 2.0,
                margin: 2.0 - h.hyp1,
                status: flag(h.hyp1_holds),
                ..Row::new(name, &id(l), "hyp1")
            });
            rows.push(Row {
                lhs: h.hyp2_violations as f64,
                rhs: 0.0,
                margin: 0.0 - h.hyp2_violations as f64,
                status: flag(h.hyp2_violations == 0),
                detail: format!("constant {:e}", h.hyp2_constant),
                ..Row::new(name, &id(l), "hyp2")
            });
            rows.push(Row {
                lhs: h.hyp3_constants[0],
                rhs: h.hyp3_constants[1],
                detail: "measured constants for j = 1, 2".into(),
                ..Row::new(name, &id(l), "hyp3")
            });
            let p = psi1_chain(&f.tau, &f.tilde_g, &SpectralConvolver)?;
            rows.push(Row {
                lhs: p.expansion_error,
                rhs: config.tolerances.identity_rtol,
                margin: p.expansion_error,
                status: flag(p.expansion_error <= 1e-10 && p.violations == 0),
                detail: format!("{} ordering violations; worst ratio {:e}", p.violations, p.worst_ratio),
                ..Row::new(name, &id(l), "psi1")
            });
            ratios.push(reduction_ratios(&f)?);
        }
        if let [a, b] = ratios.as_slice() {
            let d = config.torus.dimension as i32;
            let expected = (l2 / l1).powi(d);
            let fct = config.tolerances.volume_factor;
            for (ra, rb) in a.iter().zip(b) {
                let scaling = ra.ratio / rb.ratio;
                let gains = ra.reduction.gains_volume_factor();
                let ok = scaling.is_finite() && (!gains || (expected / fct..=expected * fct).contains(&scaling));
                rows.push(Row {
                    lhs: scaling,
                    rhs: if gains { expected } else { f64::NAN },
                    margin: if gains { (scaling / expected).ln().abs() } else { f64::NAN },
                    status: flag(ok),
                    detail: format!("sup ratios {:e} at L={l1}, {:e} at L={l2}", ra.ratio, rb.ratio),
                    ..Row::new(name, "torus", format!("reduction[{}]", ra.reduction.label()))
                });
            }
        }
        for case in &config.convbd_cases {
            let inst = format!("d={} a={} b={} R={}", case.dimension, case.a, case.b, case.radius);
            match convolution_bound_stability(case.dimension, case.a, case.b, &config.convbd_ranges, case.radius) {
                Ok((reports, spread)) => {
                    let max = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
                    rows.push(Row {
                        lhs: spread,
                        rhs: config.tolerances.convbd_spread,
                        margin: config.tolerances.convbd_spread - spread,
                        status: flag(max.is_finite() && spread <= config.tolerances.convbd_spread),
                        detail: format!("largest constant {max:e}"),
                        ..Row::new(name, &inst, "convolution-bound")
                    });
                }
                Err(e) => rows.push(Row::from_error(name, &inst, "convolution-bound", &e)),
            }
        }
        Ok(rows)
    }
}

/// Fitted decay exponent of `X¹` on the proxy torus.
pub struct DecaySuite;

impl Suite for DecaySuite {
    fn name(&self) -> &'static str {
        "decay"
    }

    fn run(&self, config: &RunConfig, _corpus: &[Instance]) -> Result<Vec<Row>> {
        let t = &config.torus;
        let inst = format!("torus d={} side={} L={}", t.dimension, t.side, t.range);
        let report = proxy(config, t.range).and_then(|f| crate::diagram::decay_trend(&f, &SpectralConvolver));
        let r = match report {
            Ok(r) => r,
            Err(e) => return Ok(vec![Row::from_error(self.name(), &inst, "exponent", &e)]),
        };
        let tol = config.tolerances.exponent;
        let gap = (r.exponent - r.target).abs();
        let ratios: Vec<String> = r.points.iter().map(|p| format!("{}:{:.3e}", p.r, p.ratio)).collect();
        Ok(vec![Row {
            lhs: r.exponent,
            rhs: r.target,
            margin: tol - gap,
            status: flag(!r.degenerate && gap <= tol),
            detail: format!(
                "prefactor {:e}; higher orders estimated; ratio to θ³⟨x⟩^-target by r {}",
                r.prefactor,
                ratios.join(" ")
            ),
            ..Row::new(self.name(), &inst, "exponent")
        }])
    }
}
