//! Acceptance criteria 1–7, one printed verdict line per criterion.

use std::io::Write;
use std::time::{Duration, Instant};

use isinglace::current::{two_point_matrix, Caps};
use isinglace::diagram::{DiagramFields, Family, Mode};
use isinglace::field::{
    convolution_bound_stability, ChainLength, Convolver, DirectConvolver, LatticeField, SpectralConvolver,
};
use isinglace::suite::{default_corpus, run_suite, Instance, Row, RunConfig, Status};
use ndarray::{Array1, Array2};

struct Verdict {
    ok: bool,
    note: String,
}

fn report(id: u8, title: &str, limit: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let ok = v.ok && took <= limit;
    // Direct handle writes bypass the harness capture, so verdicts always show.
    writeln!(
        std::io::stdout().lock(),
        "criterion {id} {:<4} {title}: {} ({:.2?} of {:.0?})",
        if ok { "PASS" } else { "FAIL" },
        v.note,
        took,
        limit
    )
    .unwrap();
    ok
}

fn corpus() -> Vec<Instance> {
    default_corpus(&RunConfig::default().betas).unwrap()
}

fn suite_verdict(name: &str, config: &RunConfig, corpus: &[Instance], accept: impl Fn(&Row) -> bool) -> Verdict {
    let r = run_suite(name, config, corpus).unwrap();
    let bad: Vec<&Row> = r.rows.iter().filter(|row| !accept(row)).collect();
    let note = match bad.first() {
        None => format!("{} rows", r.rows.len()),
        Some(row) => format!("{} of {} rows rejected, first {} {} {}", bad.len(), r.rows.len(), row.instance, row.check, row.detail),
    };
    Verdict { ok: bad.is_empty() && !r.rows.is_empty(), note }
}

fn passes(row: &Row) -> bool {
    row.status == Status::Pass
}

// ---- criterion 7 oracle: kernels as explicit sums over their definitions ----

type M = Vec<Vec<f64>>;

fn to_m(a: &Array2<f64>) -> M {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn mat_mul(a: &M, b: &M) -> M {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn mat_add(a: &M, b: &M) -> M {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

fn eye(n: usize) -> M {
    (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect()
}

/// `Σ_{j=lo}^{hi} H^j`.
fn power_sum(h: &M, lo: usize, hi: usize) -> M {
    let n = h.len();
    let mut acc = vec![vec![0.0; n]; n];
    let mut p = eye(n);
    for j in 0..=hi {
        if j >= lo {
            acc = mat_add(&acc, &p);
        }
        p = mat_mul(&p, h);
    }
    acc
}

struct Oracle {
    n: usize,
    g: M,
    gt: M,
    e: M,
    psi: M,
    c: M,
    b: M,
    t: Vec<f64>,
}

impl Oracle {
    /// Blocks for a finite `m ≥ 0`, with `F[a][b]` standing for `f(b − a)`.
    fn new(g: &Array2<f64>, tau: &Array2<f64>, m: usize) -> Self {
        let n = g.nrows();
        let (g, tau) = (to_m(g), to_m(tau));
        let gt = mat_mul(&tau, &g);
        let h: M = gt.iter().map(|r| r.iter().map(|v| v * v).collect()).collect();
        let e = mat_add(&eye(n), &tau.iter().map(|r| r.iter().map(|v| v * v).collect()).collect());
        let psi = if m == 0 {
            g.iter().map(|r| r.iter().map(|v| v * v).collect()).collect()
        } else {
            mat_mul(&mat_mul(&e, &power_sum(&h, 0, m)), &e)
        };
        let c = if m == 0 { vec![vec![0.0; n]; n] } else { power_sum(&h, 1, m) };
        let b = if m == 0 { vec![vec![0.0; n]; n] } else { power_sum(&h, 0, m - 1) };
        let mut t = vec![0.0; n * n * n];
        for o in 0..n {
            for x in 0..n {
                for y in 0..n {
                    t[(o * n + x) * n + y] = (0..n)
                        .map(|z| {
                            g[o][z] * g[z][x] * g[y][z]
                                * (g[o][x] * g[y][z] + g[o][y] * g[x][z] + g[o][z] * g[x][y])
                        })
                        .sum();
                }
            }
        }
        Oracle { n, g, gt, e, psi, c, b, t }
    }

    /// `Σ_{u₁,v₁,v₂,v₃} E(z−u₁)·X(u₂)·δ_{u₃,a}·Π B(u_i−v_i)·T(v₁,v₂,v₃)` with `u₂` fixed.
    fn triangle_arm(&self, z: usize, u2: usize, a: usize) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for u1 in 0..n {
            for v1 in 0..n {
                for v2 in 0..n {
                    for v3 in 0..n {
                        s += self.e[u1][z]
                            * self.b[v1][u1]
                            * self.b[v2][u2]
                            * self.b[v3][a]
                            * self.t[(v1 * n + v2) * n + v3];
                    }
                }
            }
        }
        s
    }

    fn triangle_pair(&self, z: usize, y2: usize, a: usize) -> f64 {
        (0..self.n).map(|u2| self.e[u2][y2] * self.triangle_arm(z, u2, a)).sum()
    }

    fn dot_front(&self, a: usize, y: usize, y2: usize, z2: usize) -> f64 {
        self.g[y][a] * self.gt[a][z2] * self.g[y2][z2] + self.gt[y][z2] * self.gt[y2][a] * self.g[a][z2]
    }

    fn kernel(&self, f: Family, y: usize, z: usize, y2: usize, z2: usize) -> f64 {
        let (g, gt) = (&self.g, &self.gt);
        let plain = gt[y][z2] * g[y2][z2];
        let gag = |v: usize| g[z][v] * g[v][y2];
        match f {
            Family::U => plain * self.psi[z][y2],
            Family::DotU(a) => self.dot_front(a, y, y2, z2) * self.psi[z][y2],
            Family::DdotU(a) => plain * self.triangle_pair(z, y2, a),
            Family::DddotU(a, v) => self.dot_front(a, y, y2, z2) * self.triangle_pair(z, y2, v),
            Family::DdotU0(a) => plain * g[z][y2] * gag(a),
            Family::DddotU0(a, v) => self.dot_front(a, y, y2, z2) * g[z][y2] * gag(v),
            _ => unreachable!(),
        }
    }

    fn terminal(&self, f: Family, y: usize, z: usize, x: usize) -> f64 {
        let (g, gt) = (&self.g, &self.gt);
        let gate = (z != x) as u8 as f64;
        let ga = |a: usize| g[y][a] * gt[a][x];
        match f {
            Family::V => gt[y][x] * self.c[z][x],
            Family::DotV(a) => ga(a) * self.c[z][x],
            Family::DdotV(a) => gate * gt[y][x] * self.triangle_arm(z, x, a),
            Family::DddotV(a, v) => gate * ga(a) * self.triangle_arm(z, x, v),
            Family::DdotV0(a) => gt[y][x] * gt[z][x] * gt[z][a] * g[a][x],
            Family::DddotV0(a, v) => ga(a) * gt[z][x] * gt[z][v] * g[v][x],
            _ => unreachable!(),
        }
    }
}

fn probe(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(y, z)| 1.0 + ((3 * y + 5 * z + 1) % 7) as f64 / 7.0)
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Worst relative error between factorized applications and the oracle sums.
fn kernel_equivalence(inst: &Instance, m: usize) -> f64 {
    let g = &inst.graph;
    let n = g.num_vertices();
    let gm = Array2::from_shape_vec((n, n), two_point_matrix(g, &Caps::default()).unwrap()).unwrap();
    let tau = Array2::from_shape_vec((n, n), g.tau_matrix()).unwrap();
    let fields = DiagramFields::new(&gm, &tau, ChainLength::Finite(m), Mode::Upper).unwrap();
    let oracle = Oracle::new(&gm, &tau, m);
    let p = probe(n);
    let (a, v) = (n - 1, n / 2);
    let mut kernels = vec![Family::U, Family::DotU(a), Family::DdotU0(a), Family::DddotU0(a, v)];
    let mut terminals = vec![Family::V, Family::DotV(a), Family::DdotV0(a), Family::DddotV0(a, v)];
    if m >= 1 {
        kernels.extend([Family::DdotU(a), Family::DddotU(a, v)]);
        terminals.extend([Family::DdotV(a), Family::DddotV(a, v), Family::DdotV(0), Family::DddotV(v, 0)]);
    }
    let mut worst = 0.0f64;
    for f in kernels {
        let fast = fields.kernel(f).unwrap().apply(&p);
        let slow = Array2::from_shape_fn((n, n), |(y2, z2)| {
            let mut s = 0.0;
            for y in 0..n {
                for z in 0..n {
                    s += p[[y, z]] * oracle.kernel(f, y, z, y2, z2);
                }
            }
            s
        });
        worst = fast.iter().zip(slow.iter()).map(|(a, b)| rel(*a, *b)).fold(worst, f64::max);
    }
    for f in terminals {
        let fast = fields.terminal(f).unwrap().close(&p);
        let slow = Array1::from_shape_fn(n, |x| {
            let mut s = 0.0;
            for y in 0..n {
                for z in 0..n {
                    s += p[[y, z]] * oracle.terminal(f, y, z, x);
                }
            }
            s
        });
        worst = fast.iter().zip(slow.iter()).map(|(a, b)| rel(*a, *b)).fold(worst, f64::max);
    }
    worst
}

/// Deterministic nonnegative test fields on tori of mixed shape.
fn convolution_battery() -> Vec<(LatticeField, LatticeField)> {
    let mut out = Vec::new();
    for (d, side) in [(1, 7), (1, 16), (2, 5), (2, 8), (3, 4), (3, 6), (5, 4)] {
        let f = LatticeField::torus_from_fn(d, side, |x| {
            let r: i64 = x.iter().map(|c| c * c).sum();
            1.0 / (1.0 + r as f64)
        })
        .unwrap();
        let g = LatticeField::torus_from_fn(d, side, |x| {
            let h: i64 = x.iter().enumerate().map(|(i, c)| (2 * i as i64 + 3) * c).sum();
            ((h.rem_euclid(11)) as f64 + 0.5) / 11.0
        })
        .unwrap();
        out.push((f, g));
    }
    out
}

#[test]
fn acceptance_criteria() {
    let corpus = corpus();
    let config = RunConfig::default();
    let mut all = true;

    all &= report(1, "representation identities", Duration::from_secs(10), || {
        suite_verdict("identities", &config, &corpus, passes)
    });

    all &= report(2, "source-switching, triangle, Lebowitz and bubble-chain bounds", Duration::from_secs(60), || {
        suite_verdict("sst", &config, &corpus, passes)
    });

    all &= report(3, "lace reconstruction and partition of unity", Duration::from_secs(120), || {
        let v = suite_verdict("lace", &config, &corpus, passes);
        let r = run_suite("lace", &config, &corpus).unwrap();
        let orders = ["reconstruction[canonical]", "reconstruction[reversed]", "partition[canonical]", "partition[reversed]"];
        let covered = corpus.iter().all(|i| orders.iter().all(|c| r.rows.iter().any(|row| row.instance == i.id && row.check == *c)));
        Verdict { ok: v.ok && covered, note: v.note }
    });

    all &= report(4, "theorem inequalities with certified right-hand sides", Duration::from_secs(600), || {
        suite_verdict("theorems", &config, &corpus, passes)
    });

    all &= report(5, "convolution-bound constants stable across L", Duration::from_secs(120), || {
        let mut ok = true;
        let mut notes = Vec::new();
        for (d, a, b, radius) in [(1, 2.0, 1.0, 100), (3, 2.0, 2.0, 50), (5, 6.0, 3.0, 10)] {
            let (reports, spread) = convolution_bound_stability(d, a, b, &[1.0, 2.0, 4.0], radius).unwrap();
            ok &= reports.iter().all(|r| r.ratio.is_finite()) && spread <= 4.0;
            notes.push(format!("d={d} spread {spread:.3}"));
        }
        Verdict { ok, note: notes.join(", ") }
    });

    all &= report(6, "reduction scaling and decay exponent on the d=5 torus", Duration::from_secs(300), || {
        let torus = RunConfig { convbd_cases: Vec::new(), ..config.clone() };
        let red = suite_verdict("reductions", &torus, &[], passes);
        let dec = run_suite("decay", &torus, &[]).unwrap();
        let row = &dec.rows[0];
        Verdict {
            ok: red.ok && passes(row) && (row.lhs - 9.0).abs() <= 1.5,
            note: format!("{}; exponent {:.3} against {}", red.note, row.lhs, row.rhs),
        }
    });

    all &= report(7, "factorized kernels and spectral convolution against naive sums", Duration::from_secs(300), || {
        let mut worst_kernel = 0.0f64;
        for inst in corpus.iter().filter(|i| i.graph.num_vertices() <= 30) {
            for m in [0, 1, 3] {
                worst_kernel = worst_kernel.max(kernel_equivalence(inst, m));
            }
        }
        let mut worst_conv = 0.0f64;
        for (f, g) in convolution_battery() {
            let a = SpectralConvolver.convolve(&f, &g).unwrap();
            let b = DirectConvolver.convolve(&f, &g).unwrap();
            worst_conv = worst_conv.max(a.max_relative_difference(&b).unwrap());
        }
        Verdict {
            ok: worst_kernel <= 1e-10 && worst_conv <= 1e-12,
            note: format!("kernel rel err {worst_kernel:.2e}, convolution diff {worst_conv:.2e}"),
        }
    });

    assert!(all, "acceptance criteria failed; see the verdict lines above");
}
