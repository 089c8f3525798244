//! Verification suites over a graph corpus and torus proxy fields, with a
//! name → factory registry and CSV reporting.

mod checks;
mod corpus;

pub use checks::{
    DecaySuite, IdentitiesSuite, LaceSuite, ReductionsSuite, SstSuite, TheoremCheck, TheoremsSuite, theorem_checks,
};
pub use corpus::{default_corpus, default_shapes, emit_corpus, load_corpus, Instance, Shape};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::current::Caps;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusConfig {
    pub dimension: usize,
    pub side: usize,
    /// Range used by the decay fit.
    pub range: f64,
    /// Two ranges compared by the reduction suite.
    pub ranges: [f64; 2],
    /// `p` of the proxy `G = Σ_n p^n D^{*n}`.
    pub p_fraction: f64,
}

impl Default for TorusConfig {
    fn default() -> Self {
        TorusConfig { dimension: 5, side: 16, range: 2.0, ranges: [2.0, 4.0], p_fraction: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub identity_rtol: f64,
    /// Allowed distance of the fitted decay exponent from `3(d − 2)`.
    pub exponent: f64,
    /// Allowed factor between the measured range scaling and `L^{-d}`.
    pub volume_factor: f64,
    /// Allowed `max/min` spread of convolution-bound constants across `L`.
    pub convbd_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { identity_rtol: 1e-10, exponent: 1.5, volume_factor: 4.0, convbd_spread: 4.0 }
    }
}

/// One convolution-bound case `(d, a, b, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvBoundCase {
    pub dimension: usize,
    pub a: f64,
    pub b: f64,
    pub radius: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory of graph files; the built-in corpus when absent.
    pub corpus: Option<PathBuf>,
    pub betas: Vec<f64>,
    pub caps: Caps,
    /// Terms kept in truncated lower values of infinite sums.
    pub lower_terms: usize,
    pub torus: TorusConfig,
    pub tolerances: Tolerances,
    pub convbd_cases: Vec<ConvBoundCase>,
    pub convbd_ranges: Vec<f64>,
    pub suites: Vec<String>,
    pub out: PathBuf,
    /// Replaces `G[a][b]` by `−G[a][b]` before the theorem suite runs, to
    /// exercise the nonnegativity precondition.
    pub negate_g_entry: Option<[usize; 2]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            betas: vec![0.1, 0.5, 1.0],
            caps: Caps::default(),
            lower_terms: 64,
            torus: TorusConfig::default(),
            tolerances: Tolerances::default(),
            convbd_cases: vec![
                ConvBoundCase { dimension: 1, a: 2.0, b: 1.0, radius: 100 },
                ConvBoundCase { dimension: 3, a: 2.0, b: 2.0, radius: 50 },
                ConvBoundCase { dimension: 5, a: 6.0, b: 3.0, radius: 10 },
            ],
            convbd_ranges: vec![1.0, 2.0, 4.0],
            suites: REGISTRY.iter().map(|(n, _)| n.to_string()).collect(),
            out: PathBuf::from("out"),
            negate_g_entry: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        if [t.identity_rtol, t.exponent, t.volume_factor, t.convbd_spread].iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(Error::InvalidParameters("tolerances must be positive".into()));
        }
        if self.lower_terms == 0 {
            return Err(Error::InvalidParameters("lower_terms must be positive".into()));
        }
        if let Some(s) = self.suites.iter().find(|s| suite(s).is_err()) {
            return Err(Error::UnknownSuite(s.clone()));
        }
        Ok(())
    }

    pub fn corpus(&self) -> Result<Vec<Instance>> {
        match &self.corpus {
            Some(dir) => load_corpus(dir),
            None => default_corpus(&self.betas),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Pass,
    /// No counterexample, but no finite certified right-hand side either.
    Uncertified,
    /// Not evaluated, typically because an enumeration cap was exceeded.
    Skip,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Uncertified => "uncertified",
            Status::Skip => "skip",
            Status::Fail => "fail",
        })
    }
}

/// One reported check. For inequalities `margin = rhs − lhs`; for
/// identities it is the relative error.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub suite: String,
    pub instance: String,
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub status: Status,
    pub detail: String,
}

impl Row {
    pub fn new(suite: &str, instance: &str, check: impl Into<String>) -> Self {
        Row {
            suite: suite.into(),
            instance: instance.into(),
            check: check.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            status: Status::Pass,
            detail: String::new(),
        }
    }

    /// Row for an error raised while evaluating an instance: cap overruns are
    /// skipped, anything else fails.
    pub fn from_error(suite: &str, instance: &str, check: &str, e: &Error) -> Self {
        let status = if matches!(e, Error::CapExceeded { .. }) { Status::Skip } else { Status::Fail };
        let detail = match e {
            Error::NegativeField { .. } => format!("precondition: {e}"),
            _ => e.to_string(),
        };
        Row { status, detail, ..Row::new(suite, instance, check) }
    }
}

/// Rows of one suite plus its wall time, which stays out of the CSV.
#[derive(Debug, Clone)]
pub struct Report {
    pub suite: String,
    pub rows: Vec<Row>,
    pub runtime: Duration,
}

impl Report {
    pub fn count(&self, status: Status) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }

    pub fn failed(&self) -> bool {
        self.count(Status::Fail) > 0
    }

    /// Smallest finite margin, `NaN` when no row has one.
    pub fn worst_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).filter(|m| m.is_finite()).reduce(f64::min).unwrap_or(f64::NAN)
    }
}

pub trait Suite: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, config: &RunConfig, corpus: &[Instance]) -> Result<Vec<Row>>;
}

type Factory = fn() -> Box<dyn Suite>;

pub const REGISTRY: &[(&str, Factory)] = &[
    ("identities", || Box::new(IdentitiesSuite)),
    ("sst", || Box::new(SstSuite)),
    ("lace", || Box::new(LaceSuite)),
    ("theorems", || Box::new(TheoremsSuite)),
    ("reductions", || Box::new(ReductionsSuite)),
    ("decay", || Box::new(DecaySuite)),
];

pub fn suite(name: &str) -> Result<Box<dyn Suite>> {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| f())
        .ok_or_else(|| Error::UnknownSuite(name.to_string()))
}

pub fn suite_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

pub fn run_suite(name: &str, config: &RunConfig, corpus: &[Instance]) -> Result<Report> {
    let s = suite(name)?;
    let start = std::time::Instant::now();
    let mut rows = s.run(config, corpus)?;
    rows.sort_by(|a, b| a.instance.cmp(&b.instance));
    Ok(Report { suite: name.to_string(), rows, runtime: start.elapsed() })
}

fn number(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        // Adding zero turns a signed zero into `0`.
        format!("{:e}", v + 0.0)
    }
}

/// CSV body of a report; identical inputs give identical bytes.
pub fn render_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["suite", "instance", "check", "lhs", "rhs", "margin", "status", "detail"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.suite.clone(),
            r.instance.clone(),
            r.check.clone(),
            number(r.lhs),
            number(r.rhs),
            number(r.margin),
            r.status.to_string(),
            r.detail.clone(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn render_summary(reports: &[Report]) -> String {
    let mut s = String::new();
    for r in reports {
        s.push_str(&format!(
            "{:<11} rows {:>5}  pass {:>5}  fail {:>3}  uncertified {:>3}  skip {:>3}  worst margin {:>12.4e}  {:.2?}\n",
            r.suite,
            r.rows.len(),
            r.count(Status::Pass),
            r.count(Status::Fail),
            r.count(Status::Uncertified),
            r.count(Status::Skip),
            r.worst_margin(),
            r.runtime,
        ));
    }
    s
}

/// Writes `<suite>.csv` per report and `summary.txt`.
pub fn write_reports(dir: &Path, reports: &[Report]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in reports {
        fs::write(dir.join(format!("{}.csv", r.suite)), render_csv(&r.rows)?)?;
    }
    fs::write(dir.join("summary.txt"), render_summary(reports))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        assert_eq!(suite_names(), ["identities", "sst", "lace", "theorems", "reductions", "decay"]);
        assert_eq!(suite("lace").unwrap().name(), "lace");
        assert!(matches!(suite("nope").err(), Some(Error::UnknownSuite(_))));
    }

    #[test]
    fn config_round_trip_and_validation() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        assert!(RunConfig::parse("suites = [\"bogus\"]").is_err());
        assert!(RunConfig::parse("[tolerances]\nidentity_rtol = 0.0").is_err());
        assert!(RunConfig::parse("nonsense = 1").is_err());
    }

    #[test]
    fn csv_is_plain_and_stable() {
        let mut r = Row::new("s", "i", "c");
        r.lhs = 0.5;
        r.rhs = f64::INFINITY;
        let a = render_csv(&[r.clone()]).unwrap();
        assert_eq!(a, render_csv(&[r]).unwrap());
        assert!(a.lines().nth(1).unwrap().starts_with("s,i,c,5e-1,inf,,pass"));
    }
}
