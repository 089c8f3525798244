use std::fs;
use std::path::{Path, PathBuf};

use crate::coupling_graph::{CouplingGraph, GraphFile};
use crate::error::{Error, Result};

/// A named graph at one inverse temperature.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub graph: CouplingGraph,
}

/// `(name, vertices, bonds, β ceiling)`.
pub type Shape = (&'static str, Vec<&'static str>, Vec<(&'static str, &'static str)>, f64);

/// Shapes of the built-in corpus.
pub fn default_shapes() -> Vec<Shape> {
    let cycle = |vs: &[&'static str]| -> Vec<(&'static str, &'static str)> {
        (0..vs.len()).map(|i| (vs[i], vs[(i + 1) % vs.len()])).collect()
    };
    let mut chord = cycle(&["a", "b", "c", "d"]);
    chord.push(("a", "c"));
    vec![
        ("single-bond", vec!["o", "x"], vec![("o", "x")], f64::INFINITY),
        ("path-3", vec!["a", "b", "c"], vec![("a", "b"), ("b", "c")], f64::INFINITY),
        ("triangle", vec!["a", "b", "c"], cycle(&["a", "b", "c"]), f64::INFINITY),
        ("cycle-4", vec!["a", "b", "c", "d"], cycle(&["a", "b", "c", "d"]), f64::INFINITY),
        ("cycle-4-chord", vec!["a", "b", "c", "d"], chord, f64::INFINITY),
        (
            "k4",
            vec!["a", "b", "c", "d"],
            vec![("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")],
            0.5,
        ),
        (
            "grid-2x3",
            vec!["a0", "a1", "a2", "b0", "b1", "b2"],
            vec![("a0", "a1"), ("a1", "a2"), ("b0", "b1"), ("b1", "b2"), ("a0", "b0"), ("a1", "b1"), ("a2", "b2")],
            0.5,
        ),
        ("cycle-5", vec!["a", "b", "c", "d", "e"], cycle(&["a", "b", "c", "d", "e"]), f64::INFINITY),
    ]
}

/// Every shape at every `β` of the grid up to its ceiling, with unit couplings.
pub fn default_corpus(betas: &[f64]) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (name, vs, bs, ceiling) in default_shapes() {
        for &beta in betas.iter().filter(|&&b| b <= ceiling) {
            let bonds: Vec<(&str, &str, f64)> = bs.iter().map(|&(u, v)| (u, v, 1.0)).collect();
            let graph = CouplingGraph::from_labels(&vs, &bonds, beta)?;
            out.push(Instance { id: format!("{name}@{beta}"), graph });
        }
    }
    Ok(out)
}

fn file_name(id: &str) -> String {
    format!("{}.toml", id.replace('@', "_b"))
}

/// Writes one graph file per instance and returns the paths in corpus order.
pub fn emit_corpus(dir: &Path, corpus: &[Instance]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    corpus
        .iter()
        .map(|inst| {
            let path = dir.join(file_name(&inst.id));
            fs::write(&path, GraphFile::from_graph(&inst.graph).render()?)?;
            Ok(path)
        })
        .collect()
}

/// Reads every `*.toml` graph file of a directory, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<Instance>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Io(format!("no graph files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let graph = GraphFile::parse(&fs::read_to_string(p)?)?.build()?;
            let id = p.file_stem().map(|s| s.to_string_lossy().replace("_b", "@")).unwrap_or_default();
            Ok(Instance { id, graph })
        })
        .collect()
}
