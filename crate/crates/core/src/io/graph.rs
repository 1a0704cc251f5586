//! Graph text format: a header line `n m`, then `n` node values
//! (whitespace separated, any line layout), then `m` lines `u v` of 0-based
//! endpoints. `#` starts a comment.

use std::path::Path;

use super::{read_text, write_atomic};
use crate::error::{Error, Result};
use crate::filtration::FilteredGraph;

pub fn graph_from_text(text: &str, what: &str) -> Result<FilteredGraph> {
    let tokens: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .flat_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("");
            line.split_whitespace().map(move |t| (i + 1, t))
        })
        .collect();
    let mut pos = 0;
    let mut next = |expect: &str| -> Result<(usize, &str)> {
        let t = tokens.get(pos).copied().ok_or_else(|| {
            let line = tokens.last().map_or(1, |t| t.0);
            Error::parse(what, format!("line {line}"), format!("unexpected end of file, expected {expect}"))
        })?;
        pos += 1;
        Ok(t)
    };
    let parse_err = |line: usize, t: &str, expect: &str| {
        Error::parse(what, format!("line {line}"), format!("'{t}' is not a valid {expect}"))
    };
    let mut counts = [0usize; 2];
    for (c, expect) in counts.iter_mut().zip(["node count", "edge count"]) {
        let (line, t) = next(expect)?;
        *c = t.parse().map_err(|_| parse_err(line, t, expect))?;
    }
    let [n, m] = counts;
    let mut values = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let (line, t) = next("node value")?;
        values.push(t.parse::<f64>().map_err(|_| parse_err(line, t, "number"))?);
    }
    let mut edges = Vec::with_capacity(m.min(1 << 20));
    for _ in 0..m {
        let mut ends = [0usize; 2];
        for e in &mut ends {
            let (line, t) = next("edge endpoint")?;
            *e = t.parse().map_err(|_| parse_err(line, t, "edge endpoint"))?;
        }
        edges.push((ends[0], ends[1]));
    }
    if let Some((line, t)) = tokens.get(pos) {
        return Err(Error::parse(what, format!("line {line}"), format!("trailing token '{t}'")));
    }
    FilteredGraph::new(values, edges).map_err(|e| Error::parse(what, "graph", e.to_string()))
}

pub fn graph_to_text(g: &FilteredGraph) -> String {
    let mut out = format!("{} {}\n", g.num_nodes(), g.edges().len());
    let values: Vec<String> = g.node_values().iter().map(|v| format!("{v}")).collect();
    out.push_str(&values.join(" "));
    out.push('\n');
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn load_graph(path: &Path) -> Result<FilteredGraph> {
    graph_from_text(&read_text(path)?, &path.display().to_string())
}

pub fn save_graph(path: &Path, g: &FilteredGraph) -> Result<()> {
    write_atomic(path, graph_to_text(g).as_bytes())
}
