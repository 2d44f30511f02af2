//! Output file formats: CSV writers for samples, paths and analytic curves,
//! and the plain-text graph format with exact binary64 round-tripping.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use quasistat_core::{Stability, TopGraph};

pub const GRAPH_HEADER: &str = "quasistat-topgraph v1";

/// 17 significant digits: parses back to the identical binary64 value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn stability_str(s: Stability) -> &'static str {
    s.as_str()
}

fn parse_stability(s: &str) -> Result<Stability> {
    match s {
        "stable" => Ok(Stability::Stable),
        "unstable" => Ok(Stability::Unstable),
        "critical" => Ok(Stability::Critical),
        _ => bail!("unknown stability {s:?}"),
    }
}

/// One serialized graph node; the planner-facing mirror of a `TopNode`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphNodeRecord {
    pub id: usize,
    pub bottom_index: usize,
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub energy: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdgeRecord {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// The serialized form of a lifted graph.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphFile {
    pub nodes: Vec<GraphNodeRecord>,
    pub edges: Vec<GraphEdgeRecord>,
}

impl GraphFile {
    pub fn from_top_graph(graph: &TopGraph) -> Self {
        let nodes = graph
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| GraphNodeRecord {
                id,
                bottom_index: n.bottom_index,
                u: n.equilibrium.u.iter().copied().collect(),
                z: n.equilibrium.z_star.iter().copied().collect(),
                energy: n.equilibrium.energy,
                stability: n.equilibrium.stability,
            })
            .collect();
        let edges = graph
            .edges
            .iter()
            .map(|e| GraphEdgeRecord {
                from: e.from,
                to: e.to,
                weight: e.weight,
            })
            .collect();
        Self { nodes, edges }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(GRAPH_HEADER);
        out.push('\n');
        for n in &self.nodes {
            write!(out, "node {} {}", n.id, n.bottom_index).unwrap();
            for v in n.u.iter().chain(n.z.iter()) {
                write!(out, " {}", fmt_f64(*v)).unwrap();
            }
            writeln!(out, " {} {}", fmt_f64(n.energy), stability_str(n.stability)).unwrap();
        }
        for e in &self.edges {
            writeln!(out, "edge {} {} {}", e.from, e.to, fmt_f64(e.weight)).unwrap();
        }
        out
    }

    /// Parses the serialized form; `state_dim`/`control_dim` split the
    /// numeric payload of node records into `u` and `z`.
    pub fn parse(text: &str, state_dim: usize, control_dim: usize) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(header) if header.trim() == GRAPH_HEADER => {}
            other => bail!("bad graph header {other:?}"),
        }
        let mut file = GraphFile::default();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let context = || format!("graph line {}", lineno + 2);
            match parts.next() {
                Some("node") => {
                    let fields: Vec<&str> = parts.collect();
                    let expected = 2 + control_dim + state_dim + 2;
                    if fields.len() != expected {
                        bail!("{}: expected {} fields, got {}", context(), expected, fields.len());
                    }
                    let id: usize = fields[0].parse().with_context(context)?;
                    let bottom_index: usize = fields[1].parse().with_context(context)?;
                    let mut numbers = fields[2..2 + control_dim + state_dim + 1].iter();
                    let mut take = |count: usize| -> Result<Vec<f64>> {
                        (0..count)
                            .map(|_| {
                                numbers
                                    .next()
                                    .context("missing field")?
                                    .parse::<f64>()
                                    .with_context(context)
                            })
                            .collect()
                    };
                    let u = take(control_dim)?;
                    let z = take(state_dim)?;
                    let energy = take(1)?[0];
                    let stability = parse_stability(fields[fields.len() - 1])?;
                    file.nodes.push(GraphNodeRecord {
                        id,
                        bottom_index,
                        u,
                        z,
                        energy,
                        stability,
                    });
                }
                Some("edge") => {
                    let fields: Vec<&str> = parts.collect();
                    if fields.len() != 3 {
                        bail!("{}: expected 3 edge fields, got {}", context(), fields.len());
                    }
                    file.edges.push(GraphEdgeRecord {
                        from: fields[0].parse().with_context(context)?,
                        to: fields[1].parse().with_context(context)?,
                        weight: fields[2].parse().with_context(context)?,
                    });
                }
                other => bail!("{}: unknown record {other:?}", context()),
            }
        }
        Ok(file)
    }
}

/// Builds a CSV from a header and rows of preformatted cells.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
