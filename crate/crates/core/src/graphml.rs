//! GraphML export of the scored neighbor graph, for external layout tools.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::matrix::NeighborGraph;
use crate::structure::CandidateSet;

const KEYS: &[(&str, &str, &str)] = &[
    ("user", "node", "string"),
    ("cluster", "node", "int"),
    ("is_candidate", "node", "boolean"),
    ("max_phi", "node", "double"),
    ("degree", "node", "int"),
    ("cosine", "edge", "double"),
    ("phi", "edge", "double"),
];

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Writes the graph with one node per user. Nodes carry the user token,
/// cluster label, candidate flag, largest incident φ (omitted when no
/// incident edge has a defined φ) and degree; edges carry cosine and φ.
pub fn write_graphml<W: Write>(
    g: &NeighborGraph,
    users: &[String],
    labels: &ClusterAssignment,
    candidates: &CandidateSet,
    mut out: W,
) -> Result<()> {
    if users.len() != g.n_nodes || labels.labels.len() != g.n_nodes {
        return Err(Error::Dimension(format!(
            "graph has {} nodes, {} user tokens and {} cluster labels",
            g.n_nodes,
            users.len(),
            labels.labels.len()
        )));
    }
    let degrees = g.degrees();
    let max_phi = g.max_incident_phi();

    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        out,
        r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" xsi:schemaLocation="http://graphml.graphdrawing.org/xmlns http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd">"#
    )?;
    for (id, domain, ty) in KEYS {
        writeln!(
            out,
            r#"  <key id="{id}" for="{domain}" attr.name="{id}" attr.type="{ty}"/>"#
        )?;
    }
    writeln!(out, r#"  <graph id="neighbors" edgedefault="undirected">"#)?;
    for node in 0..g.n_nodes {
        writeln!(out, r#"    <node id="n{node}">"#)?;
        writeln!(
            out,
            r#"      <data key="user">{}</data>"#,
            escape(&users[node])
        )?;
        writeln!(
            out,
            r#"      <data key="cluster">{}</data>"#,
            labels.labels[node]
        )?;
        writeln!(
            out,
            r#"      <data key="is_candidate">{}</data>"#,
            candidates.contains(node)
        )?;
        if let Some(phi) = max_phi[node] {
            writeln!(out, r#"      <data key="max_phi">{phi}</data>"#)?;
        }
        writeln!(out, r#"      <data key="degree">{}</data>"#, degrees[node])?;
        writeln!(out, "    </node>")?;
    }
    for (i, e) in g.edges.iter().enumerate() {
        writeln!(
            out,
            r#"    <edge id="e{i}" source="n{}" target="n{}">"#,
            e.u, e.v
        )?;
        writeln!(out, r#"      <data key="cosine">{}</data>"#, e.cosine)?;
        if let Some(phi) = e.phi() {
            writeln!(out, r#"      <data key="phi">{phi}</data>"#)?;
        }
        writeln!(out, "    </edge>")?;
    }
    writeln!(out, "  </graph>")?;
    writeln!(out, "</graphml>")?;
    Ok(())
}

pub fn export_graphml(
    g: &NeighborGraph,
    users: &[String],
    labels: &ClusterAssignment,
    candidates: &CandidateSet,
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_graphml(g, users, labels, candidates, &mut out).map_err(|e| match e {
        Error::Stream(io) => Error::io(path, io),
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}
