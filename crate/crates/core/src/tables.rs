//! Tab-separated side tables: writers for every pipeline output and readers
//! for the ones that feed later subcommands.

use std::io::{Read, Write};

use crate::association::{phi, ContingencyTable, EdgeScore};
use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::latent::ScreeEntry;
use crate::matrix::{NeighborEdge, NeighborGraph};
use crate::structure::{HistogramBin, SweepPoint};

const NA: &str = "NA";

fn opt(value: Option<f64>) -> String {
    value.map_or_else(|| NA.to_string(), |v| v.to_string())
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().delimiter(b'\t').from_writer(out)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .from_reader(input)
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            line: pos.line(),
            message: e.to_string(),
        },
        None => Error::InvalidData(e.to_string()),
    }
}

fn finish<W: Write>(mut wtr: csv::Writer<W>) -> Result<()> {
    wtr.flush()?;
    Ok(())
}

/// `user1 user2 cosine phi a b c d`
pub fn write_edges<W: Write>(g: &NeighborGraph, users: &[String], out: W) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(["user1", "user2", "cosine", "phi", "a", "b", "c", "d"])
        .map_err(csv_err)?;
    for e in &g.edges {
        let mut row = vec![users[e.u].clone(), users[e.v].clone(), e.cosine.to_string()];
        match &e.score {
            Some(s) => {
                row.push(opt(s.phi.value));
                let t = s.table;
                row.extend([t.a, t.b, t.c, t.d].map(|x| x.to_string()));
            }
            None => row.extend(std::iter::repeat_n(NA.to_string(), 5)),
        }
        wtr.write_record(&row).map_err(csv_err)?;
    }
    finish(wtr)
}

/// Edge table read back from TSV; node indices follow `users`.
#[derive(Debug, Clone)]
pub struct EdgeTable {
    pub users: Vec<String>,
    pub graph: NeighborGraph,
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(idx).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {name}"),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {name} `{raw}`"),
    })
}

/// Reads an edge TSV. When `universe` is given, nodes are exactly those
/// users (sorted) and every edge endpoint must be among them; otherwise the
/// nodes are the sorted endpoints.
pub fn read_edges<R: Read>(input: R, universe: Option<&[String]>) -> Result<EdgeTable> {
    let mut raw = Vec::new();
    for rec in reader(input).records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let u = rec.get(0).unwrap_or_default().to_string();
        let v = rec.get(1).unwrap_or_default().to_string();
        if u.is_empty() || v.is_empty() {
            return Err(Error::Parse {
                line,
                message: "missing user token".into(),
            });
        }
        let cosine: f64 = parse_field(&rec, 2, "cosine")?;
        let table = if rec.get(4) == Some(NA) || rec.len() < 8 {
            None
        } else {
            Some(ContingencyTable::new(
                parse_field(&rec, 4, "a")?,
                parse_field(&rec, 5, "b")?,
                parse_field(&rec, 6, "c")?,
                parse_field(&rec, 7, "d")?,
            ))
        };
        raw.push((u, v, cosine, table));
    }

    let mut users: Vec<String> = match universe {
        Some(list) => list.to_vec(),
        None => raw
            .iter()
            .flat_map(|(u, v, ..)| [u.clone(), v.clone()])
            .collect(),
    };
    users.sort();
    users.dedup();
    let index = |token: &str| {
        users
            .binary_search_by(|x| x.as_str().cmp(token))
            .map_err(|_| Error::InvalidData(format!("edge endpoint `{token}` is not a known user")))
    };

    let mut edges = Vec::with_capacity(raw.len());
    for (u, v, cosine, table) in &raw {
        let (a, b) = (index(u)?, index(v)?);
        if a == b {
            return Err(Error::SelfComparison(a));
        }
        edges.push(NeighborEdge {
            u: a.min(b),
            v: a.max(b),
            cosine: *cosine,
            score: table.map(|t| EdgeScore {
                table: t,
                phi: phi(&t),
            }),
        });
    }
    edges.sort_by_key(|e| (e.u, e.v));
    edges.dedup_by(|x, y| x.u == y.u && x.v == y.v);
    let graph = NeighborGraph {
        n_nodes: users.len(),
        k: 0,
        edges,
    };
    Ok(EdgeTable { users, graph })
}

/// `threshold n_edges n_lcc_edges log_ratio n_components`
pub fn write_sweep<W: Write>(sweep: &[SweepPoint], out: W) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record([
        "threshold",
        "n_edges",
        "n_lcc_edges",
        "log_ratio",
        "n_components",
    ])
    .map_err(csv_err)?;
    for p in sweep {
        wtr.write_record([
            p.threshold.to_string(),
            p.n_edges.to_string(),
            p.n_lcc_edges.to_string(),
            opt(p.log_ratio),
            p.n_components.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(wtr)
}

/// `bin lower upper count`
pub fn write_histogram<W: Write>(hist: &[HistogramBin], out: W) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(["bin", "lower", "upper", "count"])
        .map_err(csv_err)?;
    for b in hist {
        wtr.write_record([
            b.bin.to_string(),
            b.lower.to_string(),
            b.upper.to_string(),
            b.count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(wtr)
}

fn opt_field(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<Option<f64>> {
    if rec.get(idx) == Some(NA) {
        Ok(None)
    } else {
        parse_field(rec, idx, name).map(Some)
    }
}

/// Reads a sweep TSV written by [`write_sweep`].
pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepPoint>> {
    reader(input)
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(SweepPoint {
                threshold: parse_field(&rec, 0, "threshold")?,
                n_edges: parse_field(&rec, 1, "n_edges")?,
                n_lcc_edges: parse_field(&rec, 2, "n_lcc_edges")?,
                log_ratio: opt_field(&rec, 3, "log_ratio")?,
                n_components: parse_field(&rec, 4, "n_components")?,
            })
        })
        .collect()
}

/// Reads a histogram TSV written by [`write_histogram`].
pub fn read_histogram<R: Read>(input: R) -> Result<Vec<HistogramBin>> {
    reader(input)
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(HistogramBin {
                bin: parse_field(&rec, 0, "bin")?,
                lower: parse_field(&rec, 1, "lower")?,
                upper: parse_field(&rec, 2, "upper")?,
                count: parse_field(&rec, 3, "count")?,
            })
        })
        .collect()
}

/// `<id_column> dim1 … dimR`
pub fn write_scores<W: Write>(
    id_column: &str,
    ids: &[String],
    rows: &[Vec<f64>],
    out: W,
) -> Result<()> {
    let mut wtr = writer(out);
    let dims = rows.first().map_or(0, Vec::len);
    let mut header = vec![id_column.to_string()];
    header.extend((1..=dims).map(|d| format!("dim{d}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for (id, row) in ids.iter().zip(rows) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(f64::to_string));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    finish(wtr)
}

/// Reads a score TSV written by [`write_scores`].
pub fn read_scores<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = reader(input);
    let dims = rdr.headers().map_err(csv_err)?.len().saturating_sub(1);
    let (mut ids, mut rows) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        ids.push(rec.get(0).unwrap_or_default().to_string());
        let row = (1..=dims)
            .map(|i| parse_field(&rec, i, "score"))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((ids, rows))
}

/// `dimension singular_value variance_fraction`
pub fn write_scree<W: Write>(scree: &[ScreeEntry], out: W) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(["dimension", "singular_value", "variance_fraction"])
        .map_err(csv_err)?;
    for s in scree {
        wtr.write_record([
            s.dimension.to_string(),
            s.singular_value.to_string(),
            s.variance_fraction.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(wtr)
}

/// `user label strength`
pub fn write_clusters<W: Write>(
    users: &[String],
    assignment: &ClusterAssignment,
    out: W,
) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(["user", "label", "strength"])
        .map_err(csv_err)?;
    for ((user, label), strength) in users
        .iter()
        .zip(&assignment.labels)
        .zip(&assignment.membership_strength)
    {
        wtr.write_record([user.clone(), label.to_string(), strength.to_string()])
            .map_err(csv_err)?;
    }
    finish(wtr)
}

/// Reads a cluster TSV; rows are returned sorted by user token.
pub fn read_clusters<R: Read>(input: R) -> Result<(Vec<String>, ClusterAssignment)> {
    let mut rows = Vec::new();
    for rec in reader(input).records() {
        let rec = rec.map_err(csv_err)?;
        let user = rec.get(0).unwrap_or_default().to_string();
        let label: i64 = parse_field(&rec, 1, "label")?;
        let strength: f64 = parse_field(&rec, 2, "strength")?;
        rows.push((user, label, strength));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidData("duplicate user in cluster table".into()));
    }
    let n_clusters = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0).max(0) as usize;
    let users = rows.iter().map(|r| r.0.clone()).collect();
    let assignment = ClusterAssignment {
        labels: rows.iter().map(|r| r.1).collect(),
        n_clusters,
        membership_strength: rows.iter().map(|r| r.2).collect(),
    };
    Ok((users, assignment))
}
