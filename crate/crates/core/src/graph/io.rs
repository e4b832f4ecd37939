//! Plain-text graph formats.
//!
//! * edge list: one `u v` pair per line, `#` comments, LF or CRLF. A comment of
//!   the form `# nodes N` declares the node count; ids `>= N` are then range
//!   errors, and trailing isolated nodes survive a write/read cycle.
//! * features: CSV with header `node,f0,...,f{m-1}`; absent nodes get zeros.
//! * labels: CSV with header `node,label,known`; `label` may be empty for
//!   unknown nodes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Graph, NodeId, NodeLabels};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parsed edge list: declared node count (if any) and raw pairs.
#[derive(Debug, Clone)]
pub struct EdgeListFile {
    pub declared_nodes: Option<usize>,
    pub pairs: Vec<(NodeId, NodeId)>,
}

pub fn read_edge_list(path: &Path) -> Result<EdgeListFile> {
    let text = read_text(path)?;
    let mut declared_nodes = None;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            if words.next() == Some("nodes") {
                let n = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(path, line_no, "malformed `# nodes N` header"))?;
                declared_nodes = Some(n);
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut next_id = || -> Result<NodeId> {
            let tok = fields
                .next()
                .ok_or_else(|| parse_err(path, line_no, "expected two node ids"))?;
            tok.parse::<NodeId>()
                .map_err(|_| parse_err(path, line_no, format!("invalid node id `{tok}`")))
        };
        let u = next_id()?;
        let v = next_id()?;
        if fields.next().is_some() {
            return Err(parse_err(path, line_no, "expected exactly two fields"));
        }
        if let Some(n) = declared_nodes {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::Range { id, count: n });
                }
            }
        }
        pairs.push((u, v));
    }
    Ok(EdgeListFile { declared_nodes, pairs })
}

fn csv_rows(
    path: &Path,
    text: &str,
    header_check: impl Fn(&[&str]) -> bool,
    expected: &str,
) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(path, 1, "missing header"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if !header_check(&cols) {
        return Err(parse_err(path, hline, format!("expected header `{expected}`")));
    }
    let width = cols.len();
    let mut rows = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != width {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        rows.push((line_no, fields));
    }
    Ok(rows)
}

fn parse_node(path: &Path, line: usize, tok: &str) -> Result<NodeId> {
    tok.parse::<NodeId>()
        .map_err(|_| parse_err(path, line, format!("invalid node id `{tok}`")))
}

/// Feature rows keyed by node id, plus the feature dimension.
pub fn read_features(path: &Path) -> Result<(usize, Vec<(NodeId, Vec<f64>)>)> {
    let text = read_text(path)?;
    let rows = csv_rows(
        path,
        &text,
        |cols| cols.first() == Some(&"node") && cols[1..].iter().enumerate().all(|(i, c)| *c == format!("f{i}")),
        "node,f0,...",
    )?;
    let header_width = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.split(',').count())
        .unwrap_or(1);
    let dim = header_width - 1;
    let mut out = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        let node = parse_node(path, line, &fields[0])?;
        let values = fields[1..]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, line, format!("invalid feature value `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((node, values));
    }
    Ok((dim, out))
}

/// `(node, label, known)` rows.
pub fn read_labels(path: &Path) -> Result<Vec<(NodeId, Option<usize>, bool)>> {
    let text = read_text(path)?;
    let rows = csv_rows(path, &text, |c| c == ["node", "label", "known"], "node,label,known")?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        let node = parse_node(path, line, &f[0])?;
        let label = if f[1].is_empty() {
            None
        } else {
            Some(
                f[1].parse::<usize>()
                    .map_err(|_| parse_err(path, line, format!("invalid class id `{}`", f[1])))?,
            )
        };
        let known = match f[2].as_str() {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(path, line, format!("known must be 0 or 1, got `{other}`"))),
        };
        if known && label.is_none() {
            return Err(parse_err(path, line, "known node without a label"));
        }
        out.push((node, label, known));
    }
    Ok(out)
}

/// Loads a graph and its labels.
///
/// Without a feature file every node gets the 1-dimensional feature `[1.0]`.
/// Without a label file the returned labels are empty (`class_count == 0`).
pub fn load_graph(
    edge_path: &Path,
    feature_path: Option<&Path>,
    label_path: Option<&Path>,
) -> Result<(Graph, NodeLabels)> {
    let edges = read_edge_list(edge_path)?;
    let features = feature_path.map(read_features).transpose()?;
    let labels = label_path.map(read_labels).transpose()?;

    let n = match edges.declared_nodes {
        Some(n) => n,
        None => {
            let from_edges = edges.pairs.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
            let from_features = features
                .as_ref()
                .and_then(|(_, rows)| rows.iter().map(|r| r.0 + 1).max())
                .unwrap_or(0);
            let from_labels = labels
                .as_ref()
                .and_then(|rows| rows.iter().map(|r| r.0 + 1).max())
                .unwrap_or(0);
            from_edges.max(from_features).max(from_labels)
        }
    };

    let feature_matrix = match features {
        None => Matrix::filled(n, 1, 1.0),
        Some((dim, rows)) => {
            let mut m = Matrix::zeros(n, dim);
            for (node, values) in rows {
                if node >= n {
                    return Err(Error::Range { id: node, count: n });
                }
                m.row_mut(node).copy_from_slice(&values);
            }
            m
        }
    };

    let graph = Graph::from_edges(n, edges.pairs, feature_matrix)?;

    let node_labels = match labels {
        None => NodeLabels::new(vec![None; n], vec![false; n], 0)?,
        Some(rows) => {
            let mut label = vec![None; n];
            let mut known = vec![false; n];
            let mut class_count = 0;
            for (node, l, k) in rows {
                if node >= n {
                    return Err(Error::Range { id: node, count: n });
                }
                label[node] = l;
                known[node] = k;
                if let Some(c) = l {
                    class_count = class_count.max(c + 1);
                }
            }
            NodeLabels::new(label, known, class_count)?
        }
    };
    Ok((graph, node_labels))
}

pub fn write_edge_list(path: &Path, graph: &Graph) -> Result<()> {
    let mut s = String::with_capacity(graph.edge_count() * 12 + 16);
    writeln!(s, "# nodes {}", graph.node_count()).unwrap();
    for &(u, v) in graph.edges() {
        writeln!(s, "{u} {v}").unwrap();
    }
    write_text(path, &s)
}

pub fn write_features(path: &Path, features: &Matrix) -> Result<()> {
    let mut s = String::from("node");
    for j in 0..features.cols() {
        write!(s, ",f{j}").unwrap();
    }
    s.push('\n');
    for i in 0..features.rows() {
        write!(s, "{i}").unwrap();
        for v in features.row(i) {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn write_labels(path: &Path, labels: &NodeLabels) -> Result<()> {
    let mut s = String::from("node,label,known\n");
    for i in 0..labels.len() {
        match labels.label[i] {
            Some(c) => writeln!(s, "{i},{c},{}", u8::from(labels.known[i])).unwrap(),
            None => writeln!(s, "{i},,{}", u8::from(labels.known[i])).unwrap(),
        }
    }
    write_text(path, &s)
}
