//! File formats: text edge lists, CSV or `FAF1` binary feature matrices,
//! CSV labels and JSON split files.
//!
//! `FAF1` layout: the four magic bytes `FAF1`, then `rows` and `cols` as
//! little-endian `u64`, then `rows * cols` little-endian `f32` values in
//! row-major order.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{FafError, Result};
use crate::features::{check_finite, FeatureMatrix};
use crate::graph::Graph;
use crate::splits::{LabeledSplits, Split};

pub const FEATURE_MAGIC: &[u8; 4] = b"FAF1";
const FEATURE_HEADER_LEN: usize = 4 + 8 + 8;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| FafError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| FafError::io(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| FafError::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| FafError::io(path, e))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    parse_edge_list(&read_text(path.as_ref())?)
}

/// Parses `u v` lines with `#` comments and an optional `#nodes N` header.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut declared_nodes: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_index: Option<usize> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(count) = comment.trim_start().strip_prefix("nodes") {
                let count = count.trim();
                let n = count.parse::<usize>().map_err(|_| FafError::Parse {
                    line: line_no,
                    message: format!("invalid node count {count:?}"),
                })?;
                declared_nodes = Some(n);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut next_index = || -> Result<usize> {
            let token = fields.next().ok_or_else(|| FafError::Parse {
                line: line_no,
                message: "expected two node indices".to_string(),
            })?;
            token.parse::<usize>().map_err(|e| FafError::Parse {
                line: line_no,
                message: format!("invalid node index {token:?}: {e}"),
            })
        };
        let u = next_index()?;
        let v = next_index()?;
        if fields.next().is_some() {
            return Err(FafError::Parse {
                line: line_no,
                message: "expected exactly two node indices".to_string(),
            });
        }
        max_index = Some(max_index.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v, line_no));
    }

    let num_nodes = match (declared_nodes, max_index) {
        (Some(n), _) => n,
        (None, Some(m)) => m.checked_add(1).ok_or_else(|| FafError::Parse {
            line: 0,
            message: "node index overflow".to_string(),
        })?,
        (None, None) => return Err(FafError::Empty("edge list has no nodes".to_string())),
    };
    if num_nodes == 0 {
        return Err(FafError::Empty("graph must have at least one node".to_string()));
    }
    for &(u, v, line) in &edges {
        if u.max(v) >= num_nodes {
            return Err(FafError::Parse {
                line,
                message: format!("node index {} exceeds declared node count {num_nodes}", u.max(v)),
            });
        }
    }
    Graph::from_edges(num_nodes, edges.into_iter().map(|(u, v, _)| (u, v)))
}

/// Canonical text form: node-count header, then `u v` with `u < v` sorted.
pub fn format_edge_list(graph: &Graph) -> String {
    let mut out = format!("#nodes {}\n", graph.num_nodes());
    for (u, v) in graph.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn save_graph(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), format_edge_list(graph))
}

/// Loads CSV or `FAF1` features (detected by the magic bytes) and checks the
/// row count against `num_nodes`.
pub fn load_features(path: impl AsRef<Path>, num_nodes: usize) -> Result<FeatureMatrix> {
    let bytes = read_bytes(path.as_ref())?;
    let features = if bytes.starts_with(FEATURE_MAGIC) {
        decode_features_binary(&bytes)?
    } else {
        let text = String::from_utf8(bytes).map_err(|_| FafError::Parse {
            line: 0,
            message: "feature file is neither FAF1 binary nor UTF-8 CSV".to_string(),
        })?;
        parse_features_csv(&text)?
    };
    if features.num_nodes() != num_nodes {
        return Err(FafError::InvalidData(format!(
            "feature file has {} rows but the graph has {num_nodes} nodes",
            features.num_nodes()
        )));
    }
    Ok(features)
}

pub fn parse_features_csv(text: &str) -> Result<FeatureMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row_index = rows.len();
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let field = field.trim();
            let value = field.parse::<f64>().map_err(|_| FafError::Parse {
                line: i + 1,
                message: format!("row {row_index}, column {col}: invalid number {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(FafError::Parse {
                    line: i + 1,
                    message: format!("row {row_index}, column {col}: non-finite value {field:?}"),
                });
            }
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(FafError::Parse {
                    line: i + 1,
                    message: format!(
                        "ragged row {row_index}: {} columns, expected {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(FafError::Empty("feature file has no rows".to_string()));
    }
    FeatureMatrix::from_rows(&rows)
}

pub fn decode_features_binary(bytes: &[u8]) -> Result<FeatureMatrix> {
    let values = decode_matrix_binary(bytes)?;
    FeatureMatrix::new(values)
}

/// Decodes a `FAF1` buffer into an `f64` matrix without the finiteness check.
pub fn decode_matrix_binary(bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < FEATURE_HEADER_LEN || !bytes.starts_with(FEATURE_MAGIC) {
        return Err(FafError::InvalidData("missing FAF1 header".to_string()));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| FafError::InvalidData(format!("FAF1 shape {rows}x{cols} too large")))?;
    let payload = &bytes[FEATURE_HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(FafError::InvalidData(format!(
            "FAF1 payload holds {} bytes, shape {rows}x{cols} needs {}",
            payload.len(),
            count * 4
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows as usize, cols as usize), values)
        .expect("payload length matches shape"))
}

pub fn encode_features_binary(values: ArrayView2<'_, f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + values.len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(values.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(values.ncols() as u64).to_le_bytes());
    for &x in values.iter() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

pub fn save_features_binary(values: ArrayView2<'_, f64>, path: impl AsRef<Path>) -> Result<()> {
    check_finite(values)?;
    write_file(path.as_ref(), encode_features_binary(values))
}

pub fn save_features_csv(values: ArrayView2<'_, f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_file(path.as_ref(), out)
}

pub fn parse_labels(text: &str) -> Result<Vec<i64>> {
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let y = line.parse::<i64>().map_err(|_| FafError::Parse {
            line: i + 1,
            message: format!("invalid label {line:?}"),
        })?;
        if y < -1 {
            return Err(FafError::Parse {
                line: i + 1,
                message: format!("label {y} below -1"),
            });
        }
        labels.push(y);
    }
    Ok(labels)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    parse_labels(&read_text(path.as_ref())?)
}

pub fn load_splits(path: impl AsRef<Path>) -> Result<Vec<Split>> {
    let path = path.as_ref();
    serde_json::from_str(&read_text(path)?).map_err(|e| FafError::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Loads labels and splits and validates them together.
pub fn load_labeled_splits(
    labels_path: impl AsRef<Path>,
    splits_path: impl AsRef<Path>,
) -> Result<LabeledSplits> {
    LabeledSplits::from_labels(load_labels(labels_path)?, load_splits(splits_path)?)
}

pub fn save_labels(labels: &[i64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for y in labels {
        out.push_str(&format!("{y}\n"));
    }
    write_file(path.as_ref(), out)
}

pub fn save_splits(splits: &[Split], path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string(splits).expect("splits serialize");
    write_file(path.as_ref(), json)
}

pub fn save_json<T: serde::Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| FafError::InvalidData(format!("serialization failed: {e}")))?;
    write_file(path.as_ref(), json)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_file(path.as_ref(), text)
}
