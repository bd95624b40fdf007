//! Text formats: observation CSV, edge lists, and key-value sidecars.
//!
//! Observation CSV has a header row `vertex,y,x0,...,x{D-1}` and one row per
//! observation. Edge lists hold one `s t` pair per line (0-based); blank lines
//! and lines starting with `#` are ignored. Floats are written in shortest
//! round-trip form, so write then read reproduces values exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problem::{SimilarityGraph, VertexBlock};
use crate::scalar::Real;

/// Reads observation CSV into per-vertex blocks.
///
/// With `vertex_count = None` the count is one more than the largest vertex
/// id seen. Every vertex must receive at least one row.
pub fn read_blocks<T: Real, R: Read>(reader: R, vertex_count: Option<usize>) -> Result<Vec<VertexBlock<T>>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "vertex" || &headers[1] != "y" {
        return Err(Error::Parse { line: 1, message: "header must start with `vertex,y,x0`".into() });
    }
    let dim = headers.len() - 2;
    for (d, h) in headers.iter().skip(2).enumerate() {
        if h != format!("x{d}") {
            return Err(Error::Parse { line: 1, message: format!("expected column `x{d}`, found `{h}`") });
        }
    }
    let mut rows: BTreeMap<usize, (Vec<T>, Vec<T>)> = BTreeMap::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != dim + 2 {
            return Err(Error::Parse { line, message: format!("expected {} fields, found {}", dim + 2, record.len()) });
        }
        let vertex: usize = record[0]
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad vertex id `{}`", &record[0]) })?;
        let parse = |s: &str| -> Result<T> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| Error::Parse { line, message: format!("bad number `{s}`") })
        };
        let entry = rows.entry(vertex).or_default();
        entry.1.push(parse(&record[1])?);
        for field in record.iter().skip(2) {
            entry.0.push(parse(field)?);
        }
    }
    let count = match vertex_count {
        Some(n) => n,
        None => rows.keys().next_back().map_or(0, |&v| v + 1),
    };
    if let Some(&v) = rows.keys().find(|&&v| v >= count) {
        return Err(Error::Parse { line: 0, message: format!("vertex {v} outside 0..{count}") });
    }
    (0..count)
        .map(|t| {
            let (x, y) = rows
                .remove(&t)
                .ok_or_else(|| Error::Parse { line: 0, message: format!("vertex {t} has no observations") })?;
            VertexBlock::new(Matrix::from_row_major(y.len(), dim, x)?, y)
        })
        .collect()
}

pub fn write_blocks<T: Real, W: Write>(writer: W, blocks: &[VertexBlock<T>]) -> Result<()> {
    let dim = blocks.first().map_or(0, |b| b.x.ncols());
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["vertex".to_string(), "y".to_string()];
    header.extend((0..dim).map(|d| format!("x{d}")));
    csv.write_record(&header)?;
    for (t, block) in blocks.iter().enumerate() {
        for (i, &y) in block.y.iter().enumerate() {
            let mut record = Vec::with_capacity(dim + 2);
            record.push(t.to_string());
            record.push(y.to_string());
            record.extend(block.x.row(i).iter().map(|v| v.to_string()));
            csv.write_record(&record)?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn read_graph<R: BufRead>(reader: R, vertex_count: usize) -> Result<SimilarityGraph> {
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = text.split_whitespace().collect();
        let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[s, t]) => edges.push((s, t)),
            _ => return Err(Error::Parse { line: i + 1, message: format!("expected `s t`, found `{text}`") }),
        }
    }
    SimilarityGraph::new(vertex_count, edges)
}

pub fn write_graph<W: Write>(mut writer: W, graph: &SimilarityGraph) -> Result<()> {
    for &(s, t) in graph.edges() {
        writeln!(writer, "{s} {t}")?;
    }
    Ok(())
}

/// Reads `key = value` lines; `#` comments and blank lines are skipped.
pub fn read_key_values<R: BufRead>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected `key = value`, found `{text}`") })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse { line: i + 1, message: "empty key".into() });
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::Parse { line: i + 1, message: format!("duplicate key `{key}`") });
        }
    }
    Ok(out)
}

pub fn write_key_values<W: Write>(mut writer: W, entries: &BTreeMap<String, String>) -> Result<()> {
    for (k, v) in entries {
        writeln!(writer, "{k} = {v}")?;
    }
    Ok(())
}

/// Writes a coefficient grid as CSV with columns `vertex,x0,...`.
pub fn write_coefficients<T: Real, W: Write>(writer: W, dim: usize, beta: &[T]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["vertex".to_string()];
    header.extend((0..dim).map(|d| format!("x{d}")));
    csv.write_record(&header)?;
    for (t, row) in beta.chunks(dim).enumerate() {
        let mut record = vec![t.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads a grid written by [`write_coefficients`], flattened vertex-major.
pub fn read_coefficients<T: Real, R: Read>(reader: R) -> Result<(usize, Vec<T>)> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let dim = csv.headers()?.len().saturating_sub(1);
    let mut out = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let vertex: usize = record[0].parse().map_err(|_| Error::Parse { line, message: "bad vertex id".into() })?;
        if vertex * dim != out.len() || record.len() != dim + 1 {
            return Err(Error::Parse { line, message: "rows must list vertices 0.. in order".into() });
        }
        for f in record.iter().skip(1) {
            let v: f64 = f.parse().map_err(|_| Error::Parse { line, message: format!("bad number `{f}`") })?;
            out.push(T::lit(v));
        }
    }
    Ok((dim, out))
}
