//! CSV files for domains, per-node values and configurations.
//!
//! A node file starts with a metadata comment, then a header row:
//!
//! ```text
//! #d=2,p=2,metric=euclidean
//! x0,x1,weight,value
//! -0.995,-0.095,0.0001,0.07957747154594767
//! ```
//!
//! The `value` column is present only for density and field files. A
//! configuration file has `#n=…,p=…` and columns `x0…`. Numbers are written
//! in Rust's shortest round-trip form, so a write/read cycle is lossless.

use std::io::{BufRead, BufReader, Read, Write};

use crate::geometry::Metric;
use crate::{Configuration, Domain, Error, Result};

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn header_names(prefix: &str, p: usize, extra: &[&str]) -> Vec<String> {
    (0..p)
        .map(|k| format!("{prefix}{k}"))
        .chain(extra.iter().map(|s| s.to_string()))
        .collect()
}

/// Writes the nodes and weights, with an optional value column.
pub fn write_nodes<W: Write>(mut out: W, domain: &Domain, values: Option<&[f64]>) -> Result<()> {
    if let Some(v) = values {
        if v.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: v.len(),
            });
        }
    }
    writeln!(
        out,
        "#d={},p={},metric={}",
        domain.intrinsic_dim(),
        domain.ambient_dim(),
        domain.metric().name()
    )?;
    let extra: &[&str] = if values.is_some() { &["weight", "value"] } else { &["weight"] };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header_names("x", domain.ambient_dim(), extra)).map_err(csv_error)?;
    for (i, x) in domain.nodes().enumerate() {
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        row.push(domain.weights()[i].to_string());
        if let Some(v) = values {
            row.push(v[i].to_string());
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_meta(line: &str) -> Result<Vec<(String, String)>> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("missing `#key=value` metadata line".into()))?;
    body.split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad metadata entry `{kv}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn meta_get<'a>(meta: &'a [(String, String)], key: &str) -> Result<&'a str> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Parse(format!("metadata lacks `{key}`")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("bad {what} `{s}`")))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

/// Reads a node file. Returns the domain and the value column if present.
pub fn read_nodes<R: Read>(input: R) -> Result<(Domain, Option<Vec<f64>>)> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    let meta = parse_meta(&first)?;
    let d = parse_usize(meta_get(&meta, "d")?, "d")?;
    let p = parse_usize(meta_get(&meta, "p")?, "p")?;
    let metric: Metric = meta_get(&meta, "metric")?.parse()?;

    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_error)?.clone();
    let with_value = headers.len() == p + 2;
    let expected = header_names("x", p, if with_value { &["weight", "value"] } else { &["weight"] });
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse(format!(
            "expected columns {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut coords, mut weights, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let nums = rec.iter().map(parse_f64).collect::<Result<Vec<f64>>>()?;
        coords.extend_from_slice(&nums[..p]);
        weights.push(nums[p]);
        if with_value {
            values.push(nums[p + 1]);
        }
    }
    let domain = Domain::from_nodes(coords, weights, d, p, metric)?;
    Ok((domain, with_value.then_some(values)))
}

pub fn write_configuration<W: Write>(mut out: W, x: &Configuration) -> Result<()> {
    writeln!(out, "#n={},p={}", x.len(), x.ambient_dim())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header_names("x", x.ambient_dim(), &[])).map_err(csv_error)?;
    for p in x.points() {
        w.write_record(p.iter().map(f64::to_string)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_configuration<R: Read>(input: R) -> Result<Configuration> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    let meta = parse_meta(&first)?;
    let p = parse_usize(meta_get(&meta, "p")?, "p")?;
    let mut r = csv::Reader::from_reader(input);
    let mut coords = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        if rec.len() != p {
            return Err(Error::Parse(format!("expected {p} columns, got {}", rec.len())));
        }
        for s in rec.iter() {
            coords.push(parse_f64(s)?);
        }
    }
    Configuration::new(coords, p)
}
