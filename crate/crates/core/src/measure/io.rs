//! Plain-text measure files.
//!
//! ```text
//! measure grid dim=2 side=0.1 origin=0,0
//! cell 3 -1 0.25
//! measure squares dim=2 side=0.1
//! square 0.35 -0.05 0.25
//! measure atoms dim=2
//! atom 0.35 -0.05 0.25
//! ```
//!
//! Numbers are written in shortest round-trip form, so reading a written
//! file reproduces every value bit for bit. Blank lines and lines starting
//! with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{AtomCloud, GridSpec, GriddedDensity, Measure, SquareCloud};
use crate::error::{Error, Result};

fn join(values: impl IntoIterator<Item = f64>, sep: &str) -> String {
    values
        .into_iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(sep)
}

/// Serializes a measure.
pub fn write_measure_string(m: &Measure) -> String {
    let mut out = String::new();
    match m {
        Measure::Grid(g) => {
            let grid = g.grid();
            let _ = writeln!(
                out,
                "measure grid dim={} side={:?} origin={}",
                grid.dim(),
                grid.cell_side(),
                join(grid.origin().iter().copied(), ",")
            );
            for (k, mass) in g.iter() {
                let idx: Vec<String> = k.iter().map(|i| i.to_string()).collect();
                let _ = writeln!(out, "cell {} {mass:?}", idx.join(" "));
            }
        }
        Measure::Squares(s) => {
            let _ = writeln!(out, "measure squares dim={} side={:?}", s.dim(), s.side());
            for (c, mass) in s.iter() {
                let _ = writeln!(out, "square {} {mass:?}", join(c.iter().copied(), " "));
            }
        }
        Measure::Atoms(a) => {
            let _ = writeln!(out, "measure atoms dim={}", a.dim());
            for (x, mass) in a.iter() {
                let _ = writeln!(out, "atom {} {mass:?}", join(x.iter().copied(), " "));
            }
        }
    }
    out
}

pub fn write_measure(path: &Path, m: &Measure) -> Result<()> {
    std::fs::write(path, write_measure_string(m))?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| parse_err(line, format!("not a number: {s:?}")))
}

struct Header {
    kind: String,
    dim: usize,
    side: Option<f64>,
    origin: Option<Vec<f64>>,
}

fn parse_header(text: &str, line: usize) -> Result<Header> {
    let mut words = text.split_whitespace();
    if words.next() != Some("measure") {
        return Err(parse_err(line, "expected header `measure <kind> dim=<n>`"));
    }
    let kind = words
        .next()
        .ok_or_else(|| parse_err(line, "missing measure kind"))?
        .to_string();
    let mut dim = None;
    let mut side = None;
    let mut origin = None;
    for field in words {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("malformed header field {field:?}")))?;
        match key {
            "dim" => {
                dim = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| parse_err(line, format!("bad dimension {value:?}")))?,
                )
            }
            "side" => side = Some(parse_f64(value, line)?),
            "origin" => {
                origin = Some(
                    value
                        .split(',')
                        .map(|v| parse_f64(v, line))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            _ => return Err(parse_err(line, format!("unknown header field {key:?}"))),
        }
    }
    let dim = dim.ok_or_else(|| parse_err(line, "header lacks dim="))?;
    Ok(Header {
        kind,
        dim,
        side,
        origin,
    })
}

/// Parses a measure file.
pub fn read_measure_str(text: &str) -> Result<Measure> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, htext) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty measure file"))?;
    let header = parse_header(htext, hline)?;
    let dim = header.dim;
    let record = match header.kind.as_str() {
        "grid" => "cell",
        "squares" => "square",
        "atoms" => "atom",
        other => return Err(parse_err(hline, format!("unknown measure kind {other:?}"))),
    };
    let mut coords: Vec<f64> = Vec::new();
    let mut cells: Vec<(Vec<i64>, f64)> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for (n, l) in lines {
        let mut words = l.split_whitespace();
        let tag = words.next().unwrap_or_default();
        if tag != record {
            return Err(parse_err(n, format!("expected `{record}` record, found {tag:?}")));
        }
        let rest: Vec<&str> = words.collect();
        if rest.len() != dim + 1 {
            return Err(parse_err(
                n,
                format!("expected {} values, found {}", dim + 1, rest.len()),
            ));
        }
        let mass = parse_f64(rest[dim], n)?;
        if record == "cell" {
            let k = rest[..dim]
                .iter()
                .map(|s| {
                    s.parse::<i64>()
                        .map_err(|_| parse_err(n, format!("bad cell index {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push((k, mass));
        } else {
            for s in &rest[..dim] {
                coords.push(parse_f64(s, n)?);
            }
            masses.push(mass);
        }
    }
    let needs_side = |what: &str| {
        header
            .side
            .ok_or_else(|| parse_err(hline, format!("{what} header lacks side=")))
    };
    Ok(match record {
        "cell" => {
            let origin = header.origin.clone().unwrap_or_else(|| vec![0.0; dim]);
            let grid = GridSpec::new(dim, needs_side("grid")?, origin)?;
            Measure::Grid(GriddedDensity::from_cells(grid, cells)?)
        }
        "square" => Measure::Squares(SquareCloud::new(dim, needs_side("squares")?, coords, masses)?),
        _ => Measure::Atoms(AtomCloud::new(dim, coords, masses)?),
    })
}

pub fn read_measure(path: &Path) -> Result<Measure> {
    read_measure_str(&std::fs::read_to_string(path)?)
}
