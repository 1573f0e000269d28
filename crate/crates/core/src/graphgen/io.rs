//! Plain-text instance dump: an edge list `i j w` (0-indexed, `i < j`) and a
//! side file holding `N`, `θ`, the seed and the spike vector.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{SparseSymmetric, SpikedMatrix};
use crate::error::{Error, Result};

/// Header fields of the side file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceMeta {
    pub n: usize,
    pub theta: f64,
    pub seed: u64,
}

/// Write `edges_path` and `side_path`. Floats use Rust's shortest
/// round-trip formatting, so a read gives back the identical matrix.
pub fn write_instance(a: &SpikedMatrix, seed: u64, edges_path: &Path, side_path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(edges_path)?);
    for (i, j, w) in a.noise().edges() {
        writeln!(out, "{i} {j} {w:?}")?;
    }
    out.flush()?;

    let mut side = BufWriter::new(fs::File::create(side_path)?);
    writeln!(side, "n {}", a.n())?;
    writeln!(side, "theta {:?}", a.theta())?;
    writeln!(side, "seed {seed}")?;
    writeln!(side, "x")?;
    for x in a.spike() {
        writeln!(side, "{x:?}")?;
    }
    side.flush()?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what}")))
}

pub fn read_instance(edges_path: &Path, side_path: &Path) -> Result<(SpikedMatrix, InstanceMeta)> {
    let side = fs::read_to_string(side_path)?;
    let mut lines = side.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (no, l) = lines.next().ok_or_else(|| parse_err(0, format!("missing '{key}'")))?;
        let mut toks = l.split_whitespace();
        if toks.next() != Some(key) {
            return Err(parse_err(no, format!("expected '{key}'")));
        }
        Ok((no, toks.next().unwrap_or("").to_string()))
    };
    let (no, n) = header("n")?;
    let n: usize = field(Some(&n), no, "n")?;
    let (no, theta) = header("theta")?;
    let theta: f64 = field(Some(&theta), no, "theta")?;
    let (no, seed) = header("seed")?;
    let seed: u64 = field(Some(&seed), no, "seed")?;
    header("x")?;
    let spike = lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(no, l)| field(Some(l), no, "spike component"))
        .collect::<Result<Vec<f64>>>()?;

    let text = fs::read_to_string(edges_path)?;
    let mut edges = Vec::new();
    for (idx, l) in text.lines().enumerate() {
        let no = idx + 1;
        if l.trim().is_empty() {
            continue;
        }
        let mut toks = l.split_whitespace();
        let i: usize = field(toks.next(), no, "i")?;
        let j: usize = field(toks.next(), no, "j")?;
        let w: f64 = field(toks.next(), no, "w")?;
        if i >= j {
            return Err(parse_err(no, "edge must satisfy i < j"));
        }
        edges.push((i, j, w));
    }
    let noise = SparseSymmetric::from_edges(n, &edges)?;
    let a = SpikedMatrix::new(noise, spike, theta)?;
    Ok((a, InstanceMeta { n, theta, seed }))
}
