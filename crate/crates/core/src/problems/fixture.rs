//! Plain-text dump of the (A, B, C) triple.
//!
//! ```text
//! %%saddle-system v1
//! % optional comment lines
//! n m
//! A <nnz>
//! i j value        (1-based, lower triangle only)
//! B <nnz>
//! i j value
//! C <nnz>
//! i j value        (lower triangle only)
//! ```
//!
//! Values use Rust's shortest round-trip formatting, so load(dump(s)) is
//! bit-identical.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use super::{ProblemError, SaddleSystem};
use crate::linalg::SymMatrix;

const HEADER: &str = "%%saddle-system v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixtureError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("fixture ended early, expected {0}")]
    Truncated(&'static str),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

pub fn dump_system(sys: &SaddleSystem) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(out, "% {}", sys.label());
    let _ = writeln!(out, "{} {}", sys.n(), sys.m());
    write_block(&mut out, "A", sys.a().as_matrix(), true);
    write_block(&mut out, "B", sys.b(), false);
    write_block(&mut out, "C", sys.c().as_matrix(), true);
    out
}

fn write_block(out: &mut String, name: &str, m: &DMatrix<f64>, lower: bool) {
    let mut entries = Vec::new();
    for i in 0..m.nrows() {
        let cols = if lower { i + 1 } else { m.ncols() };
        for j in 0..cols {
            let v = m[(i, j)];
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
    }
    let _ = writeln!(out, "{name} {}", entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {v:?}", i + 1, j + 1);
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-comment, non-blank line with its 1-based number.
    fn next(&mut self, what: &'static str) -> Result<(usize, &'a str), FixtureError> {
        for (k, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            return Ok((k + 1, t));
        }
        Err(FixtureError::Truncated(what))
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> FixtureError {
    FixtureError::Parse { line, msg: msg.into() }
}

fn parse_usize(line: usize, tok: Option<&str>, what: &str) -> Result<usize, FixtureError> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what}")))
}

fn read_block(lines: &mut Lines<'_>, name: &'static str, rows: usize, cols: usize) -> Result<DMatrix<f64>, FixtureError> {
    let (ln, head) = lines.next(name)?;
    let mut toks = head.split_whitespace();
    if toks.next() != Some(name) {
        return Err(parse_err(ln, format!("expected block {name}")));
    }
    let nnz = parse_usize(ln, toks.next(), "entry count")?;
    let mut m = DMatrix::zeros(rows, cols);
    for _ in 0..nnz {
        let (ln, entry) = lines.next(name)?;
        let mut toks = entry.split_whitespace();
        let i = parse_usize(ln, toks.next(), "row index")?;
        let j = parse_usize(ln, toks.next(), "column index")?;
        let v: f64 = toks
            .next()
            .ok_or_else(|| parse_err(ln, "missing value"))?
            .parse()
            .map_err(|_| parse_err(ln, "bad value"))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(parse_err(ln, format!("index ({i}, {j}) outside {rows}x{cols}")));
        }
        m[(i - 1, j - 1)] = v;
    }
    Ok(m)
}

pub fn load_system(text: &str) -> Result<SaddleSystem, FixtureError> {
    let mut raw = text.lines();
    match raw.next() {
        Some(h) if h.trim() == HEADER => {}
        _ => return Err(parse_err(1, format!("missing header {HEADER:?}"))),
    }
    let label = text.lines().nth(1).and_then(|l| l.strip_prefix("% ")).map(str::to_owned);
    let mut lines = Lines { inner: text.lines().enumerate() };
    lines.inner.next();
    let (ln, dims) = lines.next("dimensions")?;
    let mut toks = dims.split_whitespace();
    let n = parse_usize(ln, toks.next(), "n")?;
    let m = parse_usize(ln, toks.next(), "m")?;
    let a = read_block(&mut lines, "A", n, n)?;
    let b = read_block(&mut lines, "B", m, n)?;
    let c = read_block(&mut lines, "C", m, m)?;
    let sys = SaddleSystem::new(SymMatrix::from_lower(a), b, SymMatrix::from_lower(c))?;
    Ok(match label {
        Some(l) => sys.with_label(l),
        None => sys,
    })
}
