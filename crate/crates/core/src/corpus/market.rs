//! Matrix Market coordinate I/O for integer count matrices.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const HEADER: &str = "%%MatrixMarket matrix coordinate integer general";

/// Sparse integer matrix in coordinate form, zero-based.
///
/// Entries are deduplicated and strictly positive; zero-valued entries in a
/// file are dropped at read time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooCounts {
    pub rows: usize,
    pub cols: usize,
    /// (row, col, value) triplets.
    pub entries: Vec<(u32, u32, u32)>,
}

pub fn read_counts(path: &Path) -> Result<CooCounts> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(Error::io(&shown))?;
    let reader = BufReader::new(file);

    let mut lines = reader.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(&shown, 1, "empty file"))?;
    let first = first.map_err(Error::io(&shown))?;
    if first.trim_end() != HEADER {
        return Err(Error::parse(
            &shown,
            1,
            format!("expected header `{HEADER}`, found `{}`", first.trim_end()),
        ));
    }

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(u32, u32, u32)> = Vec::new();
    let mut seen = std::collections::HashSet::new();

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(Error::io(&shown))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(Error::parse(
                        &shown,
                        lineno,
                        "size line must be `rows cols nnz`",
                    ));
                }
                let parse = |s: &str, what: &str| -> Result<usize> {
                    s.parse::<usize>()
                        .map_err(|_| Error::parse(&shown, lineno, format!("bad {what}: `{s}`")))
                };
                let r = parse(fields[0], "row count")?;
                let c = parse(fields[1], "column count")?;
                let nnz = parse(fields[2], "entry count")?;
                if r == 0 || c == 0 {
                    return Err(Error::parse(&shown, lineno, "matrix dimensions must be positive"));
                }
                dims = Some((r, c, nnz));
                entries.reserve(nnz);
            }
            Some((r, c, _)) => {
                if fields.len() != 3 {
                    return Err(Error::parse(
                        &shown,
                        lineno,
                        "entry line must be `row col value`",
                    ));
                }
                let i: usize = fields[0].parse().map_err(|_| {
                    Error::parse(&shown, lineno, format!("bad row index: `{}`", fields[0]))
                })?;
                let j: usize = fields[1].parse().map_err(|_| {
                    Error::parse(&shown, lineno, format!("bad column index: `{}`", fields[1]))
                })?;
                let value: i64 = fields[2].parse().map_err(|_| {
                    Error::parse(
                        &shown,
                        lineno,
                        format!("value must be an integer, found `{}`", fields[2]),
                    )
                })?;
                if i < 1 || i > r || j < 1 || j > c {
                    return Err(Error::parse(
                        &shown,
                        lineno,
                        format!("index ({i}, {j}) outside {r} x {c}"),
                    ));
                }
                if value < 0 {
                    return Err(Error::parse(
                        &shown,
                        lineno,
                        format!("negative count {value} at ({i}, {j})"),
                    ));
                }
                if value > u32::MAX as i64 {
                    return Err(Error::parse(&shown, lineno, format!("count {value} too large")));
                }
                if !seen.insert((i, j)) {
                    return Err(Error::parse(
                        &shown,
                        lineno,
                        format!("duplicate entry for ({i}, {j})"),
                    ));
                }
                if value > 0 {
                    entries.push((i as u32 - 1, j as u32 - 1, value as u32));
                }
            }
        }
    }

    let (rows, cols, nnz) = dims.ok_or_else(|| Error::parse(&shown, 1, "missing size line"))?;
    if seen.len() != nnz {
        return Err(Error::data(format!(
            "{shown}: size line declares {nnz} entries but {} were found",
            seen.len()
        )));
    }

    Ok(CooCounts { rows, cols, entries })
}

/// Write counts in canonical order: column-major, rows ascending within a column.
pub fn write_counts(path: &Path, coo: &CooCounts) -> Result<()> {
    let shown = path.display().to_string();
    let file = File::create(path).map_err(Error::io(&shown))?;
    let mut w = BufWriter::new(file);

    let mut entries = coo.entries.clone();
    entries.sort_unstable_by_key(|&(i, j, _)| (j, i));

    writeln!(w, "{HEADER}").map_err(Error::io(&shown))?;
    writeln!(w, "{} {} {}", coo.rows, coo.cols, entries.len()).map_err(Error::io(&shown))?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {}", i + 1, j + 1, v).map_err(Error::io(&shown))?;
    }
    w.flush().map_err(Error::io(&shown))
}
