//! Plain-text field dumps.
//!
//! ```text
//! # nx=<nx> nz=<nz> time=<t>
//! <nx values of layer 0>
//! ...
//! <nx values of layer nz-1>
//! ```
//!
//! Values carry 17 significant digits so every `f64` round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FlowError, Result};
use crate::grid::{Grid, ScalarField};

/// Renders a dump, bottom layer first.
pub fn format_field(field: &ScalarField, time: f64) -> String {
    let g = field.grid;
    let mut out = String::with_capacity(g.cells() * 24 + 64);
    let _ = writeln!(out, "# nx={} nz={} time={}", g.nx, g.nz, time);
    for j in 0..g.nz {
        for (i, v) in field.layer(j).iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn write_field(field: &ScalarField, time: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_field(field, time))
        .map_err(|e| FlowError::Io(format!("{}: {e}", path.display())))
}

fn dump_error(line: usize, message: impl Into<String>) -> FlowError {
    FlowError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a dump, returning the field and its time stamp.
pub fn parse_field(text: &str) -> Result<(ScalarField, f64)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| dump_error(1, "empty field dump"))?;
    let rest = header
        .strip_prefix('#')
        .ok_or_else(|| dump_error(1, "header must start with '#'"))?;
    let (mut nx, mut nz, mut time) = (None, None, None);
    for token in rest.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| dump_error(1, format!("malformed header token '{token}'")))?;
        let bad = || dump_error(1, format!("bad value for '{key}': '{value}'"));
        match key {
            "nx" => nx = Some(value.parse::<usize>().map_err(|_| bad())?),
            "nz" => nz = Some(value.parse::<usize>().map_err(|_| bad())?),
            "time" => time = Some(value.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(dump_error(1, format!("unknown header key '{key}'"))),
        }
    }
    let (nx, nz, time) = match (nx, nz, time) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(dump_error(1, "header needs nx, nz and time")),
    };
    let grid = Grid::new(nx, nz)?;
    let mut values = Vec::with_capacity(grid.cells());
    for j in 0..nz {
        let line = j + 2;
        let row = lines
            .next()
            .ok_or_else(|| dump_error(line, format!("expected {nz} rows, found {j}")))?;
        let before = values.len();
        for tok in row.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|_| dump_error(line, format!("bad value '{tok}'")))?,
            );
        }
        if values.len() - before != nx {
            return Err(dump_error(
                line,
                format!("expected {nx} values, found {}", values.len() - before),
            ));
        }
    }
    if let Some((k, _)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
        return Err(dump_error(nz + 2 + k, "trailing data after the last row"));
    }
    Ok((ScalarField::from_values(grid, values)?, time))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<(ScalarField, f64)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| FlowError::Io(format!("{}: {e}", path.display())))?;
    parse_field(&text)
}
