//! Plain-text matrix dump.
//!
//! ```text
//! # matrix Y
//! # shape 6 6
//! # rows 1.a 1.b 1.c 2.a 2.b 2.c
//! # cols 1.a 1.b 1.c 2.a 2.b 2.c
//! re im re im ...        (one line per row, row-major)
//! ```
//!
//! Numbers use the shortest representation that round-trips exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDump {
    pub name: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub matrix: CMatrix,
}

pub fn write_matrix_dump(mut w: impl Write, dump: &MatrixDump) -> std::io::Result<()> {
    let m = &dump.matrix;
    writeln!(w, "# matrix {}", dump.name)?;
    writeln!(w, "# shape {} {}", m.nrows(), m.ncols())?;
    writeln!(w, "# rows {}", dump.row_labels.join(" "))?;
    writeln!(w, "# cols {}", dump.col_labels.join(" "))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:?} {:?}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix_dump(r: impl BufRead) -> Result<MatrixDump> {
    let bad = |msg: String| Error::parse("matrix dump", msg);
    let mut name = String::new();
    let mut shape = None;
    let mut row_labels = Vec::new();
    let mut col_labels = Vec::new();
    let mut values = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if let Some(header) = line.strip_prefix('#') {
            let mut parts = header.split_whitespace();
            match parts.next() {
                Some("matrix") => name = parts.collect::<Vec<_>>().join(" "),
                Some("shape") => {
                    let dims: Vec<usize> = parts
                        .map(|p| p.parse().map_err(|_| bad(format!("bad shape {p:?}"))))
                        .collect::<Result<_>>()?;
                    if dims.len() != 2 {
                        return Err(bad("shape needs two numbers".into()));
                    }
                    shape = Some((dims[0], dims[1]));
                }
                Some("rows") => row_labels = parts.map(str::to_string).collect(),
                Some("cols") => col_labels = parts.map(str::to_string).collect(),
                _ => {}
            }
            continue;
        }
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|_| bad(format!("bad number {tok:?}")))?,
            );
        }
    }
    let (n, m) = shape.ok_or_else(|| bad("missing shape header".into()))?;
    if values.len() != 2 * n * m {
        return Err(bad(format!(
            "expected {} numbers, found {}",
            2 * n * m,
            values.len()
        )));
    }
    let matrix = CMatrix::from_fn(n, m, |i, j| {
        let k = 2 * (i * m + j);
        c(values[k], values[k + 1])
    });
    Ok(MatrixDump {
        name,
        row_labels,
        col_labels,
        matrix,
    })
}
