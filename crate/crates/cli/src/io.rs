//! Matrix CSV round-trips and record/report writers.
//!
//! Matrix format: a `# rows,cols` comment line, then one CSV line per row.

use std::fs;
use std::path::Path;

use gds_core::{GdsError, Result};
use nalgebra::DMatrix;

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = format!("# {},{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| GdsError::InvalidArgument("empty matrix file".into()))?;
    let dims = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| GdsError::InvalidArgument("missing # rows,cols header".into()))?;
    let parts: Vec<&str> = dims.trim().split(',').collect();
    if parts.len() != 2 {
        return Err(GdsError::InvalidArgument(format!(
            "bad header line: {header}"
        )));
    }
    let rows: usize = parts[0]
        .trim()
        .parse()
        .map_err(|e| GdsError::InvalidArgument(format!("bad row count: {e}")))?;
    let cols: usize = parts[1]
        .trim()
        .parse()
        .map_err(|e| GdsError::InvalidArgument(format!("bad col count: {e}")))?;
    let mut values = Vec::with_capacity(rows * cols);
    for line in lines {
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| GdsError::InvalidArgument(format!("bad value {tok:?}: {e}")))?;
            values.push(v);
        }
    }
    if values.len() != rows * cols {
        return Err(GdsError::DimensionMismatch {
            expected: rows * cols,
            got: values.len(),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Python plotting companion written next to sweep outputs.
pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot median recovery error against measurement count from records.csv."""
import csv
import math
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "records.csv"
by_n = defaultdict(list)
with open(path) as fh:
    for row in csv.DictReader(fh):
        by_n[int(row["n"])].append(float(row["rel_error"]))

ns = sorted(by_n)
med = [sorted(v)[len(v) // 2] for v in (by_n[n] for n in ns)]
plt.figure(figsize=(5, 4))
plt.loglog(ns, med, "o-")
plt.xlabel("measurements n")
plt.ylabel("median relative error")
plt.grid(True, which="both", alpha=0.3)
if len(ns) >= 2:
    slope = (math.log(med[-1]) - math.log(med[0])) / (math.log(ns[-1]) - math.log(ns[0]))
    plt.title(f"log-log slope {slope:.3f}")
plt.tight_layout()
plt.savefig("error_vs_n.png", dpi=150)
print("wrote error_vs_n.png")
"#;
