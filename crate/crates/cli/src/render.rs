//! Output formatting: full-precision CSV numbers, table-style cells, and
//! aligned text tables.

/// Full-precision CSV number.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v == v.trunc() && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:.10e}")
    }
}

/// Four-decimal table cell, switching to scientific notation for values the
/// fixed format would flatten to zero noise.
pub fn cell(v: f64) -> String {
    if v != 0.0 && v.abs() < 5e-4 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

/// Render an aligned text table with a row-label column.
pub fn table(title: &str, headers: &[String], rows: &[Vec<String>]) -> String {
    let cols = headers.len() + 1;
    let mut widths = vec![0usize; cols];
    for row in rows {
        for (j, cell) in row.iter().enumerate() {
            widths[j] = widths[j].max(cell.len());
        }
    }
    for (j, h) in headers.iter().enumerate() {
        widths[j + 1] = widths[j + 1].max(h.len());
    }

    let mut out = format!("== {title} ==\n");
    let mut header_line = format!("{:w$}", "", w = widths[0]);
    for (j, h) in headers.iter().enumerate() {
        header_line.push_str(&format!("  {:>w$}", h, w = widths[j + 1]));
    }
    out.push_str(header_line.trim_end());
    out.push('\n');
    for row in rows {
        let mut line = format!("{:<w$}", row[0], w = widths[0]);
        for (j, cell) in row.iter().enumerate().skip(1) {
            line.push_str(&format!("  {:>w$}", cell, w = widths[j]));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push('\n');
    out
}
