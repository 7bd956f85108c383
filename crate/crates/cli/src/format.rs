//! Text output. Every float is written with `{:.16e}` (17 significant
//! digits, correctly rounded), so identical runs give identical bytes and
//! every value round-trips exactly.

use std::fmt::Write as _;

pub const FLOAT_FORMAT: &str = "scientific notation with 17 significant digits (Rust {:.16e}), round-trip exact";
pub const MISSING: &str = "NA";

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map_or_else(|| MISSING.to_string(), float)
}

/// Curve file with columns `t_over_td,interval_center,value`.
#[derive(Default)]
pub struct CurveCsv {
    body: String,
}

impl CurveCsv {
    pub const HEADER: &'static str = "t_over_td,interval_center,value\n";

    pub fn new() -> Self {
        CurveCsv { body: Self::HEADER.to_string() }
    }

    pub fn push(&mut self, t: f64, center: f64, value: Option<f64>) {
        let _ = writeln!(self.body, "{},{},{}", float(t), float(center), opt_float(value));
    }

    pub fn into_string(self) -> String {
        self.body
    }
}

/// General CSV with a fixed header; cells are preformatted strings.
pub struct Table {
    columns: usize,
    body: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { columns: header.len(), body: format!("{}\n", header.join(",")) }
    }

    pub fn push(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width must match the header");
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    pub fn into_string(self) -> String {
        self.body
    }
}

/// Dense matrix text: a header line `M rows cols t`, then one
/// space-separated row per line, `NA` for undefined entries.
pub fn matrix(sites: usize, t: f64, rows: usize, cols: usize, entry: impl Fn(usize, usize) -> Option<f64>) -> String {
    let mut out = format!("{sites} {rows} {cols} {}\n", float(t));
    for i in 0..rows {
        let line: Vec<String> = (0..cols).map(|j| opt_float(entry(i, j))).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Inverse of [`matrix`]: `(sites, t, entries)`.
pub fn parse_matrix(text: &str) -> Option<(usize, f64, Vec<Vec<Option<f64>>>)> {
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next()?.split_whitespace().collect();
    let [m, rows, cols, t] = head.as_slice() else { return None };
    let (m, rows, cols, t): (usize, usize, usize, f64) = (m.parse().ok()?, rows.parse().ok()?, cols.parse().ok()?, t.parse().ok()?);
    let mut entries = Vec::with_capacity(rows);
    for line in lines {
        let row: Option<Vec<Option<f64>>> = line
            .split_whitespace()
            .map(|v| if v == MISSING { Some(None) } else { v.parse().ok().map(Some) })
            .collect();
        let row = row?;
        if row.len() != cols {
            return None;
        }
        entries.push(row);
    }
    (entries.len() == rows).then_some((m, t, entries))
}
