//! Plain-text output with nine significant digits.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

/// `v` in shortest form with nine significant digits.
pub fn fmt(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let e = v.abs().log10().floor() as i32;
    if (-4..9).contains(&e) {
        let decimals = (8 - e).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.8e}");
        let (m, exp) = s.split_once('e').expect("exponent form");
        let m = if m.contains('.') {
            m.trim_end_matches('0').trim_end_matches('.')
        } else {
            m
        };
        format!("{m}e{exp}")
    }
}

/// CSV text from a header and numeric rows.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    write_text(path, &csv(header, rows))
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()
}
