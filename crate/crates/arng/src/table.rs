//! Two-column plain-text tables: `wavelength_nm value` per line, `#` comments,
//! optional single header line, strictly increasing wavelengths.

use std::path::Path;

use crate::error::{ArngError, Result};

pub fn parse_two_column(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let a = fields.next();
        let b = fields.next();
        match (a, b) {
            (Some(a), Some(b)) => match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                _ if xs.is_empty() => continue, // header line
                _ => {
                    return Err(ArngError::Format(format!(
                        "line {}: expected two numbers, got `{line}`",
                        lineno + 1
                    )))
                }
            },
            _ => {
                return Err(ArngError::Format(format!(
                    "line {}: expected two columns, got `{line}`",
                    lineno + 1
                )))
            }
        }
    }
    if xs.len() < 2 {
        return Err(ArngError::Format("table needs at least 2 rows".into()));
    }
    for w in xs.windows(2) {
        if w[1] <= w[0] {
            return Err(ArngError::Format(format!(
                "wavelengths must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok((xs, ys))
}

pub fn load_two_column(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    parse_two_column(&text)
}
