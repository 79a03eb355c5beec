//! Parameter grids: comma-separated items, each a number or a geometric
//! range `start:ratio:stop` (inclusive when `stop` is hit up to rounding).

use crate::error::{DdpcError, Result};

fn bad(text: &str, message: impl Into<String>) -> DdpcError {
    DdpcError::Config {
        key: format!("grid `{text}`"),
        message: message.into(),
    }
}

fn number(text: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| bad(text, format!("`{s}` is not a number")))
}

fn round_sig(v: f64) -> f64 {
    format!("{v:.13e}").parse().expect("formatted float parses")
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(number(text, v)?),
            [a, r, b] => {
                let (a, r, b) = (number(text, a)?, number(text, r)?, number(text, b)?);
                if !(a > 0.0 && r > 1.0 && b >= a) || !b.is_finite() {
                    return Err(bad(text, "geometric range needs 0 < start <= stop and ratio > 1"));
                }
                let steps = ((b / a).ln() / r.ln() + 1e-9).floor() as i32;
                // Rounded to 14 significant digits so 1e-4·10³ prints as 0.1.
                out.extend((0..=steps).map(|k| round_sig(a * r.powi(k))));
            }
            _ => return Err(bad(text, format!("cannot read `{item}`"))),
        }
    }
    if out.is_empty() {
        return Err(bad(text, "grid is empty"));
    }
    Ok(out)
}
