//! Small text-format helpers shared by the snapshot, manifest and CSV writers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::Result;

/// Formats a float with 17 significant digits, enough for an exact round trip.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes rows under a header, LF line endings.
pub fn write_csv<P: AsRef<Path>>(path: P, header: &str, rows: &[String]) -> Result<()> {
    let mut out = String::with_capacity(header.len() + 64 * rows.len());
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses a `key=value` line; `None` when the line has no `=`.
pub fn split_key_value(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    Some((k.trim(), v.trim()))
}

/// Reads a flat `key=value` file, ignoring blank lines and `#` comments.
/// Returns the map and, for error reporting, the line each key came from.
pub fn read_key_values(text: &str) -> std::result::Result<BTreeMap<String, (usize, String)>, (usize, String)> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = split_key_value(line).ok_or((idx + 1, format!("expected key=value, got {line:?}")))?;
        map.insert(k.to_string(), (idx + 1, v.to_string()));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn key_values_skip_comments() {
        let kv = read_key_values("# run\np = 0.7\n\nq=0.3\n").unwrap();
        assert_eq!(kv["p"], (2, "0.7".to_string()));
        assert_eq!(kv["q"].1, "0.3");
        assert_eq!(read_key_values("p 0.7").unwrap_err().0, 1);
    }
}
