//! Output formatting: display tables use fixed two-decimal numbers to eye
//! against published tables, while machine-readable copies keep full
//! precision (Rust's shortest round-trip float formatting, so files are
//! deterministic and parse back exactly).

use std::path::Path;

use anyhow::{Context, Result};

/// Shortest round-trip representation of a float for machine outputs.
pub fn fmt_full(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Signed two-decimal coordinate, like published cosine tables.
pub fn fmt_coord(v: f64) -> String {
    format!("{v:+.2}")
}

/// Two-decimal statistic.
pub fn fmt_stat(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.2}")
    }
}

/// Three-decimal statistic (adjusted R-squared convention).
pub fn fmt_stat3(v: f64) -> String {
    format!("{v:.3}")
}

/// p-value display: exact zeros (underflow) print as the floor marker.
pub fn fmt_p(v: f64) -> String {
    if v == 0.0 || v < 1e-300 {
        "<1e-300".to_string()
    } else if v < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Minimal CSV field escaping.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Construct name to a safe file stem.
pub fn sanitize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() {
        out.push('x');
    }
    out
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    std::fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formats() {
        assert_eq!(fmt_full(0.1), "0.1");
        assert_eq!(fmt_coord(0.591), "+0.59");
        assert_eq!(fmt_coord(-0.005), "-0.01");
        assert_eq!(fmt_p(0.0), "<1e-300");
        assert_eq!(fmt_p(0.269), "0.269");
        assert!(fmt_p(2.5e-11).contains('e'));
    }

    #[test]
    fn csv_escaping() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("q\"q"), "\"q\"\"q\"");
    }

    #[test]
    fn names_sanitized() {
        assert_eq!(sanitize_name("Self-Efficacy"), "self_efficacy");
        assert_eq!(sanitize_name("N1"), "n1");
    }
}
