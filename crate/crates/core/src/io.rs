//! Correlation files and sweep tables.
//!
//! Correlation CSV is `x,y,p` with 1-based indices, optionally preceded by
//! `# key=value` lines. Floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::corrmat::{Correlation, SIGN_TOL};
use crate::error::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn correlation_to_csv(p: &Correlation, metadata: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str("x,y,p\n");
    let n = p.n();
    for x in 0..n {
        for y in 0..n {
            let _ = writeln!(out, "{},{},{}", x + 1, y + 1, fmt_f64(p.get(x, y)));
        }
    }
    out
}

/// Metadata lines and the correlation they annotate.
pub fn correlation_from_csv(text: &str) -> Result<(Correlation, Vec<(String, String)>)> {
    let mut meta = Vec::new();
    let mut triples = Vec::new();
    let mut seen_header = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if !seen_header {
            if line.replace(' ', "") != "x,y,p" {
                return Err(Error::Parse(format!("line {}: expected header x,y,p", lineno + 1)));
            }
            seen_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::Parse(format!("line {}: expected x,y,p", lineno + 1));
        if cols.len() != 3 {
            return Err(bad());
        }
        let x: usize = cols[0].parse().map_err(|_| bad())?;
        let y: usize = cols[1].parse().map_err(|_| bad())?;
        let p: f64 = cols[2].parse().map_err(|_| bad())?;
        if x == 0 || y == 0 {
            return Err(Error::Parse(format!("line {}: indices are 1-based", lineno + 1)));
        }
        triples.push((x - 1, y - 1, p));
    }
    if triples.is_empty() {
        return Err(Error::Empty);
    }
    let n = triples.iter().map(|&(x, y, _)| x.max(y) + 1).max().unwrap_or(0);
    let mut entries = vec![f64::NAN; n * n];
    for (x, y, p) in triples {
        entries[x * n + y] = p;
    }
    if entries.iter().any(|v| v.is_nan()) {
        return Err(Error::Parse(format!("missing entries for a {n}×{n} correlation")));
    }
    Ok((Correlation::from_flat(n, entries, SIGN_TOL)?, meta))
}

/// Reads JSON (`{"n", "entries"}`) or CSV depending on the extension.
pub fn read_correlation(path: &Path) -> Result<Correlation> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        Ok(serde_json::from_str(&text)?)
    } else {
        Ok(correlation_from_csv(&text)?.0)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmat::make_bm;

    #[test]
    fn csv_round_trip_is_exact() {
        let p = make_bm(5, 0.3).unwrap();
        let meta = vec![("family".to_string(), "bm".to_string())];
        let text = correlation_to_csv(&p, &meta);
        assert!(text.starts_with("# family=bm\nx,y,p\n1,1,"));
        let (back, m) = correlation_from_csv(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(m, meta);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(correlation_from_csv("a,b,c\n"), Err(Error::Parse(_))));
        assert!(matches!(correlation_from_csv("x,y,p\n1,1,0.5\n"), Err(Error::Parse(_)) | Err(Error::SumNotOne { .. })));
        assert!(matches!(correlation_from_csv("x,y,p\n1,1,1.0\n1,2\n"), Err(Error::Parse(_))));
        assert!(matches!(correlation_from_csv("x,y,p\n0,1,1.0\n"), Err(Error::Parse(_))));
        assert_eq!(correlation_from_csv("x,y,p\n"), Err(Error::Empty));
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }
}
