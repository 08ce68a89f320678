//! Output files: two-column CSV patterns and JSON reports.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use crate::biphoton::{DetectorPlane, Pattern};
use crate::counting::CountsHistogram;
use crate::error::{Error, Result};

/// `{"value": v, "unit": u}`.
pub fn quantity(value: f64, unit: &str) -> Value {
    json!({ "value": value, "unit": unit })
}

/// Write via a sibling temporary file and rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn pattern_csv(p: &Pattern) -> String {
    let mut s = String::from("position_mm,rate\n");
    for (x, r) in p.positions().iter().zip(p.rates()) {
        writeln!(s, "{:.16e},{:.16e}", x * 1e3, r).expect("string write");
    }
    s
}

pub fn counts_csv(h: &CountsHistogram) -> String {
    let mut s = String::from("position_mm,counts\n");
    for (x, c) in h.positions().iter().zip(h.counts()) {
        writeln!(s, "{:.16e},{c}", x * 1e3).expect("string write");
    }
    s
}

fn parse_rows(text: &str, header: &str) -> Result<Vec<(f64, String)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header '{header}'"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let (x, v) = l.split_once(',').ok_or_else(|| bad("expected two columns"))?;
            let x: f64 = x.trim().parse().map_err(|_| bad("bad position"))?;
            Ok((x * 1e-3, v.trim().to_string()))
        })
        .collect()
}

pub fn read_pattern_csv(text: &str, plane: DetectorPlane) -> Result<Pattern> {
    let rows = parse_rows(text, "position_mm,rate")?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for (i, (x, v)) in rows.into_iter().enumerate() {
        xs.push(x);
        ys.push(v.parse().map_err(|_| Error::Parse {
            line: i + 2,
            message: "bad rate".into(),
        })?);
    }
    Pattern::new(xs, ys, plane)
}

pub fn read_counts_csv(text: &str, plane: DetectorPlane) -> Result<CountsHistogram> {
    let rows = parse_rows(text, "position_mm,counts")?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut cs = Vec::with_capacity(rows.len());
    for (i, (x, v)) in rows.into_iter().enumerate() {
        xs.push(x);
        cs.push(v.parse().map_err(|_| Error::Parse {
            line: i + 2,
            message: "bad count".into(),
        })?);
    }
    CountsHistogram::new(xs, cs, plane)
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s.into_bytes()
}
