//! Deterministic text output. Floats are always written with 17
//! significant digits so that reruns can be compared byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat(' ').take(n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                // serde_json maps non-finite floats to null before we get here
                out.push_str(&float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(out, item, indent + 2);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, indent + 2);
                let _ = write!(out, "{}: ", Value::String(k.clone()));
                write_value(out, item, indent + 2);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

pub fn json_string<T: Serialize>(v: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(v)?;
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    Ok(out)
}

/// Writes to `path`, or to stdout when `path` is `-`.
pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    if path.as_os_str() == "-" {
        print!("{text}");
        Ok(())
    } else {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, text)
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Grayscale heatmap: one column per (n, m) pair, one row per k, white for
/// success fraction 1 and black for 0. Missing cells are left hatched.
pub fn heatmap_svg(cells: &[(usize, usize, usize, f64)]) -> String {
    let mut cols: Vec<(usize, usize)> = cells.iter().map(|c| (c.0, c.1)).collect();
    cols.sort_unstable();
    cols.dedup();
    let mut ks: Vec<usize> = cells.iter().map(|c| c.2).collect();
    ks.sort_unstable();
    ks.dedup();
    let (cw, ch, left, top) = (48usize, 28usize, 56usize, 24usize);
    let width = left + cw * cols.len() + 16;
    let height = top + ch * ks.len() + 48;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="11">"#
    );
    s.push_str(
        "<defs><pattern id=\"na\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">\
<path d=\"M0,6 L6,0\" stroke=\"#999\" stroke-width=\"1\"/></pattern></defs>\n",
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    // k grows upward, as in the usual phase diagram
    for (ri, &k) in ks.iter().rev().enumerate() {
        let y = top + ri * ch;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">k={k}</text>"#, left - 6, y + ch / 2 + 4);
        for (ci, &(n, m)) in cols.iter().enumerate() {
            let x = left + ci * cw;
            let fill = match cells.iter().find(|c| c.0 == n && c.1 == m && c.2 == k) {
                Some(c) if c.3.is_finite() => {
                    let g = (c.3.clamp(0.0, 1.0) * 255.0).round() as u8;
                    format!("rgb({g},{g},{g})")
                }
                _ => "url(#na)".into(),
            };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="#444" stroke-width="0.5"/>"##
            );
        }
    }
    let base = top + ks.len() * ch;
    for (ci, &(n, m)) in cols.iter().enumerate() {
        let x = left + ci * cw + cw / 2;
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">n={n}</text>"#, base + 14);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">m={m}</text>"#, base + 28);
    }
    s.push_str("</svg>\n");
    s
}
