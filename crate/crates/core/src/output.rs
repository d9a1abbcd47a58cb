//! File formats: 9-significant-digit CSV, binary PGM and provenance
//! headers.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::oam::ImageGrid;

pub const TOOL_NAME: &str = "twinbeam";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SWEEP_COLUMNS: [&str; 8] = [
    "delta_mhz",
    "g_p",
    "g_c",
    "g_sum",
    "nsf_linear",
    "nsf_db",
    "t_star",
    "nsf_star_db",
];

/// Header comment lines shared by every output file.
pub fn provenance_lines(config_hash: &str) -> Vec<String> {
    vec![
        format!("{TOOL_NAME} {TOOL_VERSION}"),
        format!("config_sha256={config_hash}"),
    ]
}

/// Formats `v` like C's `%.9g`.
pub fn fmt_sig9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// CSV document with `#` provenance comments, a header row and numeric rows.
pub fn csv_document(config_hash: &str, columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for line in provenance_lines(config_hash) {
        out.push_str("# ");
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_sig9(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Flattens a JSON summary into `key,value` CSV lines with dotted keys.
pub fn summary_csv(config_hash: &str, summary: &Value) -> String {
    let mut pairs = Vec::new();
    flatten("", summary, &mut pairs);
    let mut out = String::new();
    for line in provenance_lines(config_hash) {
        out.push_str("# ");
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("key,value\n");
    for (k, v) in pairs {
        out.push_str(&k);
        out.push(',');
        out.push_str(&csv_escape(&v));
        out.push('\n');
    }
    out
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::Number(n) => {
            let s = match n.as_f64() {
                Some(f) if !n.is_i64() && !n.is_u64() => fmt_sig9(f),
                _ => n.to_string(),
            };
            out.push((prefix.to_string(), s));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

/// Binary PGM (P5), normalized so the brightest pixel hits the maximum
/// value. 16-bit samples are big-endian.
pub fn encode_pgm(image: &ImageGrid, bit_depth: u8, comments: &[String]) -> Result<Vec<u8>> {
    let maxval: u32 = match bit_depth {
        8 => 255,
        16 => 65535,
        other => {
            return Err(Error::Validation(format!(
                "PGM bit depth must be 8 or 16, got {other}"
            )))
        }
    };
    let n = image.geometry.resolution;
    let mut out = Vec::with_capacity(64 + n * n * 2);
    out.extend_from_slice(b"P5\n");
    for c in comments {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    out.extend_from_slice(format!("{n} {n}\n{maxval}\n").as_bytes());
    let peak = image.max();
    let scale = if peak > 0.0 {
        maxval as f64 / peak
    } else {
        0.0
    };
    for &v in &image.data {
        let q = (v * scale).round().clamp(0.0, maxval as f64) as u32;
        if bit_depth == 8 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    Ok(out)
}

/// Parses a P5 PGM back into `(width, height, maxval, samples)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, u32, Vec<u32>)> {
    let bad = |m: &str| Error::Validation(format!("malformed PGM: {m}"));
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).to_string());
    }
    pos += 1;
    if tokens[0] != "P5" {
        return Err(bad("not P5"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad number"));
    let (w, h, maxval) = (
        parse(&tokens[1])?,
        parse(&tokens[2])?,
        parse(&tokens[3])? as u32,
    );
    let width = if maxval > 255 { 2 } else { 1 };
    let body = &bytes[pos.min(bytes.len())..];
    if body.len() != w * h * width {
        return Err(bad("wrong payload size"));
    }
    let samples = if width == 2 {
        body.chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
            .collect()
    } else {
        body.iter().map(|&b| b as u32).collect()
    };
    Ok((w, h, maxval, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oam::Geometry;

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(-50.0), "-50");
        assert_eq!(fmt_sig9(0.84), "0.84");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(-4.771212547196624), "-4.77121255");
        assert_eq!(fmt_sig9(123456789.4), "123456789");
        assert_eq!(fmt_sig9(1234567891.0), "1.23456789e+09");
        assert_eq!(fmt_sig9(0.0001), "0.0001");
        assert_eq!(fmt_sig9(0.00001234), "1.234e-05");
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
    }

    #[test]
    fn csv_layout() {
        let doc = csv_document(
            "abc",
            &SWEEP_COLUMNS,
            &[vec![-1.0, 0.5, 0.25, 0.75, 0.5, -3.0, 1.0, -3.0]],
        );
        let lines: Vec<&str> = doc.lines().collect();
        assert!(lines[0].starts_with("# twinbeam "));
        assert_eq!(lines[1], "# config_sha256=abc");
        assert_eq!(
            lines[2],
            "delta_mhz,g_p,g_c,g_sum,nsf_linear,nsf_db,t_star,nsf_star_db"
        );
        assert_eq!(lines[3], "-1,0.5,0.25,0.75,0.5,-3,1,-3");
    }

    #[test]
    fn summary_flattening() {
        let v = serde_json::json!({"a": {"b": 0.5, "c": [1, 2]}, "d": "x,y", "e": null});
        let doc = summary_csv("h", &v);
        assert!(doc.contains("a.b,0.5\n"));
        assert!(doc.contains("a.c.1,2\n"));
        assert!(doc.contains("d,\"x,y\"\n"));
        assert!(doc.contains("e,\n"));
    }

    #[test]
    fn pgm_round_trip() {
        let geometry = Geometry::new(1.0, 64).unwrap();
        let data: Vec<f64> = (0..64 * 64).map(|i| (i % 97) as f64).collect();
        let img = ImageGrid {
            geometry,
            data,
            warnings: vec![],
        };
        for depth in [8u8, 16] {
            let bytes = encode_pgm(&img, depth, &["hello".into()]).unwrap();
            let (w, h, maxval, px) = decode_pgm(&bytes).unwrap();
            assert_eq!((w, h), (64, 64));
            assert_eq!(maxval, if depth == 8 { 255 } else { 65535 });
            assert_eq!(*px.iter().max().unwrap(), maxval);
            assert_eq!(px[0], 0);
        }
        assert!(encode_pgm(&img, 12, &[]).is_err());
    }
}
