//! Result records, run ids, caching and the CSV/SVG writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub x: Value,
    pub value: f64,
    pub abs_error: f64,
    #[serde(flatten)]
    pub columns: BTreeMap<String, f64>,
}

impl Entry {
    pub fn new(x: impl Into<Value>, value: f64, abs_error: f64) -> Self {
        Self { x: x.into(), value, abs_error, columns: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.columns.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub run_id: String,
    pub subcommand: String,
    pub params: Value,
    pub method: String,
    pub passed: bool,
    pub entries: Vec<Entry>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl Record {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize") + "\n"
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub run_id: &'a str,
    pub subcommand: &'a str,
    pub params: &'a Value,
    pub route: &'a Value,
    pub workers: usize,
    pub code_version: &'a str,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub cache_hit: bool,
    pub outputs: Vec<String>,
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// sha256 of (subcommand, parameters, route flags, code version).
pub fn run_id(subcommand: &str, params: &Value, route: &Value) -> String {
    let key = serde_json::json!({
        "subcommand": subcommand,
        "params": params,
        "route": route,
        "version": VERSION,
    });
    let digest = Sha256::digest(key.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn cache_path(dir: &Path, run_id: &str) -> PathBuf {
    dir.join(format!("{run_id}.json"))
}

pub fn read_cache(dir: &Path, run_id: &str) -> Option<String> {
    let text = std::fs::read_to_string(cache_path(dir, run_id)).ok()?;
    let record: Record = serde_json::from_str(&text).ok()?;
    (record.run_id == run_id).then_some(text)
}

pub fn write_cache(dir: &Path, run_id: &str, json: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = cache_path(dir, run_id);
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, json)?;
    std::fs::rename(tmp, path)
}

fn x_text(x: &Value) -> String {
    match x {
        Value::Array(items) => items.iter().map(x_text).collect::<Vec<_>>().join(";"),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn to_csv(record: &Record) -> String {
    let extra: Vec<String> = record
        .entries
        .iter()
        .flat_map(|e| e.columns.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = String::from("x,value,abs_error");
    for c in &extra {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for e in &record.entries {
        let _ = write!(out, "{},{:e},{:e}", x_text(&e.x), e.value, e.abs_error);
        for c in &extra {
            match e.columns.get(c) {
                Some(v) => {
                    let _ = write!(out, ",{v:e}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Step chart of the entries with numeric x; None when there are none.
pub fn to_svg(record: &Record) -> Option<String> {
    let pts: Vec<(f64, f64)> = record.entries.iter().filter_map(|e| Some((e.x.as_f64()?, e.value))).collect();
    if pts.is_empty() {
        return None;
    }
    let (w, h, m) = (640.0, 400.0, 50.0);
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (x1, y0, y1) = (x1.max(x0 + 1.0), y0.min(0.0), y1.max(y0 + 1e-12));
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut path = String::new();
    for (k, &(x, y)) in pts.iter().enumerate() {
        if k == 0 {
            let _ = write!(path, "M{:.2},{:.2}", sx(x), sy(y));
        } else {
            let _ = write!(path, " H{:.2} V{:.2}", sx(x), sy(y));
        }
    }
    let _ = write!(path, " H{:.2}", sx(x1));
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = h - m,
        r = w - m
    );
    let _ = writeln!(svg, "<path d=\"{path}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>");
    for (k, &(x, y)) in pts.iter().enumerate() {
        let _ = writeln!(svg, "<circle id=\"p{k}\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"steelblue\"/>", sx(x), sy(y));
    }
    let label = |x: f64, y: f64, anchor: &str, text: String| {
        format!("<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"12\" text-anchor=\"{anchor}\">{text}</text>\n")
    };
    svg += &label(m, h - m + 16.0, "middle", format!("{x0}"));
    svg += &label(w - m, h - m + 16.0, "middle", format!("{x1}"));
    svg += &label(m - 6.0, h - m, "end", format!("{y0:.3}"));
    svg += &label(m - 6.0, m + 4.0, "end", format!("{y1:.3}"));
    svg += &label(w / 2.0, 24.0, "middle", format!("{} ({})", record.subcommand, record.method));
    svg += "</svg>\n";
    Some(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> Record {
        Record {
            run_id: "r".into(),
            subcommand: "onepoint".into(),
            params: Value::Null,
            method: "detRep".into(),
            passed: true,
            entries: vec![Entry::new(0, 0.25, 1e-12), Entry::new(1, 0.75, 1e-12).with("rhs", 0.5)],
            details: Value::Null,
        }
    }

    #[test]
    fn csv_has_fixed_header_and_extra_columns() {
        let csv = to_csv(&record());
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,value,abs_error,rhs"));
        assert_eq!(lines.next(), Some("0,2.5e-1,1e-12,"));
        assert_eq!(lines.next(), Some("1,7.5e-1,1e-12,5e-1"));
    }

    #[test]
    fn run_id_depends_on_every_part() {
        let p = serde_json::json!({"t": 1.0});
        let q = serde_json::json!({"t": 2.0});
        let r = serde_json::json!({});
        let a = run_id("onepoint", &p, &r);
        assert_eq!(a.len(), 64);
        assert_ne!(a, run_id("onepoint", &q, &r));
        assert_ne!(a, run_id("series", &p, &r));
        assert_eq!(a, run_id("onepoint", &p, &r));
    }

    #[test]
    fn svg_has_one_marker_per_point() {
        let svg = to_svg(&record()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
