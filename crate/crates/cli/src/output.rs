//! Deterministic file output: atomic writes, fixed-precision CSV, SVG.

use std::fs;
use std::path::{Path, PathBuf};

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::error::CliError;

/// Marker written last by a command that finished every output.
pub const COMPLETE_MARKER: &str = "_COMPLETE";

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::validation(format!("not a file path: {}", path.display()), Vec::new()))?;
    let tmp: PathBuf = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn clear_marker(dir: &Path) -> Result<(), CliError> {
    match fs::remove_file(dir.join(COMPLETE_MARKER)) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(e.into()),
    }
}

pub fn write_marker(dir: &Path) -> Result<(), CliError> {
    write_atomic(&dir.join(COMPLETE_MARKER), b"")
}

/// Six fractional digits, half away from zero, never `-0.000000`.
pub fn fmt6(d: Decimal) -> String {
    let r = d.round_dp_with_strategy(6, rust_decimal::RoundingStrategy::MidpointAwayFromZero);
    let r = if r.is_zero() { Decimal::ZERO } else { r };
    format!("{r:.6}")
}

pub fn fmt_f6(v: f64) -> String {
    match Decimal::from_f64_retain(v) {
        Some(d) if v.is_finite() => fmt6(d),
        _ => String::new(),
    }
}

/// CSV text from a header and rows, `\n` line endings.
pub fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::solver(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::solver(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::solver(e.to_string()))
}

/// One named polyline.
pub struct Series {
    pub name: String,
    pub points: Vec<(Decimal, Decimal)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Minimal line chart with axis labels and a legend.
pub fn svg_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let xs: Vec<f64> = pts.clone().map(|p| p.0.to_f64().unwrap_or(0.0)).collect();
    let ys: Vec<f64> = pts.map(|p| p.1.to_f64().unwrap_or(0.0)).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        w / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = h - m,
        r = w - m
    ));
    for (v, anchor_x, anchor_y, rot) in [
        (format!("{x0:.2}"), m, h - m + 16.0, false),
        (format!("{x1:.2}"), w - m, h - m + 16.0, false),
        (format!("{y0:.3}"), m - 6.0, h - m, true),
        (format!("{y1:.3}"), m - 6.0, m + 4.0, true),
    ] {
        let anchor = if rot { "end" } else { "middle" };
        s.push_str(&format!(
            "<text x=\"{anchor_x:.1}\" y=\"{anchor_y:.1}\" text-anchor=\"{anchor}\" font-size=\"11\">{v}</text>\n"
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        w / 2.0,
        h - 18.0,
        escape(x_label)
    ));
    s.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        h / 2.0,
        h / 2.0,
        escape(y_label)
    ));
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    px(x.to_f64().unwrap_or(0.0)),
                    py(y.to_f64().unwrap_or(0.0))
                )
            })
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = m + 16.0 * i as f64;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{ly:.1}\" text-anchor=\"end\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            w - m - 4.0,
            escape(&ser.name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use rust_decimal_macros::dec;

    use super::*;

    #[test]
    fn six_digit_format() {
        assert_eq!(fmt6(dec!(64.24)), "64.240000");
        assert_eq!(fmt6(dec!(-0.0000001)), "0.000000");
        assert_eq!(fmt6(dec!(0.0000005)), "0.000001");
        assert_eq!(fmt6(dec!(-0.93)), "-0.930000");
        assert_eq!(fmt_f6(f64::NAN), "");
    }

    #[test]
    fn csv_has_unix_newlines() {
        let b = csv_bytes(&["a".into(), "b".into()], &[vec!["1".into(), "x,y".into()]]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "a,b\n1,\"x,y\"\n");
    }

    #[test]
    fn svg_contains_series() {
        let s = svg_chart(
            "t",
            "Budget",
            "Emissions",
            &[Series {
                name: "a<b".into(),
                points: vec![(dec!(0), dec!(1)), (dec!(1), dec!(2))],
            }],
        );
        assert!(s.starts_with("<svg") && s.contains("<polyline") && s.contains("a&lt;b"));
    }
}
