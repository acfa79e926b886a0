//! Self-contained SVG line charts with ±0.5·std bands.

use std::fmt::Write as _;

use crate::error::{HarnessError, Result};

const X_COLUMNS: &[&str] = &["level", "step", "episode"];
const Y_COLUMNS: &[&str] = &["mean_return", "eval_return_mean"];
const STD_COLUMNS: &[&str] = &["std_return", "eval_return_std"];
const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
    pub x_label: Option<String>,
    pub y_label: Option<String>,
    /// Band half-width in standard deviations.
    pub band_scale: f64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 400.0,
            title: None,
            x_label: None,
            y_label: None,
            band_scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(x, mean, std)` sorted by x.
    pub points: Vec<(f64, f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub svg: String,
    pub series: Vec<Series>,
    pub warnings: Vec<String>,
}

struct Table {
    header: Vec<String>,
    /// `(source line, cells)`.
    rows: Vec<(usize, Vec<String>)>,
}

fn parse_error(file: &str, line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_table(file: &str, text: &str) -> Result<Table> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        match &header {
            None => header = Some(cells),
            Some(h) if h.len() != cells.len() => {
                return Err(parse_error(file, i + 1, format!("expected {} fields, found {}", h.len(), cells.len())))
            }
            Some(_) => rows.push((i + 1, cells)),
        }
    }
    let header = header.ok_or_else(|| parse_error(file, 0, "no header row"))?;
    Ok(Table { header, rows })
}

fn find(header: &[String], names: &[&str]) -> Option<usize> {
    names.iter().find_map(|n| header.iter().position(|h| h == n))
}

fn number(file: &str, line: usize, column: &str, cell: &str) -> Result<f64> {
    cell.parse()
        .map_err(|_| parse_error(file, line, format!("`{column}` value `{cell}` is not a number")))
}

/// Groups CSV rows into one series per `algorithm` value (or a single series).
pub fn read_series(file: &str, text: &str) -> Result<(Vec<Series>, bool)> {
    let table = parse_table(file, text)?;
    let h = &table.header;
    let x = find(h, X_COLUMNS).ok_or_else(|| parse_error(file, 0, format!("no x column (one of {X_COLUMNS:?})")))?;
    let y = find(h, Y_COLUMNS).ok_or_else(|| parse_error(file, 0, format!("no y column (one of {Y_COLUMNS:?})")))?;
    let std = find(h, STD_COLUMNS);
    let group = h.iter().position(|c| c == "algorithm");
    let mut series: Vec<Series> = Vec::new();
    for (line, cells) in &table.rows {
        let name = group.map_or_else(|| "series".to_string(), |g| cells[g].clone());
        let px = number(file, *line, &h[x], &cells[x])?;
        let py = number(file, *line, &h[y], &cells[y])?;
        let ps = std.map(|s| number(file, *line, &h[s], &cells[s])).transpose()?;
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((px, py, ps)),
            None => series.push(Series { name, points: vec![(px, py, ps)] }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok((series, std.is_some()))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    (lo, hi)
}

/// Renders an aggregate or training-log CSV as an SVG chart.
pub fn emit_plot(file: &str, csv: &str, style: &PlotStyle) -> Result<Plot> {
    let (series, has_std) = read_series(file, csv)?;
    let mut warnings = Vec::new();
    if !has_std {
        warnings.push(format!("{file}: no std column; bands omitted"));
    }
    let band = |p: &(f64, f64, Option<f64>)| p.2.unwrap_or(0.0) * style.band_scale;
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().flat_map(|p| [p.1 - band(p), p.1 + band(p)]));

    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 50.0);
    let pw = style.width - left - right;
    let ph = style.height - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = style.width,
        h = style.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect class="frame" x="{left}" y="{top}" width="{pw:.3}" height="{ph:.3}" fill="none" stroke="black"/>"#
    );
    for (i, (xv, yv)) in [(x0, y0), (x1, y1)].into_iter().enumerate() {
        let anchor = if i == 0 { "start" } else { "end" };
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="{anchor}">{xv:.4}</text>"#,
            sx(xv),
            top + ph + 16.0
        );
        let _ = writeln!(svg, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{yv:.4}</text>"#, left - 4.0, sy(yv) + 4.0);
    }
    if let Some(t) = &style.title {
        let _ = writeln!(svg, r#"<text x="{:.3}" y="18" text-anchor="middle">{}</text>"#, style.width / 2.0, escape(t));
    }
    if let Some(l) = &style.x_label {
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            style.height - 12.0,
            escape(l)
        );
    }
    if let Some(l) = &style.y_label {
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{:.3}" text-anchor="middle" transform="rotate(-90 14 {:.3})">{}</text>"#,
            top + ph / 2.0,
            top + ph / 2.0,
            escape(l)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if has_std {
            let mut d = String::new();
            for (k, p) in s.points.iter().enumerate() {
                let _ = write!(d, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, sx(p.0), sy(p.1 + band(p)));
            }
            for p in s.points.iter().rev() {
                let _ = write!(d, "L{:.3},{:.3} ", sx(p.0), sy(p.1 - band(p)));
            }
            d.push('Z');
            let _ = writeln!(svg, r#"<path class="band" d="{d}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#);
        }
        let pts: Vec<String> = s.points.iter().map(|p| format!("{:.3},{:.3}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="line" data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(&s.name),
            pts.join(" ")
        );
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{ly:.3}" fill="{color}" text-anchor="end">{}</text>"#,
            left + pw - 6.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(Plot { svg, series, warnings })
}
