//! CSV, JSON and SVG renderings of a report bundle. Every file carries the full
//! effective configuration; nothing time-dependent is written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::ConfidenceCurve;
use crate::cluster::ClusterTable;
use crate::error::{Error, Result};

use super::coverage::CoverageReport;
use super::pipeline::ReportBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" => Ok(Self::Svg),
            other => Err(Error::param(format!("unknown format {other:?} (csv, json, svg)"))),
        }
    }
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [Self::Csv, Self::Json, Self::Svg];

    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        let mut out: Vec<Self> = Vec::new();
        for f in list.split(',').filter(|s| !s.trim().is_empty()) {
            let f: Self = f.parse()?;
            if !out.contains(&f) {
                out.push(f);
            }
        }
        if out.is_empty() {
            return Err(Error::param("no output format given"));
        }
        Ok(out)
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(format!("CSV: {other:?}")),
    }
}

/// `# config: {...}` header line followed by a CSV body.
fn csv_document(config_json: &str, header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(r).map_err(csv_error)?;
    }
    let body = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
    let body = String::from_utf8(body).map_err(|e| Error::format(e.to_string()))?;
    Ok(format!("# config: {config_json}\n{body}"))
}

/// A bound truncated (not rounded) to two decimals, e.g. `0.66`.
pub fn format_hundredths(h: usize) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

fn config_json(bundle: &ReportBundle) -> Result<String> {
    Ok(serde_json::to_string(&bundle.config)?)
}

/// Reportable clusters only, columns `ID,X,Y,Z,PeakStat,Size_mm3,<methods>`.
pub fn cluster_table_csv(table: &ClusterTable, methods: &[String], config_json: &str) -> Result<String> {
    let mut header: Vec<String> = ["ID", "X", "Y", "Z", "PeakStat", "Size_mm3"].map(String::from).to_vec();
    header.extend(methods.iter().cloned());
    let rows: Vec<Vec<String>> = table
        .reportable()
        .map(|row| {
            let c = &row.cluster;
            let mut r = vec![
                c.id.to_string(),
                format!("{}", c.peak_world[0]),
                format!("{}", c.peak_world[1]),
                format!("{}", c.peak_world[2]),
                format!("{:.2}", c.peak_stat),
                format!("{}", c.size_mm3),
            ];
            r.extend(methods.iter().map(|m| row.bounds.get(m).map(|b| format_hundredths(b.hundredths())).unwrap_or_default()));
            r
        })
        .collect();
    csv_document(config_json, &header, &rows)
}

/// Columns `k, z_at_k, <methods>`.
pub fn curve_csv(curve: &ConfidenceCurve, config_json: &str) -> Result<String> {
    let mut header = vec!["k".to_string(), "z_at_k".to_string()];
    header.extend(curve.bounds.keys().cloned());
    let rows: Vec<Vec<String>> = curve
        .ks
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let mut r = vec![k.to_string(), format!("{}", curve.z_at_k[i])];
            r.extend(curve.bounds.values().map(|v| format!("{}", v[i])));
            r
        })
        .collect();
    csv_document(config_json, &header, &rows)
}

pub fn scatter_csv(bundle: &ReportBundle) -> Result<String> {
    let header = ["z", "cluster_id", "size_mm3", "method", "bound"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = bundle
        .scatter
        .iter()
        .map(|s| vec![format!("{}", s.z), s.cluster_id.to_string(), format!("{}", s.size_mm3), s.method.clone(), format!("{}", s.bound)])
        .collect();
    csv_document(&config_json(bundle)?, &header, &rows)
}

pub fn coverage_csv(report: &CoverageReport) -> Result<String> {
    let cfg = serde_json::to_string(&serde_json::json!({
        "sim": report.sim,
        "bench": report.bench,
        "n_reps": report.n_reps,
        "topk_points": report.topk_points,
    }))?;
    let header = ["method", "violations", "n_reps", "frequency", "wilson_low", "wilson_high", "budget", "within_budget"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = report
        .methods
        .iter()
        .map(|m| {
            vec![
                m.method.clone(),
                m.violations.to_string(),
                report.n_reps.to_string(),
                format!("{}", m.frequency),
                format!("{}", m.wilson_low),
                format!("{}", m.wilson_high),
                format!("{}", m.budget),
                m.within_budget.to_string(),
            ]
        })
        .collect();
    csv_document(&cfg, &header, &rows)
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: [f64; 4] = [40.0, 130.0, 50.0, 60.0]; // top, right, bottom, left

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn at(ox: f64, oy: f64) -> Self {
        Self { x0: ox + MARGIN[3], y0: oy + MARGIN[0], w: WIDTH - MARGIN[1] - MARGIN[3], h: HEIGHT - MARGIN[0] - MARGIN[2] }
    }

    /// `u`, `v` in [0, 1]; `v = 1` is the top.
    fn point(&self, u: f64, v: f64) -> (f64, f64) {
        (self.x0 + u * self.w, self.y0 + (1.0 - v) * self.h)
    }
}

fn svg_open(out: &mut String, width: f64, height: f64, title: &str, metadata: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape_xml(title));
    let _ = writeln!(out, "<metadata>{}</metadata>", escape_xml(metadata));
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

fn axes(out: &mut String, f: &Frame, x_label: &str, x_ticks: &[(f64, String)]) {
    let (xl, yb) = f.point(0.0, 0.0);
    let (xr, yt) = f.point(1.0, 1.0);
    let _ = writeln!(out, r#"<path d="M{xl:.1} {yt:.1} V{yb:.1} H{xr:.1}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let (x, y) = f.point(0.0, v);
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.1}" x2="{x:.1}" y2="{y:.1}" stroke="black"/>"#, x - 4.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, x - 6.0, y + 4.0);
    }
    for (u, label) in x_ticks {
        let (x, y) = f.point(*u, 0.0);
        let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, y + 4.0);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, y + 16.0, escape_xml(label));
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        f.x0 + f.w / 2.0,
        f.y0 + f.h + 36.0,
        escape_xml(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate({:.1} {:.1}) rotate(-90)" text-anchor="middle">TDP lower bound</text>"#,
        f.x0 - 44.0,
        f.y0 + f.h / 2.0
    );
}

fn legend(out: &mut String, f: &Frame, methods: &[String]) {
    for (i, m) in methods.iter().enumerate() {
        let x = f.x0 + f.w + 16.0;
        let y = f.y0 + 10.0 + 18.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{color}"/>"#, y - 10.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, x + 18.0, escape_xml(m));
    }
}

/// Log10 axis spanning `[lo, hi]` with decade ticks.
fn log_axis(lo: f64, hi: f64) -> (impl Fn(f64) -> f64, Vec<(f64, String)>) {
    let (a, b) = (lo.max(f64::MIN_POSITIVE).log10(), hi.max(lo * 10.0).log10());
    let span = (b - a).max(1e-12);
    let map = move |x: f64| (x.log10() - a) / span;
    let ticks = (a.ceil() as i32..=b.floor() as i32)
        .map(|e| ((f64::from(e) - a) / span, format!("{}", 10f64.powi(e))))
        .collect();
    (map, ticks)
}

/// Bound versus `k` (log scale) with dotted verticals at the reference `|Z|` cuts.
pub fn curve_svg(curve: &ConfidenceCurve, config_json: &str) -> String {
    let mut out = String::new();
    svg_open(&mut out, WIDTH, HEIGHT, "Confidence curves: TDP lower bound of top-k sets", config_json);
    let f = Frame::at(0.0, 0.0);
    let k_max = curve.ks.last().copied().unwrap_or(1).max(1) as f64;
    let (map, ticks) = log_axis(1.0, k_max);
    axes(&mut out, &f, "k (voxels ordered by |Z|)", &ticks);
    for &(z, k) in &curve.reference_k {
        if k == 0 {
            continue;
        }
        let (x, y_bot) = f.point(map(k as f64), 0.0);
        let (_, y_top) = f.point(0.0, 1.0);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{y_top:.1}" x2="{x:.1}" y2="{y_bot:.1}" stroke="gray" stroke-dasharray="2 3"/>"#
        );
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" fill="gray">z={z}</text>"#, y_top - 4.0);
    }
    let methods: Vec<String> = curve.bounds.keys().cloned().collect();
    for (i, values) in curve.bounds.values().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = curve
            .ks
            .iter()
            .zip(values)
            .map(|(&k, &v)| {
                let (x, y) = f.point(map(k as f64), v);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
    }
    legend(&mut out, &f, &methods);
    out.push_str("</svg>\n");
    out
}

/// One panel per threshold: bound versus cluster size (log scale).
pub fn scatter_svg(bundle: &ReportBundle) -> Result<String> {
    let methods = bundle.methods();
    let zs: Vec<f64> = bundle.tables.iter().map(|t| t.z_threshold).collect();
    let panels = zs.len().max(1);
    let mut out = String::new();
    svg_open(&mut out, WIDTH, HEIGHT * panels as f64, "TDP lower bound versus cluster size", &config_json(bundle)?);
    let sizes = bundle.scatter.iter().map(|s| s.size_mm3);
    let lo = sizes.clone().fold(f64::INFINITY, f64::min);
    let hi = sizes.fold(0.0, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (1.0, 10.0) };
    let (map, ticks) = log_axis(lo, hi);
    for (panel, &z) in zs.iter().enumerate() {
        let f = Frame::at(0.0, HEIGHT * panel as f64);
        axes(&mut out, &f, "cluster size (mm³)", &ticks);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-weight="bold">z = {z}</text>"#, f.x0, f.y0 - 12.0);
        for rec in bundle.scatter.iter().filter(|s| s.z == z) {
            let i = methods.iter().position(|m| *m == rec.method).unwrap_or(0);
            let (x, y) = f.point(map(rec.size_mm3), rec.bound);
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{}" fill-opacity="0.7"/>"#,
                PALETTE[i % PALETTE.len()]
            );
        }
        legend(&mut out, &f, &methods);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn z_tag(z: f64) -> String {
    format!("z{z}").replace('-', "m")
}

fn write_file(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

/// Writes the bundle in the requested formats; returns the files written.
///
/// csv: `clusters_z<z>.csv` per threshold, `curve.csv`, `scatter.csv`;
/// json: `bundle.json`; svg: `curve.svg`, `scatter.svg`.
pub fn emit_report(bundle: &ReportBundle, formats: &[ReportFormat], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let cfg = config_json(bundle)?;
    let methods = bundle.methods();
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Csv => {
                for t in &bundle.tables {
                    let name = format!("clusters_{}.csv", z_tag(t.z_threshold));
                    write_file(dir, &name, &cluster_table_csv(t, &methods, &cfg)?, &mut written)?;
                }
                write_file(dir, "curve.csv", &curve_csv(&bundle.curve, &cfg)?, &mut written)?;
                write_file(dir, "scatter.csv", &scatter_csv(bundle)?, &mut written)?;
            }
            ReportFormat::Json => {
                let json = serde_json::to_string_pretty(bundle)? + "\n";
                write_file(dir, "bundle.json", &json, &mut written)?;
            }
            ReportFormat::Svg => {
                write_file(dir, "curve.svg", &curve_svg(&bundle.curve, &cfg), &mut written)?;
                write_file(dir, "scatter.svg", &scatter_svg(bundle)?, &mut written)?;
            }
        }
    }
    Ok(written)
}

pub fn emit_coverage(report: &CoverageReport, formats: &[ReportFormat], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Csv => write_file(dir, "coverage.csv", &coverage_csv(report)?, &mut written)?,
            ReportFormat::Json => {
                write_file(dir, "coverage.json", &(serde_json::to_string_pretty(report)? + "\n"), &mut written)?
            }
            ReportFormat::Svg => return Err(Error::param("coverage reports have no SVG rendering")),
        }
    }
    Ok(written)
}

/// Reads back a bundle written as `bundle.json`.
pub fn read_bundle(path: &Path) -> Result<ReportBundle> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
