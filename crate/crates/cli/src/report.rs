//! Tables, per-country CSVs and SVG plots.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use fiscal_svar::{Bands, IrfSet, MultiplierPath, Significance};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot parse table: {0}")]
    Parse(String),
}

/// Full round-trip precision: 17 significant digits.
pub fn full(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct TableColumn<'a> {
    pub header: String,
    pub path: &'a MultiplierPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub text: String,
    pub csv: String,
}

fn check_horizons(columns: &[TableColumn<'_>]) -> Result<usize, ReportError> {
    let h = columns
        .first()
        .ok_or_else(|| ReportError::Shape("table needs at least one column".into()))?
        .path
        .horizon();
    if let Some(c) = columns.iter().find(|c| c.path.horizon() != h) {
        return Err(ReportError::Shape(format!(
            "column `{}` has {} quarters, expected {h}",
            c.header,
            c.path.horizon()
        )));
    }
    if h == 0 {
        return Err(ReportError::Shape("empty horizon".into()));
    }
    Ok(h)
}

fn stars_at(path: &MultiplierPath, h: usize) -> &'static str {
    path.stars().get(h).map_or("", |s| s.stars())
}

/// Quarters down, countries across. The text form rounds to three decimals
/// and appends the stars; the CSV keeps full precision with stars in their
/// own column.
pub fn emit_table(columns: &[TableColumn<'_>]) -> Result<Table, ReportError> {
    let horizon = check_horizons(columns)?;
    let widths: Vec<usize> = columns.iter().map(|c| c.header.len().max(9) + 2).collect();

    let mut text =
        String::from("Cumulative spending multipliers (** 90% band excludes zero, * 68% band excludes zero)\n");
    let mut line = format!("{:<4}", "");
    for (c, w) in columns.iter().zip(&widths) {
        write!(line, "{:>w$}  ", c.header, w = w).unwrap();
    }
    text.push_str(line.trim_end());
    text.push('\n');
    for h in 0..horizon {
        let mut line = format!("{:<4}", format!("Q{}", h + 1));
        for (c, w) in columns.iter().zip(&widths) {
            write!(
                line,
                "{:>w$}{:<2}",
                format!("{:.3}", c.path.values()[h]),
                stars_at(c.path, h),
                w = w
            )
            .unwrap();
        }
        text.push_str(line.trim_end());
        text.push('\n');
    }

    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["quarter".to_string()];
    for c in columns {
        header.push(c.header.clone());
        header.push(format!("{}_stars", c.header));
    }
    wtr.write_record(&header)?;
    for h in 0..horizon {
        let mut row = vec![format!("Q{}", h + 1)];
        for c in columns {
            row.push(full(c.path.values()[h]));
            row.push(stars_at(c.path, h).to_string());
        }
        wtr.write_record(&row)?;
    }
    let csv = String::from_utf8(wtr.into_inner().map_err(|e| ReportError::Parse(e.to_string()))?)
        .expect("CSV output is UTF-8");
    Ok(Table { text, csv })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedColumn {
    pub header: String,
    pub values: Vec<f64>,
    pub stars: Vec<Significance>,
}

/// Reads back the CSV form of [`emit_table`].
pub fn parse_table_csv(text: &str) -> Result<Vec<ParsedColumn>, ReportError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.len() < 3 || header.len() % 2 != 1 || &header[0] != "quarter" {
        return Err(ReportError::Parse(
            "expected `quarter` then value/stars column pairs".into(),
        ));
    }
    let mut columns: Vec<ParsedColumn> = (1..header.len())
        .step_by(2)
        .map(|i| ParsedColumn {
            header: header[i].to_string(),
            values: Vec::new(),
            stars: Vec::new(),
        })
        .collect();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record[0] != format!("Q{}", row + 1) {
            return Err(ReportError::Parse(format!(
                "row {} is labelled `{}`",
                row + 1,
                &record[0]
            )));
        }
        for (j, col) in columns.iter_mut().enumerate() {
            let raw = &record[1 + 2 * j];
            let v = raw
                .parse::<f64>()
                .map_err(|_| ReportError::Parse(format!("`{raw}` is not a number")))?;
            let s = &record[2 + 2 * j];
            let star = Significance::from_stars(s).ok_or_else(|| ReportError::Parse(format!("bad stars `{s}`")))?;
            col.values.push(v);
            col.stars.push(star);
        }
    }
    Ok(columns)
}

fn band_headers(prefix: &str, bands: Option<&Bands>) -> Vec<String> {
    bands
        .map(|b| {
            b.levels
                .iter()
                .flat_map(|l| {
                    [
                        format!("{prefix}lower_{}", level_name(l.level)),
                        format!("{prefix}upper_{}", level_name(l.level)),
                    ]
                })
                .collect()
        })
        .unwrap_or_default()
}

fn band_cells(bands: Option<&Bands>, h: usize, out: &mut Vec<String>) {
    if let Some(b) = bands {
        for l in &b.levels {
            out.push(full(l.lower[h]));
            out.push(full(l.upper[h]));
        }
    }
}

fn level_name(level: f64) -> String {
    if level.fract() == 0.0 {
        format!("{level:.0}")
    } else {
        level.to_string().replace('.', "_")
    }
}

/// `h, variable, response, cumulative` plus band columns, one row per
/// horizon and variable, `h = 0..=H`.
pub fn write_irf_csv<W: Write>(
    irfs: &IrfSet,
    response_bands: &[Bands],
    cumulative_bands: &[Bands],
    out: W,
) -> Result<(), ReportError> {
    let k = irfs.labels().len();
    if response_bands.len() != k || cumulative_bands.len() != k {
        return Err(ReportError::Shape(format!(
            "{k} variables but bands for {}",
            response_bands.len()
        )));
    }
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["h", "variable", "response", "cumulative"].map(String::from).to_vec();
    header.extend(band_headers("response_", response_bands.first()));
    header.extend(band_headers("cumulative_", cumulative_bands.first()));
    wtr.write_record(&header)?;
    for h in 0..=irfs.horizon() {
        for (v, label) in irfs.labels().iter().enumerate() {
            let mut row = vec![
                h.to_string(),
                label.clone(),
                full(irfs.responses()[(h, v)]),
                full(irfs.cumulative()[(h, v)]),
            ];
            band_cells(Some(&response_bands[v]), h, &mut row);
            band_cells(Some(&cumulative_bands[v]), h, &mut row);
            wtr.write_record(&row)?;
        }
    }
    wtr.flush().map_err(|e| ReportError::Io {
        path: "IRF CSV".into(),
        source: e,
    })?;
    Ok(())
}

/// `h, m`, band columns and `stars`, for quarters `1..=H`.
pub fn write_multiplier_csv<W: Write>(path: &MultiplierPath, out: W) -> Result<(), ReportError> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["h".into(), "m".into()];
    header.extend(band_headers("", path.bands()));
    header.push("stars".into());
    wtr.write_record(&header)?;
    for h in 0..path.horizon() {
        let mut row = vec![(h + 1).to_string(), full(path.values()[h])];
        band_cells(path.bands(), h, &mut row);
        row.push(stars_at(path, h).to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| ReportError::Io {
        path: "multiplier CSV".into(),
        source: e,
    })?;
    Ok(())
}

/// One line chart: point estimate with its 68% and 90% bands.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub title: String,
    pub x: Vec<f64>,
    pub point: Vec<f64>,
    pub band68: (Vec<f64>, Vec<f64>),
    pub band90: (Vec<f64>, Vec<f64>),
}

fn band_pair(bands: &Bands, level: f64, range: std::ops::Range<usize>) -> Result<(Vec<f64>, Vec<f64>), ReportError> {
    let b = bands
        .level(level)
        .ok_or_else(|| ReportError::Shape(format!("no {level}% band")))?;
    Ok((b.lower[range.clone()].to_vec(), b.upper[range].to_vec()))
}

impl PlotData {
    pub fn multipliers(title: impl Into<String>, path: &MultiplierPath) -> Result<Self, ReportError> {
        let bands = path
            .bands()
            .ok_or_else(|| ReportError::Shape("multiplier path has no bands".into()))?;
        let n = path.horizon();
        Ok(Self {
            title: title.into(),
            x: (1..=n).map(|h| h as f64).collect(),
            point: path.values().to_vec(),
            band68: band_pair(bands, 68.0, 0..n)?,
            band90: band_pair(bands, 90.0, 0..n)?,
        })
    }

    pub fn response(
        title: impl Into<String>,
        irfs: &IrfSet,
        variable: usize,
        bands: &Bands,
    ) -> Result<Self, ReportError> {
        let n = irfs.horizon() + 1;
        if variable >= irfs.labels().len() || bands.horizons() != n {
            return Err(ReportError::Shape("response bands do not match the IRF".into()));
        }
        Ok(Self {
            title: title.into(),
            x: (0..n).map(|h| h as f64).collect(),
            point: irfs.responses().column(variable).iter().copied().collect(),
            band68: band_pair(bands, 68.0, 0..n)?,
            band90: band_pair(bands, 90.0, 0..n)?,
        })
    }

    fn check(&self) -> Result<(), ReportError> {
        let n = self.x.len();
        if n == 0 {
            return Err(ReportError::Shape("nothing to plot".into()));
        }
        let lens = [
            self.point.len(),
            self.band68.0.len(),
            self.band68.1.len(),
            self.band90.0.len(),
            self.band90.1.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(ReportError::Shape(format!(
                "series lengths {lens:?} differ from {n} x values"
            )));
        }
        if self.all().any(|v| !v.is_finite()) || self.x.iter().any(|v| !v.is_finite()) {
            return Err(ReportError::Shape("non-finite value in plot data".into()));
        }
        Ok(())
    }

    fn all(&self) -> impl Iterator<Item = f64> + '_ {
        self.point
            .iter()
            .chain(&self.band68.0)
            .chain(&self.band68.1)
            .chain(&self.band90.0)
            .chain(&self.band90.1)
            .copied()
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// SVG 1.1 text; equal input gives equal bytes.
pub fn render_svg(plot: &PlotData) -> Result<String, ReportError> {
    plot.check()?;
    let (mut lo, mut hi) = plot.all().fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let (x0, x1) = (plot.x[0], *plot.x.last().unwrap());
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| MARGIN + (x - x0) / xspan * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    )
    .unwrap();
    // Axes.
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    writeln!(
        s,
        r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#
    )
    .unwrap();
    let zero = py(0.0);
    writeln!(
        s,
        r#"<line x1="{left}" y1="{zero:.2}" x2="{right}" y2="{zero:.2}" stroke="gray" stroke-width="0.8"/>"#
    )
    .unwrap();
    for (value, label) in [(lo, lo), (hi, hi)] {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="10">{:.3}</text>"#,
            left - 4.0,
            py(value) + 3.0,
            label
        )
        .unwrap();
    }
    for x in [x0, x1] {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{x}</text>"#,
            px(x),
            bottom + 14.0
        )
        .unwrap();
    }

    let mut polyline = |ys: &[f64], stroke: &str, dash: Option<&str>| {
        let points: Vec<String> = plot
            .x
            .iter()
            .zip(ys)
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>"#,
            points.join(" ")
        )
        .unwrap();
    };
    polyline(&plot.band90.0, "red", Some("6,4"));
    polyline(&plot.band90.1, "red", Some("6,4"));
    polyline(&plot.band68.0, "blue", Some("6,4"));
    polyline(&plot.band68.1, "blue", Some("6,4"));
    polyline(&plot.point, "black", None);
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(plot: &PlotData, path: &Path) -> Result<(), ReportError> {
    let svg = render_svg(plot)?;
    std::fs::write(path, svg).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}
