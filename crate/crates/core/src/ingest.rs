//! Country CSV loading and construction of the transformed estimation panel.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{
    deflate, first_difference, hall_transform, net_expenditure, Quarter, QuarterRange, QuarterlySeries, SeriesError,
    Unit,
};

/// Endogenous column labels in identification order.
pub const ENDOGENOUS_LABELS: [&str; 4] = ["G", "T", "Y", "i"];
/// Exogenous control labels.
pub const EXOGENOUS_LABELS: [&str; 3] = ["us_gdp_growth", "us_inflation", "us_short_rate_diff"];

/// Quarterly output growth beyond this magnitude is suspicious.
pub const GROWTH_WARNING_THRESHOLD: f64 = 0.25;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{column}` (series `{role}`)")]
    Schema { role: &'static str, column: String },
    #[error("line {line}, column `{column}`: cannot parse `{value}`")]
    Parse { line: u64, column: String, value: String },
    #[error("gap in quarters: {missing} missing after {after}")]
    Gap { after: Quarter, missing: Quarter },
    #[error("quarter {0} appears more than once")]
    Duplicate(Quarter),
    #[error("file contains no data rows")]
    NoRows,
    #[error("series `{series}`: {source}")]
    Series { series: &'static str, source: SeriesError },
    #[error(transparent)]
    Panel(#[from] PanelError),
}

fn in_series(series: &'static str) -> impl Fn(SeriesError) -> IngestError {
    move |source| IngestError::Series { series, source }
}

/// Maps each required series to its CSV column header.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnSchema {
    pub date: String,
    pub total_expenditure: String,
    pub subsidies: String,
    pub vat: String,
    pub gdp: String,
    pub cpi: String,
    pub short_rate: String,
    pub us_gdp: String,
    pub us_inflation: String,
    pub us_short_rate: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            total_expenditure: "total_expenditure".into(),
            subsidies: "subsidies".into(),
            vat: "vat".into(),
            gdp: "gdp".into(),
            cpi: "cpi".into(),
            short_rate: "short_rate".into(),
            us_gdp: "us_gdp".into(),
            us_inflation: "us_inflation".into(),
            us_short_rate: "us_short_rate".into(),
        }
    }
}

impl ColumnSchema {
    /// (series name, column header, unit) for every value column, in file order.
    fn value_columns(&self) -> [(&'static str, &str, Unit); 9] {
        [
            ("total_expenditure", &self.total_expenditure, Unit::LevelCurrency),
            ("subsidies", &self.subsidies, Unit::LevelCurrency),
            ("vat", &self.vat, Unit::LevelCurrency),
            ("gdp", &self.gdp, Unit::LevelCurrency),
            ("cpi", &self.cpi, Unit::Index),
            ("short_rate", &self.short_rate, Unit::RatePercent),
            ("us_gdp", &self.us_gdp, Unit::LevelCurrency),
            ("us_inflation", &self.us_inflation, Unit::RatePercent),
            ("us_short_rate", &self.us_short_rate, Unit::RatePercent),
        ]
    }
}

/// Raw, seasonally adjusted level data for one country.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroDataset {
    pub country: String,
    pub total_expenditure: QuarterlySeries,
    pub subsidies: QuarterlySeries,
    pub vat: QuarterlySeries,
    pub gdp: QuarterlySeries,
    pub cpi: QuarterlySeries,
    pub short_rate: QuarterlySeries,
    pub us_gdp: QuarterlySeries,
    pub us_inflation: QuarterlySeries,
    pub us_short_rate: QuarterlySeries,
}

impl MacroDataset {
    fn series(&self) -> [(&'static str, &QuarterlySeries); 9] {
        [
            ("total_expenditure", &self.total_expenditure),
            ("subsidies", &self.subsidies),
            ("vat", &self.vat),
            ("gdp", &self.gdp),
            ("cpi", &self.cpi),
            ("short_rate", &self.short_rate),
            ("us_gdp", &self.us_gdp),
            ("us_inflation", &self.us_inflation),
            ("us_short_rate", &self.us_short_rate),
        ]
    }

    /// Quarters covered by every series.
    pub fn coverage(&self) -> QuarterRange {
        let series = self.series();
        let start = series.iter().map(|(_, s)| s.start()).max().unwrap();
        let end = series.iter().map(|(_, s)| s.end()).min().unwrap();
        QuarterRange::new(start, end)
    }

    /// Writes the dataset in the loader's CSV layout.
    pub fn write_csv<W: Write>(&self, writer: W, schema: &ColumnSchema) -> Result<(), IngestError> {
        let coverage = self.coverage();
        let mut out = csv::Writer::from_writer(writer);
        let columns = schema.value_columns();
        let mut header = vec![schema.date.as_str()];
        header.extend(columns.iter().map(|(_, column, _)| *column));
        out.write_record(&header)?;
        let windows = self
            .series()
            .map(|(name, s)| s.window(coverage).map_err(in_series(name)));
        let mut cells = Vec::with_capacity(windows.len());
        for w in windows {
            cells.push(w?);
        }
        for row in 0..coverage.len() {
            let mut record = vec![coverage.start.offset(row as i64).to_string()];
            record.extend(cells.iter().map(|s| format!("{:?}", s.values()[row])));
            out.write_record(&record)?;
        }
        out.flush().map_err(|source| IngestError::Io {
            path: "<writer>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Loads one country's CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema, country: &str) -> Result<MacroDataset, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema, country)
}

/// Parses CSV from any reader. Rows may appear in any order; they are sorted
/// by quarter and must then be contiguous.
pub fn read_csv<R: Read>(reader: R, schema: &ColumnSchema, country: &str) -> Result<MacroDataset, IngestError> {
    let mut csv_reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let find = |role: &'static str, column: &str| {
        headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| IngestError::Schema {
                role,
                column: column.to_string(),
            })
    };
    let date_col = find("date", &schema.date)?;
    let columns = schema.value_columns();
    let mut indices = Vec::with_capacity(columns.len());
    for (role, column, _) in &columns {
        indices.push(find(role, column)?);
    }

    let mut rows: Vec<(Quarter, Vec<f64>)> = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |idx: usize| record.get(idx).unwrap_or("");
        let date = cell(date_col);
        let quarter: Quarter = date.parse().map_err(|_| IngestError::Parse {
            line,
            column: schema.date.clone(),
            value: date.to_string(),
        })?;
        let mut values = Vec::with_capacity(indices.len());
        for (&idx, (_, column, _)) in indices.iter().zip(&columns) {
            let raw = cell(idx);
            let value: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| IngestError::Parse {
                    line,
                    column: column.to_string(),
                    value: raw.to_string(),
                })?;
            values.push(value);
        }
        rows.push((quarter, values));
    }
    if rows.is_empty() {
        return Err(IngestError::NoRows);
    }
    rows.sort_by_key(|(q, _)| *q);
    for pair in rows.windows(2) {
        let (prev, next) = (pair[0].0, pair[1].0);
        if prev == next {
            return Err(IngestError::Duplicate(prev));
        }
        if prev.next() != next {
            return Err(IngestError::Gap {
                after: prev,
                missing: prev.next(),
            });
        }
    }

    let start = rows[0].0;
    let build = |slot: usize| {
        let (name, _, unit) = columns[slot];
        let values = rows.iter().map(|(_, v)| v[slot]).collect();
        QuarterlySeries::new(start, values, unit).map_err(in_series(name))
    };
    Ok(MacroDataset {
        country: country.to_string(),
        total_expenditure: build(0)?,
        subsidies: build(1)?,
        vat: build(2)?,
        gdp: build(3)?,
        cpi: build(4)?,
        short_rate: build(5)?,
        us_gdp: build(6)?,
        us_inflation: build(7)?,
        us_short_rate: build(8)?,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PanelError {
    #[error("panel shape error: {0}")]
    Shape(String),
    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },
    #[error("unknown or duplicated variable label `{0}`")]
    Label(String),
}

/// Endogenous matrix `X` (rows are quarters) plus exogenous controls `Z` on
/// the same quarterly index.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPanel {
    start: Quarter,
    labels: Vec<String>,
    x: DMatrix<f64>,
    exog_labels: Vec<String>,
    z: DMatrix<f64>,
}

impl TransformedPanel {
    pub fn new(
        start: Quarter,
        labels: Vec<String>,
        x: DMatrix<f64>,
        exog_labels: Vec<String>,
        z: DMatrix<f64>,
    ) -> Result<Self, PanelError> {
        if labels.len() != x.ncols() || exog_labels.len() != z.ncols() {
            return Err(PanelError::Shape(format!(
                "{} labels for {} endogenous columns, {} labels for {} exogenous columns",
                labels.len(),
                x.ncols(),
                exog_labels.len(),
                z.ncols()
            )));
        }
        if x.nrows() != z.nrows() {
            return Err(PanelError::Shape(format!(
                "endogenous rows {} != exogenous rows {}",
                x.nrows(),
                z.nrows()
            )));
        }
        for (m, names) in [(&x, &labels), (&z, &exog_labels)] {
            for (column, name) in m.column_iter().zip(names.iter()) {
                if let Some(row) = column.iter().position(|v| !v.is_finite()) {
                    return Err(PanelError::NonFinite {
                        row,
                        column: name.clone(),
                    });
                }
            }
        }
        Ok(Self {
            start,
            labels,
            x,
            exog_labels,
            z,
        })
    }

    pub fn start(&self) -> Quarter {
        self.start
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_endogenous(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_exogenous(&self) -> usize {
        self.z.ncols()
    }

    pub fn quarters(&self) -> impl Iterator<Item = Quarter> + '_ {
        (0..self.rows()).map(|i| self.start.offset(i as i64))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn exog_labels(&self) -> &[String] {
        &self.exog_labels
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Same index and controls, new endogenous values.
    pub fn with_endogenous(&self, x: DMatrix<f64>) -> Result<Self, PanelError> {
        Self::new(
            self.start,
            self.labels.clone(),
            x,
            self.exog_labels.clone(),
            self.z.clone(),
        )
    }

    /// Permutes the endogenous columns into `ordering`.
    pub fn reorder<S: AsRef<str>>(&self, ordering: &[S]) -> Result<Self, PanelError> {
        if ordering.len() != self.labels.len() {
            return Err(PanelError::Shape(format!(
                "ordering has {} labels, panel has {}",
                ordering.len(),
                self.labels.len()
            )));
        }
        let mut source = Vec::with_capacity(ordering.len());
        for label in ordering {
            let label = label.as_ref();
            let idx = self
                .index_of(label)
                .filter(|i| !source.contains(i))
                .ok_or_else(|| PanelError::Label(label.to_string()))?;
            source.push(idx);
        }
        let x = DMatrix::from_fn(self.rows(), source.len(), |r, c| self.x[(r, source[c])]);
        let labels = source.iter().map(|&i| self.labels[i].clone()).collect();
        Self::new(self.start, labels, x, self.exog_labels.clone(), self.z.clone())
    }

    /// Quarters where the output growth column exceeds the sanity threshold.
    pub fn growth_outliers(&self) -> Vec<Quarter> {
        let Some(y) = self.index_of("Y") else {
            return Vec::new();
        };
        self.x
            .column(y)
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() >= GROWTH_WARNING_THRESHOLD)
            .map(|(i, _)| self.start.offset(i as i64))
            .collect()
    }
}

/// How the domestic short rate enters the VAR.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateTransform {
    #[default]
    Difference,
    Level,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PanelOptions {
    pub rate_transform: RateTransform,
}

/// Builds the panel with the default options.
pub fn build_panel(data: &MacroDataset, window: QuarterRange) -> Result<TransformedPanel, IngestError> {
    build_panel_with(data, window, &PanelOptions::default())
}

/// Builds `[G, T, Y, i]` and the US controls over `window`. The result has
/// `window.len() - 1` rows starting one quarter after `window.start`.
pub fn build_panel_with(
    data: &MacroDataset,
    window: QuarterRange,
    options: &PanelOptions,
) -> Result<TransformedPanel, IngestError> {
    let cut = |name: &'static str, s: &QuarterlySeries| s.window(window).map_err(in_series(name));
    let total = cut("total_expenditure", &data.total_expenditure)?;
    let subsidies = cut("subsidies", &data.subsidies)?;
    let vat = cut("vat", &data.vat)?;
    let gdp = cut("gdp", &data.gdp)?;
    let cpi = cut("cpi", &data.cpi)?;
    let short_rate = cut("short_rate", &data.short_rate)?;
    let us_gdp = cut("us_gdp", &data.us_gdp)?;
    let us_inflation = cut("us_inflation", &data.us_inflation)?;
    let us_short_rate = cut("us_short_rate", &data.us_short_rate)?;

    let real_gdp = deflate(&gdp, &cpi).map_err(in_series("cpi"))?;
    let net = net_expenditure(&total, &subsidies).map_err(in_series("subsidies"))?;
    let real_net = deflate(&net, &cpi).map_err(in_series("cpi"))?;
    let real_vat = deflate(&vat, &cpi).map_err(in_series("cpi"))?;

    let g = hall_transform(&real_net, &real_gdp).map_err(in_series("gdp"))?;
    let t = hall_transform(&real_vat, &real_gdp).map_err(in_series("gdp"))?;
    let y = hall_transform(&real_gdp, &real_gdp).map_err(in_series("gdp"))?;
    let i = match options.rate_transform {
        RateTransform::Difference => first_difference(&short_rate).map_err(in_series("short_rate"))?,
        RateTransform::Level => drop_first(&short_rate).map_err(in_series("short_rate"))?,
    };

    let us_growth = hall_transform(&us_gdp, &us_gdp).map_err(in_series("us_gdp"))?;
    let us_infl = drop_first(&us_inflation).map_err(in_series("us_inflation"))?;
    let us_rate = first_difference(&us_short_rate).map_err(in_series("us_short_rate"))?;

    let endogenous = [&g, &t, &y, &i];
    let exogenous = [&us_growth, &us_infl, &us_rate];
    let rows = g.len();
    let x = DMatrix::from_fn(rows, endogenous.len(), |r, c| endogenous[c].values()[r]);
    let z = DMatrix::from_fn(rows, exogenous.len(), |r, c| exogenous[c].values()[r]);
    let panel = TransformedPanel::new(
        g.start(),
        ENDOGENOUS_LABELS.iter().map(|s| s.to_string()).collect(),
        x,
        EXOGENOUS_LABELS.iter().map(|s| s.to_string()).collect(),
        z,
    )?;
    let outliers = panel.growth_outliers();
    if !outliers.is_empty() {
        log::warn!(
            "{}: output growth magnitude >= {} in {} quarter(s), first at {}",
            data.country,
            GROWTH_WARNING_THRESHOLD,
            outliers.len(),
            outliers[0]
        );
    }
    Ok(panel)
}

fn drop_first(s: &QuarterlySeries) -> Result<QuarterlySeries, SeriesError> {
    if s.len() < 2 {
        return Err(SeriesError::InsufficientData {
            needed: 2,
            got: s.len(),
        });
    }
    QuarterlySeries::new(s.start().next(), s.values()[1..].to_vec(), s.unit())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "date,total_expenditure,subsidies,vat,gdp,cpi,short_rate,us_gdp,us_inflation,us_short_rate";

    fn csv_text(quarters: &[&str]) -> String {
        let mut text = String::from(HEADER);
        for (n, q) in quarters.iter().enumerate() {
            let n = n as f64;
            text.push_str(&format!(
                "\n{q},{},{},{},{},{},{},{},{},{}",
                50.0 + n,
                5.0 + 0.1 * n,
                20.0 + 0.3 * n,
                200.0 + 2.0 * n + (n * 0.7).sin(),
                1.0 + 0.01 * n,
                3.0 + (n * 0.3).cos(),
                1000.0 + 5.0 * n + (n * 1.3).sin(),
                2.0 + (n * 0.9).sin(),
                1.5 + (n * 0.4).sin()
            ));
        }
        text
    }

    fn quarters(start: &str, n: usize) -> Vec<String> {
        let start: Quarter = start.parse().unwrap();
        (0..n).map(|i| start.offset(i as i64).to_string()).collect()
    }

    fn dataset(n: usize) -> MacroDataset {
        let qs = quarters("1999-Q1", n);
        let refs: Vec<&str> = qs.iter().map(String::as_str).collect();
        read_csv(csv_text(&refs).as_bytes(), &ColumnSchema::default(), "XX").unwrap()
    }

    #[test]
    fn loads_default_window() {
        let data = dataset(84);
        assert_eq!(data.gdp.len(), 84);
        assert_eq!(data.coverage(), QuarterRange::default());
        assert_eq!(data.cpi.unit(), Unit::Index);
        assert_eq!(data.short_rate.unit(), Unit::RatePercent);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let text = csv_text(&["1999-Q1", "1999-Q2"]).replace("subsidies", "subsidy");
        let err = read_csv(text.as_bytes(), &ColumnSchema::default(), "XX").unwrap_err();
        match err {
            IngestError::Schema { column, role } => {
                assert_eq!(column, "subsidies");
                assert_eq!(role, "subsidies");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gap_names_missing_quarter() {
        let text = csv_text(&["2005-Q1", "2005-Q2", "2005-Q4"]);
        let err = read_csv(text.as_bytes(), &ColumnSchema::default(), "XX").unwrap_err();
        assert!(err.to_string().contains("2005-Q3"), "{err}");
        assert!(matches!(err, IngestError::Gap { .. }));
    }

    #[test]
    fn non_numeric_cell_is_parse_error() {
        let text = csv_text(&["2005-Q1", "2005-Q2"]).replacen("2005-Q2,51", "2005-Q2,n/a", 1);
        let err = read_csv(text.as_bytes(), &ColumnSchema::default(), "XX").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn bad_date_and_duplicates() {
        let text = csv_text(&["2005Q1"]);
        assert!(matches!(
            read_csv(text.as_bytes(), &ColumnSchema::default(), "XX"),
            Err(IngestError::Parse { .. })
        ));
        let text = csv_text(&["2005-Q1", "2005-Q1"]);
        assert!(matches!(
            read_csv(text.as_bytes(), &ColumnSchema::default(), "XX"),
            Err(IngestError::Duplicate(_))
        ));
        assert!(matches!(
            read_csv(HEADER.as_bytes(), &ColumnSchema::default(), "XX"),
            Err(IngestError::NoRows)
        ));
    }

    #[test]
    fn custom_schema_maps_columns() {
        let text = csv_text(&["2001-Q1", "2001-Q2"]).replace("vat", "VAT receipts");
        let schema = ColumnSchema {
            vat: "VAT receipts".into(),
            ..ColumnSchema::default()
        };
        let data = read_csv(text.as_bytes(), &schema, "XX").unwrap();
        assert_eq!(data.vat.values(), &[20.0, 20.3]);
    }

    #[test]
    fn panel_has_window_minus_one_rows() {
        let data = dataset(84);
        let panel = build_panel(&data, QuarterRange::default()).unwrap();
        assert_eq!(panel.rows(), 83);
        assert_eq!(panel.start().to_string(), "1999-Q2");
        assert_eq!(panel.labels(), &ENDOGENOUS_LABELS);
        assert_eq!(panel.n_exogenous(), 3);
        assert!(panel.growth_outliers().is_empty());
    }

    #[test]
    fn panel_columns_follow_transforms() {
        let data = dataset(12);
        let window = data.coverage();
        let panel = build_panel(&data, window).unwrap();
        let r = 4;
        let t = r + 1;
        let (tot, sub, vat, gdp, cpi) = (
            data.total_expenditure.values(),
            data.subsidies.values(),
            data.vat.values(),
            data.gdp.values(),
            data.cpi.values(),
        );
        let real = |x: &[f64], i: usize| x[i] / cpi[i];
        let net = |i: usize| (tot[i] - sub[i]) / cpi[i];
        let y_lag = real(gdp, t - 1);
        let x = panel.x();
        assert!((x[(r, 0)] - (net(t) - net(t - 1)) / y_lag).abs() < 1e-15);
        assert!((x[(r, 1)] - (real(vat, t) - real(vat, t - 1)) / y_lag).abs() < 1e-15);
        assert!((x[(r, 2)] - (real(gdp, t) - y_lag) / y_lag).abs() < 1e-15);
        let rate = data.short_rate.values();
        assert_eq!(x[(r, 3)], rate[t] - rate[t - 1]);
        let z = panel.z();
        let us = data.us_gdp.values();
        assert_eq!(z[(r, 0)], (us[t] - us[t - 1]) / us[t - 1]);
        assert_eq!(z[(r, 1)], data.us_inflation.values()[t]);

        let level = build_panel_with(
            &data,
            window,
            &PanelOptions {
                rate_transform: RateTransform::Level,
            },
        )
        .unwrap();
        assert_eq!(level.x()[(r, 3)], rate[t]);
    }

    #[test]
    fn constant_levels_give_zero_panel() {
        let mut data = dataset(10);
        let flat = |s: &QuarterlySeries, v: f64| QuarterlySeries::new(s.start(), vec![v; s.len()], s.unit()).unwrap();
        data.total_expenditure = flat(&data.total_expenditure, 50.0);
        data.subsidies = flat(&data.subsidies, 5.0);
        data.vat = flat(&data.vat, 20.0);
        data.gdp = flat(&data.gdp, 200.0);
        data.cpi = flat(&data.cpi, 1.3);
        data.short_rate = flat(&data.short_rate, 2.0);
        let panel = build_panel(&data, data.coverage()).unwrap();
        assert!(panel.x().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cpi_rescaling_leaves_panel_unchanged() {
        let data = dataset(40);
        let base = build_panel(&data, data.coverage()).unwrap();
        let rescale = |factor: f64| {
            let mut scaled = data.clone();
            let values = data.cpi.values().iter().map(|v| v * factor).collect();
            scaled.cpi = QuarterlySeries::new(data.cpi.start(), values, Unit::Index).unwrap();
            build_panel(&scaled, data.coverage()).unwrap()
        };
        // Power-of-two factors commute exactly with IEEE division.
        assert_eq!(rescale(4.0), base);
        let by_100 = rescale(100.0);
        // Differencing amplifies last-bit noise, so compare against the column scale.
        let scale = base.x().amax();
        assert!((by_100.x() - base.x()).amax() <= 1e-12 * scale);
    }

    #[test]
    fn window_beyond_coverage() {
        let data = dataset(20);
        let window = QuarterRange::new("1998-Q4".parse().unwrap(), "2000-Q4".parse().unwrap());
        let err = build_panel(&data, window).unwrap_err();
        assert!(matches!(
            err,
            IngestError::Series {
                source: SeriesError::Coverage { .. },
                ..
            }
        ));
    }

    #[test]
    fn nonpositive_gdp_is_domain_error() {
        let mut data = dataset(8);
        let mut gdp = data.gdp.values().to_vec();
        gdp[3] = 0.0;
        data.gdp = QuarterlySeries::new(data.gdp.start(), gdp, Unit::LevelCurrency).unwrap();
        let err = build_panel(&data, data.coverage()).unwrap_err();
        assert!(matches!(
            err,
            IngestError::Series {
                source: SeriesError::Domain { .. },
                ..
            }
        ));
    }

    #[test]
    fn reorder_permutes_columns() {
        let data = dataset(12);
        let panel = build_panel(&data, data.coverage()).unwrap();
        let swapped = panel.reorder(&["Y", "T", "G", "i"]).unwrap();
        assert_eq!(swapped.labels()[0], "Y");
        assert_eq!(swapped.x().column(0), panel.x().column(2));
        assert!(panel.reorder(&["G", "G", "Y", "i"]).is_err());
        assert!(panel.reorder(&["G", "T", "Y"]).is_err());
    }

    #[test]
    fn write_then_read_round_trips() {
        let data = dataset(16);
        let mut buf = Vec::new();
        data.write_csv(&mut buf, &ColumnSchema::default()).unwrap();
        let back = read_csv(buf.as_slice(), &ColumnSchema::default(), "XX").unwrap();
        assert_eq!(back, data);
    }
}
