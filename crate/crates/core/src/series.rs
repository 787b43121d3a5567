//! Quarterly time series and the level-to-ratio transforms applied before estimation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series must contain at least one observation")]
    Empty,
    #[error("series are not aligned: {left} vs {right}")]
    Alignment { left: String, right: String },
    #[error("unit mismatch: expected {expected}, found {found}")]
    Unit { expected: Unit, found: Unit },
    #[error("domain error at {quarter}: {reason} (value {value})")]
    Domain {
        quarter: Quarter,
        value: f64,
        reason: &'static str,
    },
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("range {start}..={end} is not covered by series spanning {have_start}..={have_end}")]
    Coverage {
        start: Quarter,
        end: Quarter,
        have_start: Quarter,
        have_end: Quarter,
    },
    #[error("invalid quarter `{0}`: expected YYYY-Qn")]
    QuarterParse(String),
}

/// A calendar quarter, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    year: i32,
    quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Result<Self, SeriesError> {
        if !(1..=4).contains(&quarter) {
            return Err(SeriesError::QuarterParse(format!("{year}-Q{quarter}")));
        }
        Ok(Self { year, quarter })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn quarter(self) -> u8 {
        self.quarter
    }

    /// Absolute quarter count, used for arithmetic.
    fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(4) as i32,
            quarter: (ordinal.rem_euclid(4) + 1) as u8,
        }
    }

    pub fn offset(self, quarters: i64) -> Self {
        Self::from_ordinal(self.ordinal() + quarters)
    }

    pub fn next(self) -> Self {
        self.offset(1)
    }

    /// Signed number of quarters from `self` to `later`.
    pub fn quarters_until(self, later: Quarter) -> i64 {
        later.ordinal() - self.ordinal()
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-Q{}", self.year, self.quarter)
    }
}

impl FromStr for Quarter {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SeriesError::QuarterParse(s.to_string());
        let (year, quarter) = s.trim().split_once("-Q").ok_or_else(bad)?;
        let year: i32 = year.parse().map_err(|_| bad())?;
        let quarter: u8 = quarter.parse().map_err(|_| bad())?;
        if year < 0 || !(1..=4).contains(&quarter) {
            return Err(bad());
        }
        Quarter::new(year, quarter)
    }
}

impl Serialize for Quarter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive range of quarters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarterRange {
    pub start: Quarter,
    pub end: Quarter,
}

impl QuarterRange {
    pub fn new(start: Quarter, end: Quarter) -> Self {
        Self { start, end }
    }

    pub fn is_well_formed(&self) -> bool {
        self.start <= self.end
    }

    pub fn len(&self) -> usize {
        (self.start.quarters_until(self.end) + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for QuarterRange {
    /// 1999Q1 through 2019Q4.
    fn default() -> Self {
        Self {
            start: Quarter { year: 1999, quarter: 1 },
            end: Quarter { year: 2019, quarter: 4 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    LevelCurrency,
    RatePercent,
    Index,
    /// Unit-free ratio, e.g. a change scaled by lagged output.
    Ratio,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Unit::LevelCurrency => "level-currency",
            Unit::RatePercent => "rate-percent",
            Unit::Index => "index",
            Unit::Ratio => "ratio",
        };
        f.write_str(name)
    }
}

/// Contiguous quarterly observations. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarterlySeries {
    start: Quarter,
    values: Vec<f64>,
    unit: Unit,
}

impl QuarterlySeries {
    pub fn new(start: Quarter, values: Vec<f64>, unit: Unit) -> Result<Self, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        Ok(Self { start, values, unit })
    }

    pub fn start(&self) -> Quarter {
        self.start
    }

    pub fn end(&self) -> Quarter {
        self.start.offset(self.values.len() as i64 - 1)
    }

    pub fn range(&self) -> QuarterRange {
        QuarterRange::new(self.start, self.end())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn quarter_at(&self, index: usize) -> Quarter {
        self.start.offset(index as i64)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Quarter, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.quarter_at(i), v))
    }

    /// Restricts the series to `range`, which must lie inside its coverage.
    pub fn window(&self, range: QuarterRange) -> Result<QuarterlySeries, SeriesError> {
        let coverage = SeriesError::Coverage {
            start: range.start,
            end: range.end,
            have_start: self.start,
            have_end: self.end(),
        };
        if !range.is_well_formed() || range.start < self.start || range.end > self.end() {
            return Err(coverage);
        }
        let from = self.start.quarters_until(range.start) as usize;
        let to = from + range.len();
        QuarterlySeries::new(range.start, self.values[from..to].to_vec(), self.unit)
    }

    fn describe(&self) -> String {
        format!("{}..={} ({} obs)", self.start, self.end(), self.len())
    }
}

fn check_aligned(a: &QuarterlySeries, b: &QuarterlySeries) -> Result<(), SeriesError> {
    if a.start != b.start || a.len() != b.len() {
        return Err(SeriesError::Alignment {
            left: a.describe(),
            right: b.describe(),
        });
    }
    Ok(())
}

fn check_unit(series: &QuarterlySeries, expected: Unit) -> Result<(), SeriesError> {
    if series.unit != expected {
        return Err(SeriesError::Unit {
            expected,
            found: series.unit,
        });
    }
    Ok(())
}

fn check_positive(series: &QuarterlySeries, reason: &'static str) -> Result<(), SeriesError> {
    match series.iter().find(|(_, v)| v.is_nan() || *v <= 0.0) {
        Some((quarter, value)) => Err(SeriesError::Domain { quarter, value, reason }),
        None => Ok(()),
    }
}

/// Government expenditure net of subsidies.
pub fn net_expenditure(
    total_expenditure: &QuarterlySeries,
    subsidies: &QuarterlySeries,
) -> Result<QuarterlySeries, SeriesError> {
    check_unit(total_expenditure, Unit::LevelCurrency)?;
    check_unit(subsidies, Unit::LevelCurrency)?;
    check_aligned(total_expenditure, subsidies)?;
    let values = total_expenditure
        .values
        .iter()
        .zip(&subsidies.values)
        .map(|(t, s)| t - s)
        .collect();
    QuarterlySeries::new(total_expenditure.start, values, Unit::LevelCurrency)
}

/// Converts a nominal series to real terms by dividing by a price index.
pub fn deflate(nominal: &QuarterlySeries, cpi: &QuarterlySeries) -> Result<QuarterlySeries, SeriesError> {
    check_aligned(nominal, cpi)?;
    check_positive(cpi, "price index must be strictly positive")?;
    let values = nominal.values.iter().zip(&cpi.values).map(|(x, p)| x / p).collect();
    QuarterlySeries::new(nominal.start, values, nominal.unit)
}

/// `(x_t - x_{t-1}) / y_{t-1}`: the change in `x` in units of lagged output.
///
/// The result starts one quarter after the inputs and is one observation shorter.
pub fn hall_transform(x_level: &QuarterlySeries, y_level: &QuarterlySeries) -> Result<QuarterlySeries, SeriesError> {
    check_aligned(x_level, y_level)?;
    if x_level.len() < 2 {
        return Err(SeriesError::InsufficientData {
            needed: 2,
            got: x_level.len(),
        });
    }
    check_positive(y_level, "output level must be strictly positive")?;
    let x = &x_level.values;
    let y = &y_level.values;
    let values = (1..x.len()).map(|t| (x[t] - x[t - 1]) / y[t - 1]).collect();
    QuarterlySeries::new(x_level.start.next(), values, Unit::Ratio)
}

pub fn first_difference(x: &QuarterlySeries) -> Result<QuarterlySeries, SeriesError> {
    if x.len() < 2 {
        return Err(SeriesError::InsufficientData {
            needed: 2,
            got: x.len(),
        });
    }
    let values = x.values.windows(2).map(|w| w[1] - w[0]).collect();
    QuarterlySeries::new(x.start.next(), values, x.unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Quarter {
        s.parse().unwrap()
    }

    fn level(values: &[f64]) -> QuarterlySeries {
        QuarterlySeries::new(q("1999-Q1"), values.to_vec(), Unit::LevelCurrency).unwrap()
    }

    fn index(values: &[f64]) -> QuarterlySeries {
        QuarterlySeries::new(q("1999-Q1"), values.to_vec(), Unit::Index).unwrap()
    }

    #[test]
    fn quarter_parse_and_arithmetic() {
        assert_eq!(q("1999-Q4").next(), q("2000-Q1"));
        assert_eq!(q("2000-Q1").offset(-1), q("1999-Q4"));
        assert_eq!(q("1999-Q1").quarters_until(q("2019-Q4")), 83);
        assert_eq!(q("2005-Q3").to_string(), "2005-Q3");
        assert!("2005-Q5".parse::<Quarter>().is_err());
        assert!("2005Q1".parse::<Quarter>().is_err());
        assert!("abcd-Q1".parse::<Quarter>().is_err());
        assert_eq!(QuarterRange::default().len(), 84);
    }

    #[test]
    fn empty_series_rejected() {
        assert_eq!(
            QuarterlySeries::new(q("1999-Q1"), vec![], Unit::Index),
            Err(SeriesError::Empty)
        );
    }

    #[test]
    fn net_expenditure_subtracts() {
        let net = net_expenditure(&level(&[50.0, 52.0]), &level(&[5.0, 6.0])).unwrap();
        assert_eq!(net.values(), &[45.0, 46.0]);
        assert_eq!(net.unit(), Unit::LevelCurrency);

        let total = level(&[3.0, 1.5, 9.0]);
        let zero = level(&[0.0, 0.0, 0.0]);
        assert_eq!(net_expenditure(&total, &zero).unwrap(), total);
    }

    #[test]
    fn net_expenditure_alignment_and_units() {
        let total = level(&[1.0; 8]);
        let subsidies = level(&[1.0; 7]);
        assert!(matches!(
            net_expenditure(&total, &subsidies),
            Err(SeriesError::Alignment { .. })
        ));
        let shifted = QuarterlySeries::new(q("1999-Q2"), vec![1.0; 8], Unit::LevelCurrency).unwrap();
        assert!(matches!(
            net_expenditure(&total, &shifted),
            Err(SeriesError::Alignment { .. })
        ));
        assert!(matches!(
            net_expenditure(&total, &index(&[1.0; 8])),
            Err(SeriesError::Unit { .. })
        ));
    }

    #[test]
    fn deflate_divides_by_cpi() {
        let real = deflate(&level(&[110.0]), &index(&[1.10])).unwrap();
        assert!((real.values()[0] - 100.0).abs() < 1e-12);

        let nominal = level(&[4.0, 5.0, 6.5]);
        assert_eq!(deflate(&nominal, &index(&[1.0, 1.0, 1.0])).unwrap(), nominal);

        let err = deflate(&level(&[1.0, 2.0]), &index(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, SeriesError::Domain { quarter, .. } if quarter == q("1999-Q2")));
        assert!(matches!(
            deflate(&level(&[1.0, 2.0]), &index(&[1.0])),
            Err(SeriesError::Alignment { .. })
        ));
    }

    #[test]
    fn hall_transform_hand_values() {
        let out = hall_transform(&level(&[100.0, 102.0, 105.0]), &level(&[200.0, 210.0, 220.0])).unwrap();
        assert_eq!(out.start(), q("1999-Q2"));
        assert_eq!(out.len(), 2);
        assert!((out.values()[0] - 0.01).abs() < 1e-15);
        assert!((out.values()[1] - 3.0 / 210.0).abs() < 1e-15);
        assert_eq!(out.unit(), Unit::Ratio);
    }

    #[test]
    fn hall_transform_constant_and_self() {
        let y = level(&[200.0, 210.0, 220.0, 215.0]);
        let flat = hall_transform(&level(&[7.0; 4]), &y).unwrap();
        assert!(flat.values().iter().all(|&v| v == 0.0));

        let growth = hall_transform(&y, &y).unwrap();
        let expected = [10.0 / 200.0, 10.0 / 210.0, -5.0 / 220.0];
        for (g, e) in growth.values().iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn hall_transform_errors() {
        assert!(matches!(
            hall_transform(&level(&[1.0]), &level(&[1.0])),
            Err(SeriesError::InsufficientData { needed: 2, got: 1 })
        ));
        assert!(matches!(
            hall_transform(&level(&[1.0, 2.0]), &level(&[-1.0, 2.0])),
            Err(SeriesError::Domain { .. })
        ));
    }

    #[test]
    fn first_difference_values() {
        let rate = QuarterlySeries::new(q("1999-Q1"), vec![3.0, 3.5, 3.25], Unit::RatePercent).unwrap();
        let d = first_difference(&rate).unwrap();
        assert_eq!(d.values(), &[0.5, -0.25]);
        assert_eq!(d.unit(), Unit::RatePercent);
        assert_eq!(d.start(), q("1999-Q2"));

        let flat = first_difference(&level(&[2.0; 5])).unwrap();
        assert!(flat.values().iter().all(|&v| v == 0.0));

        assert!(matches!(
            first_difference(&level(&[1.0])),
            Err(SeriesError::InsufficientData { .. })
        ));
    }

    #[test]
    fn window_slices_and_checks_coverage() {
        let s = level(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let w = s.window(QuarterRange::new(q("1999-Q2"), q("1999-Q4"))).unwrap();
        assert_eq!(w.values(), &[2.0, 3.0, 4.0]);
        assert_eq!(w.start(), q("1999-Q2"));
        assert!(matches!(
            s.window(QuarterRange::new(q("1999-Q2"), q("2000-Q2"))),
            Err(SeriesError::Coverage { .. })
        ));
    }
}
