//! Monthly economic series: CSV ingestion, indexing to a base month, and
//! calibration of the drop-and-linear-recovery template.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::calendar::Month;
use crate::error::{Error, Result};

/// Monthly series divided by its value in `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedSeries {
    pub base: Month,
    pub months: Vec<Month>,
    pub values: Vec<f64>,
}

impl IndexedSeries {
    /// Index raw monthly observations to `base`.
    pub fn new(months: Vec<Month>, raw: Vec<f64>, base: Month) -> Result<Self> {
        assert_eq!(months.len(), raw.len());
        if months.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data {
                path: String::new(),
                row: 0,
                message: "months are not strictly increasing".into(),
            });
        }
        let pos = months
            .iter()
            .position(|&m| m == base)
            .ok_or(Error::MissingBaseMonth(base))?;
        let scale = raw[pos];
        let values = raw.iter().map(|v| v / scale).collect();
        Ok(IndexedSeries { base, months, values })
    }

    pub fn get(&self, month: Month) -> Option<f64> {
        self.months
            .iter()
            .position(|&m| m == month)
            .map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn parse_date(text: &str) -> Option<NaiveDate> {
    let text = text.trim();
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .or_else(|| NaiveDate::parse_from_str(&format!("{text}-01"), "%Y-%m-%d").ok())
}

/// Parse a `date,value` CSV, keep the last observation of each month and index
/// the result to `base`. `label` names the source in error messages.
pub fn parse_csv<R: Read>(reader: R, base: Month, label: &str) -> Result<IndexedSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let data_err = |row: usize, message: String| Error::Data {
        path: label.to_string(),
        row,
        message,
    };
    let headers = rdr.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "value" {
        return Err(data_err(1, format!("expected header `date,value`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut last: Option<NaiveDate> = None;
    let mut monthly: BTreeMap<Month, f64> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        // Header is row 1.
        let row = i + 2;
        let rec = rec.map_err(|e| data_err(row, e.to_string()))?;
        if rec.len() != 2 {
            return Err(data_err(row, format!("expected 2 fields, got {}", rec.len())));
        }
        let date = parse_date(&rec[0])
            .ok_or_else(|| data_err(row, format!("unparseable date `{}`", &rec[0])))?;
        let value: f64 = rec[1]
            .parse()
            .map_err(|_| data_err(row, format!("non-numeric value `{}`", &rec[1])))?;
        if !value.is_finite() {
            return Err(data_err(row, format!("non-finite value `{}`", &rec[1])));
        }
        if let Some(prev) = last {
            if date <= prev {
                return Err(data_err(row, format!("date {date} does not follow {prev}")));
            }
        }
        last = Some(date);
        monthly.insert(Month::new(date.year(), date.month()), value);
    }
    let (months, raw): (Vec<Month>, Vec<f64>) = monthly.into_iter().unzip();
    IndexedSeries::new(months, raw, base)
}

/// Read a `date,value` CSV file; see [`parse_csv`].
pub fn ingest_csv(path: impl AsRef<Path>, base: Month) -> Result<IndexedSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, base, &path.display().to_string())
}

/// Least-squares fit of `1 - m * max(0, 1 - k / R)` to the months following the trough.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampFit {
    pub magnitude: f64,
    pub recovery_months: u32,
    pub rss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// `1 - min` over the months after the base month.
    pub magnitude: f64,
    pub trough: Month,
    /// Months from the trough to the first value back within 1% of the base level.
    pub recovery_months: u32,
    /// The series never came back within 1%; `recovery_months` runs to its end.
    pub censored: bool,
    pub fit: RampFit,
}

/// Tolerance of "back at the base level".
pub const RECOVERY_TOLERANCE: f64 = 0.01;
/// Longest recovery the ramp fit considers.
const MAX_FIT_MONTHS: u32 = 36;

/// Fit the drop-and-linear-recovery template to a series indexed to its base month.
pub fn calibrate_template(series: &IndexedSeries) -> Result<Calibration> {
    let start = series
        .months
        .iter()
        .position(|&m| m > series.base)
        .ok_or_else(|| Error::Data {
            path: String::new(),
            row: 0,
            message: "no observation after the base month".into(),
        })?;
    let after = &series.values[start..];
    let (rel, min) = after
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let t0 = start + rel;
    let tail = &series.values[t0..];
    let back = tail.iter().position(|&v| v >= 1.0 - RECOVERY_TOLERANCE);
    let (recovery_months, censored) = match back {
        Some(k) => (k as u32, false),
        None => (tail.len() as u32 - 1, true),
    };

    let window = &tail[..tail.len().min(MAX_FIT_MONTHS as usize + 1)];
    let mut best = RampFit {
        magnitude: 1.0 - min,
        recovery_months: 1,
        rss: f64::INFINITY,
    };
    for r in 1..=MAX_FIT_MONTHS {
        let shape: Vec<f64> = (0..window.len())
            .map(|k| (1.0 - k as f64 / f64::from(r)).max(0.0))
            .collect();
        let num: f64 = window.iter().zip(&shape).map(|(v, h)| (1.0 - v) * h).sum();
        let den: f64 = shape.iter().map(|h| h * h).sum();
        let m = num / den;
        let rss: f64 = window
            .iter()
            .zip(&shape)
            .map(|(v, h)| (v - (1.0 - m * h)).powi(2))
            .sum();
        if rss < best.rss {
            best = RampFit {
                magnitude: m,
                recovery_months: r,
                rss,
            };
        }
    }
    Ok(Calibration {
        magnitude: 1.0 - min,
        trough: series.months[t0],
        recovery_months,
        censored,
        fit: best,
    })
}
