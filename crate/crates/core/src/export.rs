//! Run output as CSV (one row per month) or as a JSON document carrying the
//! configuration, its hash, the seed and the code version.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calendar::Month;
use crate::econ::{Event, MonthRecord};
use crate::error::{Error, Result};
use crate::runner::{RunMetrics, RunOutput};
use crate::scenario::ScenarioConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Doc,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "doc" | "json" => Ok(Format::Doc),
            _ => Err(Error::config("format", format!("expected csv or doc, got `{s}`"))),
        }
    }
}

/// Header row: `month` followed by [`MonthRecord::SERIES`].
pub fn csv_header() -> Vec<&'static str> {
    std::iter::once("month").chain(MonthRecord::SERIES).collect()
}

/// Write one row per record. Floats use the shortest representation that
/// parses back to the same bits.
pub fn write_csv<W: Write>(records: &[MonthRecord], writer: W) -> Result<()> {
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header()).map_err(ser)?;
    for r in records {
        let mut row = vec![r.month.to_string()];
        row.extend(r.values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}

/// Inverse of [`write_csv`].
pub fn read_csv<R: Read>(reader: R, label: &str) -> Result<Vec<MonthRecord>> {
    let data_err = |row: usize, message: String| Error::Data {
        path: label.to_string(),
        row,
        message,
    };
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    if headers.iter().ne(csv_header()) {
        return Err(data_err(1, "header does not match the series schema".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| data_err(row, e.to_string()))?;
        let month: Month = rec[0].parse().map_err(|_| data_err(row, format!("bad month `{}`", &rec[0])))?;
        let mut values = [0.0; MonthRecord::SERIES.len()];
        for (j, v) in values.iter_mut().enumerate() {
            let text = &rec[j + 1];
            *v = text
                .parse()
                .map_err(|_| data_err(row, format!("bad number `{text}` in `{}`", MonthRecord::SERIES[j])))?;
        }
        out.push(MonthRecord::from_values(month, values));
    }
    Ok(out)
}

/// Self-describing form of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDocument {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: Value,
    pub months: Vec<Month>,
    pub series: BTreeMap<String, Vec<f64>>,
    pub events: Vec<Event>,
    pub metrics: RunMetrics,
    pub runaway: Option<Month>,
}

impl RunDocument {
    /// Series are downsampled by `stride` after the metrics were computed,
    /// so the metrics do not depend on it.
    pub fn new(config: &ScenarioConfig, output: &RunOutput, stride: u32) -> Self {
        let kept = crate::runner::downsample(&output.records, stride);
        let mut series: BTreeMap<String, Vec<f64>> = MonthRecord::SERIES
            .iter()
            .map(|s| (s.to_string(), Vec::with_capacity(kept.len())))
            .collect();
        for r in &kept {
            for (name, v) in MonthRecord::SERIES.iter().zip(r.values()) {
                series.get_mut(*name).expect("known series").push(v);
            }
        }
        RunDocument {
            version: VERSION.to_string(),
            config_hash: output.config_hash.clone(),
            seed: output.seed,
            config: config.to_json(),
            months: kept.iter().map(|r| r.month).collect(),
            series,
            events: output.events.clone(),
            metrics: output.metrics.clone(),
            runaway: output.runaway,
        }
    }
}

/// Write `run-<seed>.csv` or `run-<seed>.json` under `dir`, creating it if needed.
pub fn export_run(config: &ScenarioConfig, output: &RunOutput, format: Format, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stride = config.run.stride;
    match format {
        Format::Csv => {
            let path = dir.join(format!("run-{}.csv", output.seed));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_csv(&crate::runner::downsample(&output.records, stride), file)?;
            Ok(path)
        }
        Format::Doc => {
            let path = dir.join(format!("run-{}.json", output.seed));
            write_json(&path, &RunDocument::new(config, output, stride))?;
            Ok(path)
        }
    }
}

/// Pretty-printed JSON file.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
