//! Ingestion of the Dipartimento della Protezione Civile per-region daily CSV.
//!
//! Column resolution is by header name so that upstream snapshots taken at
//! different times (the dataset gained columns over its life) all parse. Only
//! six columns are required: `data`, `denominazione_regione`,
//! `totale_positivi`, `dimessi_guariti`, `deceduti`, `totale_casi`.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// One day of observations for a region: total cases T, active cases A,
/// recovered R and deaths K, all cumulative-style counts in persons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub total: f64,
    pub active: f64,
    pub recovered: f64,
    pub deaths: f64,
}

/// The observed daily series of one region, with its resident population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries {
    pub region: String,
    pub population: f64,
    pub records: Vec<DailyRecord>,
}

/// Data-quality issues that are reported but do not abort parsing.
#[derive(Debug, Clone, PartialEq)]
pub enum DataWarning {
    /// T != A + R + K on some day.
    InconsistentTotal {
        region: String,
        date: NaiveDate,
        total: f64,
        sum: f64,
    },
    /// A cumulative series (T or K) decreased from one day to the next.
    NonMonotonic {
        region: String,
        date: NaiveDate,
        column: &'static str,
    },
}

impl fmt::Display for DataWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataWarning::InconsistentTotal {
                region,
                date,
                total,
                sum,
            } => write!(
                f,
                "{region} {date}: totale_casi = {total} but active+recovered+deaths = {sum}"
            ),
            DataWarning::NonMonotonic {
                region,
                date,
                column,
            } => write!(f, "{region} {date}: cumulative column `{column}` decreased"),
        }
    }
}

/// Output of [`parse_regional_csv`]: one series per region plus any warnings.
#[derive(Debug, Clone)]
pub struct ParsedDataset {
    pub series: Vec<ObservedSeries>,
    pub warnings: Vec<DataWarning>,
}

impl ParsedDataset {
    pub fn region(&self, name: &str) -> Option<&ObservedSeries> {
        self.series.iter().find(|s| s.region == name)
    }

    pub fn region_names(&self) -> Vec<String> {
        self.series.iter().map(|s| s.region.clone()).collect()
    }
}

/// Region name -> resident population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationConfig {
    populations: BTreeMap<String, f64>,
}

impl PopulationConfig {
    /// Parse the `region = count` key-value format. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut populations = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, value) = line
                .split_once('=')
                .ok_or(DataError::MalformedConfigLine(idx + 1))?;
            let count: u64 = value
                .trim()
                .parse()
                .map_err(|_| DataError::MalformedConfigLine(idx + 1))?;
            populations.insert(name.trim().to_string(), count as f64);
        }
        Ok(Self { populations })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, DataError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, region: &str) -> Option<f64> {
        self.populations.get(region).copied()
    }

    pub fn regions(&self) -> impl Iterator<Item = &str> {
        self.populations.keys().map(String::as_str)
    }
}

const REQUIRED_COLUMNS: [&str; 6] = [
    "data",
    "denominazione_regione",
    "totale_positivi",
    "dimessi_guariti",
    "deceduti",
    "totale_casi",
];

fn parse_date(raw: &str, row: usize) -> Result<NaiveDate, DataError> {
    // Source timestamps carry a time-of-day component; normalize to the
    // calendar date. Plain dates are accepted for re-ingesting our own output.
    if let Ok(dt) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt.date());
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| DataError::MalformedDate {
        row,
        value: raw.to_string(),
    })
}

fn parse_count(raw: &str, row: usize, column: &'static str) -> Result<f64, DataError> {
    raw.trim()
        .parse::<i64>()
        .map(|v| v as f64)
        .map_err(|_| DataError::MalformedCount {
            row,
            column,
            value: raw.to_string(),
        })
}

/// Parse the per-region CSV into one [`ObservedSeries`] per region, in order
/// of first appearance. Every region in the file must have a population entry
/// in `config`. Consistency violations (T != A+R+K, decreasing cumulative
/// counts) are reported as warnings, not fixed.
pub fn parse_regional_csv(
    raw: &[u8],
    config: &PopulationConfig,
) -> Result<ParsedDataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(raw);

    let headers = reader.headers()?.clone();
    let mut column_index = BTreeMap::new();
    for required in REQUIRED_COLUMNS {
        let idx = headers
            .iter()
            .position(|h| h == required)
            .ok_or(DataError::MissingColumn(match required {
                "data" => "data",
                "denominazione_regione" => "denominazione_regione",
                "totale_positivi" => "totale_positivi",
                "dimessi_guariti" => "dimessi_guariti",
                "deceduti" => "deceduti",
                _ => "totale_casi",
            }))?;
        column_index.insert(required, idx);
    }
    let col = |name: &str| column_index[name];

    // Group rows by region, preserving first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut by_region: BTreeMap<String, Vec<DailyRecord>> = BTreeMap::new();

    for (i, row) in reader.records().enumerate() {
        let row_number = i + 2; // 1-based, after the header line
        let record = row?;
        let region = record.get(col("denominazione_regione")).unwrap_or("").to_string();
        let date = parse_date(record.get(col("data")).unwrap_or(""), row_number)?;
        let active = parse_count(
            record.get(col("totale_positivi")).unwrap_or(""),
            row_number,
            "totale_positivi",
        )?;
        let recovered = parse_count(
            record.get(col("dimessi_guariti")).unwrap_or(""),
            row_number,
            "dimessi_guariti",
        )?;
        let deaths = parse_count(
            record.get(col("deceduti")).unwrap_or(""),
            row_number,
            "deceduti",
        )?;
        let total = parse_count(
            record.get(col("totale_casi")).unwrap_or(""),
            row_number,
            "totale_casi",
        )?;

        if !by_region.contains_key(&region) {
            order.push(region.clone());
        }
        by_region.entry(region).or_default().push(DailyRecord {
            date,
            total,
            active,
            recovered,
            deaths,
        });
    }

    let mut warnings = Vec::new();
    let mut series = Vec::with_capacity(order.len());
    for region in order {
        let population = config
            .get(&region)
            .ok_or_else(|| DataError::UnknownRegion(region.clone()))?;
        let records = by_region.remove(&region).unwrap();

        for pair in records.windows(2) {
            let next = pair[1].date;
            let expected = pair[0].date + chrono::Days::new(1);
            if next != expected {
                return Err(DataError::NonContiguousDates {
                    region,
                    prev: pair[0].date,
                    next,
                });
            }
        }

        for rec in &records {
            let sum = rec.active + rec.recovered + rec.deaths;
            if (rec.total - sum).abs() > 0.0 {
                warnings.push(DataWarning::InconsistentTotal {
                    region: region.clone(),
                    date: rec.date,
                    total: rec.total,
                    sum,
                });
            }
        }
        for pair in records.windows(2) {
            if pair[1].total < pair[0].total {
                warnings.push(DataWarning::NonMonotonic {
                    region: region.clone(),
                    date: pair[1].date,
                    column: "totale_casi",
                });
            }
            if pair[1].deaths < pair[0].deaths {
                warnings.push(DataWarning::NonMonotonic {
                    region: region.clone(),
                    date: pair[1].date,
                    column: "deceduti",
                });
            }
        }

        series.push(ObservedSeries {
            region,
            population,
            records,
        });
    }

    Ok(ParsedDataset { series, warnings })
}

impl ObservedSeries {
    pub fn first_date(&self) -> Option<NaiveDate> {
        self.records.first().map(|r| r.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.records.last().map(|r| r.date)
    }

    pub fn record_at(&self, date: NaiveDate) -> Option<&DailyRecord> {
        self.records
            .binary_search_by_key(&date, |r| r.date)
            .ok()
            .map(|idx| &self.records[idx])
    }

    /// Inclusive sub-series between `start` and `end`.
    pub fn select_window(&self, start: NaiveDate, end: NaiveDate) -> Result<ObservedSeries, DataError> {
        if start > end {
            return Err(DataError::InvertedWindow(start, end));
        }
        let (avail_start, avail_end) = match (self.first_date(), self.last_date()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(DataError::EmptySeries(self.region.clone())),
        };
        if start < avail_start || end > avail_end {
            return Err(DataError::WindowOutOfRange {
                start,
                end,
                avail_start,
                avail_end,
            });
        }
        let records = self
            .records
            .iter()
            .filter(|r| r.date >= start && r.date <= end)
            .copied()
            .collect();
        Ok(ObservedSeries {
            region: self.region.clone(),
            population: self.population,
            records,
        })
    }

    /// Serialize back to the upstream CSV schema (the six required columns).
    /// `parse_regional_csv` re-reads this output bit-exactly.
    pub fn to_regional_csv(series: &[&ObservedSeries]) -> String {
        let mut out = String::from(
            "data,denominazione_regione,totale_positivi,dimessi_guariti,deceduti,totale_casi\n",
        );
        // Interleave by date like the upstream file: all regions for day 1,
        // then all regions for day 2, and so on.
        let max_len = series.iter().map(|s| s.records.len()).max().unwrap_or(0);
        for i in 0..max_len {
            for s in series {
                if let Some(rec) = s.records.get(i) {
                    out.push_str(&format!(
                        "{}T17:00:00,{},{},{},{},{}\n",
                        rec.date, s.region, rec.active, rec.recovered, rec.deaths, rec.total
                    ));
                }
            }
        }
        out
    }

    /// Tidy normalized CSV: `date,region,total,active,recovered,deaths`.
    pub fn to_tidy_csv(&self) -> String {
        let mut out = String::from("date,region,total,active,recovered,deaths\n");
        for rec in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rec.date, self.region, rec.total, rec.active, rec.recovered, rec.deaths
            ));
        }
        out
    }
}
