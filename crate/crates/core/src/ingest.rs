//! Reading cumulative count series from OWID-style CSV exports.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SncpError};
use crate::regression::TimeSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Cases,
    Deaths,
}

impl Measure {
    pub fn column(self) -> &'static str {
        match self {
            Measure::Cases => "total_cases",
            Measure::Deaths => "total_deaths",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Matched against `location` or `iso_code`, ignoring case.
    pub country: String,
    pub measure: Measure,
    /// The series starts at the first count strictly above this value.
    pub threshold: f64,
    pub end_date: Option<NaiveDate>,
}

impl IngestOptions {
    pub fn new(country: impl Into<String>, measure: Measure) -> Self {
        IngestOptions {
            country: country.into(),
            measure,
            threshold: 20.0,
            end_date: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisInput {
    pub country: String,
    pub measure: Measure,
    pub threshold: f64,
    pub start_date: NaiveDate,
    pub dates: Vec<NaiveDate>,
    /// Cumulative counts after carry-forward.
    pub counts: Vec<f64>,
    /// Dates without a report, filled with the previous count.
    pub filled: Vec<NaiveDate>,
    pub warnings: Vec<String>,
}

impl AnalysisInput {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Natural-log series labelled by date.
    pub fn series(&self) -> Result<TimeSeries> {
        TimeSeries::with_labels(self.counts.iter().map(|c| c.ln()).collect(), self.dates.clone())
    }

    /// Writes the observed (not carried-forward) rows back in the input
    /// schema, so that ingesting the export reproduces this value.
    pub fn write_export<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "location", "total_cases", "total_deaths"])?;
        for (date, count) in self.dates.iter().zip(&self.counts) {
            if self.filled.contains(date) {
                continue;
            }
            let value = format!("{count}");
            let (cases, deaths) = match self.measure {
                Measure::Cases => (value.as_str(), ""),
                Measure::Deaths => ("", value.as_str()),
            };
            w.write_record([date.to_string().as_str(), &self.country, cases, deaths])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<AnalysisInput> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, opts)
}

pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> Result<AnalysisInput> {
    if !(opts.threshold >= 0.0) {
        return Err(SncpError::argument(format!("threshold must be nonnegative, got {}", opts.threshold)));
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let date_col = col("date").ok_or_else(|| SncpError::Parse("missing column `date`".into()))?;
    let loc_col = col("location").ok_or_else(|| SncpError::Parse("missing column `location`".into()))?;
    let iso_col = col("iso_code");
    let value_col = col(opts.measure.column())
        .ok_or_else(|| SncpError::Parse(format!("missing column `{}`", opts.measure.column())))?;

    let wanted = opts.country.trim().to_lowercase();
    let mut found = false;
    let mut location = None;
    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let loc = record.get(loc_col).unwrap_or("").trim();
        let iso = iso_col.and_then(|c| record.get(c)).unwrap_or("").trim();
        if loc.to_lowercase() != wanted && iso.to_lowercase() != wanted {
            continue;
        }
        found = true;
        location.get_or_insert_with(|| loc.to_string());
        let raw_date = record.get(date_col).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|e| SncpError::Parse(format!("row {}: bad date `{raw_date}`: {e}", line + 2)))?;
        if opts.end_date.is_some_and(|end| date > end) {
            continue;
        }
        let raw = record.get(value_col).unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        let value: f64 = raw
            .parse()
            .map_err(|_| SncpError::Parse(format!("row {}: bad count `{raw}`", line + 2)))?;
        if !(value >= 0.0) || !value.is_finite() {
            return Err(SncpError::Parse(format!("row {}: count must be a nonnegative number", line + 2)));
        }
        if let Some(&(prev, _)) = rows.last() {
            if date <= prev {
                return Err(SncpError::Parse(format!(
                    "dates for {} are not strictly increasing at {date}",
                    opts.country
                )));
            }
        }
        rows.push((date, value));
    }
    if !found {
        return Err(SncpError::NotFound(format!("country `{}`", opts.country)));
    }
    let first = rows
        .iter()
        .position(|&(_, v)| v > opts.threshold)
        .ok_or_else(|| {
            SncpError::NotFound(format!(
                "{} for `{}` never exceeds {}",
                opts.measure.column(),
                opts.country,
                opts.threshold
            ))
        })?;
    let rows = &rows[first..];

    let mut dates = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let mut filled = Vec::new();
    let mut warnings = Vec::new();
    for &(date, value) in rows {
        if let (Some(&last_date), Some(&last)) = (dates.last(), counts.last()) {
            let mut d: NaiveDate = last_date;
            loop {
                d = d + Days::new(1);
                if d >= date {
                    break;
                }
                dates.push(d);
                counts.push(last);
                filled.push(d);
            }
            if value < last {
                warnings.push(format!("count decreased on {date}: {last} -> {value}"));
            }
        }
        if value <= 0.0 {
            return Err(SncpError::Parse(format!("zero count on {date} after the series start")));
        }
        dates.push(date);
        counts.push(value);
    }
    if !filled.is_empty() {
        warnings.push(format!("{} missing dates carried forward", filled.len()));
    }
    Ok(AnalysisInput {
        country: location.unwrap_or_else(|| opts.country.clone()),
        measure: opts.measure,
        threshold: opts.threshold,
        start_date: dates[0],
        dates,
        counts,
        filled,
        warnings,
    })
}

/// Reads a CSV with a `value` column and an optional ISO `date` column.
pub fn read_value_series<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let value_col = headers
        .iter()
        .position(|h| h.trim() == "value")
        .ok_or_else(|| SncpError::Parse("missing column `value`".into()))?;
    let date_col = headers.iter().position(|h| h.trim() == "date");
    let mut values = Vec::new();
    let mut dates = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let raw = record.get(value_col).unwrap_or("").trim();
        let v: f64 = raw
            .parse()
            .map_err(|_| SncpError::Parse(format!("row {}: bad value `{raw}`", line + 2)))?;
        values.push(v);
        if let Some(c) = date_col {
            let raw = record.get(c).unwrap_or("").trim();
            let d = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .map_err(|e| SncpError::Parse(format!("row {}: bad date `{raw}`: {e}", line + 2)))?;
            dates.push(d);
        }
    }
    if date_col.is_some() {
        TimeSeries::with_labels(values, dates)
    } else {
        TimeSeries::new(values)
    }
}

pub fn read_value_series_file(path: &Path) -> Result<TimeSeries> {
    read_value_series(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "iso_code,location,date,total_cases,total_deaths,new_cases\n\
        USA,United States,2020-03-01,5,0,1\n\
        USA,United States,2020-03-02,18,1,13\n\
        ITA,Italy,2020-03-02,50,3,\n\
        USA,United States,2020-03-03,21,2,3\n\
        USA,United States,2020-03-04,30,,9\n\
        USA,United States,2020-03-06,44,4,14\n\
        USA,United States,2020-03-07,40,5,\n";

    fn ingest(opts: &IngestOptions) -> Result<AnalysisInput> {
        ingest_reader(CSV.as_bytes(), opts)
    }

    #[test]
    fn threshold_rule_and_log() {
        let mut opts = IngestOptions::new("united states", Measure::Cases);
        opts.end_date = NaiveDate::from_ymd_opt(2020, 3, 4);
        let got = ingest(&opts).unwrap();
        assert_eq!(got.country, "United States");
        assert_eq!(got.start_date, NaiveDate::from_ymd_opt(2020, 3, 3).unwrap());
        assert_eq!(got.counts, vec![21.0, 30.0]);
        let y = got.series().unwrap();
        assert_eq!(y.values(), &[21f64.ln(), 30f64.ln()]);
        assert!(got.warnings.is_empty());
    }

    #[test]
    fn gaps_are_carried_forward_and_revisions_warned() {
        let got = ingest(&IngestOptions::new("USA", Measure::Cases)).unwrap();
        assert_eq!(got.counts, vec![21.0, 30.0, 30.0, 44.0, 40.0]);
        assert_eq!(got.filled, vec![NaiveDate::from_ymd_opt(2020, 3, 5).unwrap()]);
        assert_eq!(got.warnings.len(), 2);
        assert!(got.warnings[0].contains("decreased"));
    }

    #[test]
    fn missing_values_and_strict_threshold() {
        let mut opts = IngestOptions::new("USA", Measure::Deaths);
        opts.threshold = 1.0;
        let got = ingest(&opts).unwrap();
        assert_eq!(got.start_date, NaiveDate::from_ymd_opt(2020, 3, 3).unwrap());
        assert_eq!(got.counts, vec![2.0, 2.0, 2.0, 4.0, 5.0]);
        assert_eq!(got.filled.len(), 2);
    }

    #[test]
    fn absent_country_is_not_found() {
        let err = ingest(&IngestOptions::new("Atlantis", Measure::Cases)).unwrap_err();
        assert!(matches!(err, SncpError::NotFound(_)));
        assert_eq!(err.exit_code(), 5);
        let mut opts = IngestOptions::new("Italy", Measure::Deaths);
        opts.threshold = 20.0;
        assert!(matches!(ingest(&opts).unwrap_err(), SncpError::NotFound(_)));
    }

    #[test]
    fn unordered_dates_rejected() {
        let csv = "date,location,total_cases,total_deaths\n2020-03-02,X,30,\n2020-03-01,X,40,\n";
        let err = ingest_reader(csv.as_bytes(), &IngestOptions::new("X", Measure::Cases)).unwrap_err();
        assert!(matches!(err, SncpError::Parse(_)));
    }

    #[test]
    fn plain_value_series() {
        let y = read_value_series("value\n1.5\n2\n".as_bytes()).unwrap();
        assert_eq!(y.values(), &[1.5, 2.0]);
        assert!(y.labels().is_none());
        let y = read_value_series("date,value\n2020-01-01,1\n2020-01-02,3\n".as_bytes()).unwrap();
        assert_eq!(y.label(2), NaiveDate::from_ymd_opt(2020, 1, 2));
        assert!(read_value_series("value\nx\n".as_bytes()).is_err());
    }

    #[test]
    fn export_round_trips() {
        for measure in [Measure::Cases, Measure::Deaths] {
            let mut opts = IngestOptions::new("USA", measure);
            opts.threshold = 1.0;
            let first = ingest(&opts).unwrap();
            let mut buf = Vec::new();
            first.write_export(&mut buf).unwrap();
            let mut again_opts = opts.clone();
            again_opts.country = first.country.clone();
            let mut second = ingest_reader(buf.as_slice(), &again_opts).unwrap();
            second.country.clone_from(&first.country);
            assert_eq!(first, second);
        }
    }
}
