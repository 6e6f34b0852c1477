//! CSV ingestion and emission.
//!
//! Two layouts are accepted, both with a mandatory header row:
//!
//! * wide: `t,name1,name2,...` with one row per time; an empty cell means the
//!   component has no sample at that time;
//! * long: `component,t,value`, which lets every component carry its own grid.

use std::path::Path;

use crate::chebapprox::SampledSignal;
use crate::error::{Error, Result};

/// Named trajectory components, possibly on different time grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub components: Vec<SampledSignal>,
}

impl Dataset {
    pub fn new(components: Vec<SampledSignal>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Dataset("dataset has no components".into()));
        }
        let ds = Dataset { components };
        ds.shared_domain()?;
        Ok(ds)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.components.iter().map(|c| c.name().to_string()).collect()
    }

    /// `[max of first times, min of last times]`.
    pub fn shared_domain(&self) -> Result<(f64, f64)> {
        let lo = self
            .components
            .iter()
            .map(SampledSignal::t_first)
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = self
            .components
            .iter()
            .map(SampledSignal::t_last)
            .fold(f64::INFINITY, f64::min);
        if lo < hi {
            Ok((lo, hi))
        } else {
            Err(Error::Dataset(format!(
                "component time ranges do not overlap (window [{lo}, {hi}])"
            )))
        }
    }

    /// True when every component uses the same time grid.
    pub fn is_synchronous(&self) -> bool {
        let first = self.components[0].times();
        self.components.iter().all(|c| c.times() == first)
    }

    /// Reads a wide or long CSV file, detected from the header.
    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Dataset::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 {
            return Err(Error::Dataset(
                "header needs a time column and at least one component".into(),
            ));
        }
        let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
        if header[0].eq_ignore_ascii_case("component") {
            parse_long(&header, &records)
        } else {
            parse_wide(&header, &records)
        }
    }

    /// Wide CSV; requires a shared grid.
    pub fn to_wide_csv(&self) -> Result<String> {
        if !self.is_synchronous() {
            return Err(Error::Dataset(
                "wide output needs a shared time grid".into(),
            ));
        }
        let mut out = String::from("t");
        for c in &self.components {
            out.push(',');
            out.push_str(c.name());
        }
        out.push('\n');
        for (j, t) in self.components[0].times().iter().enumerate() {
            out.push_str(&fmt_float(*t));
            for c in &self.components {
                out.push(',');
                out.push_str(&fmt_float(c.values()[j]));
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Long CSV, one row per sample.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("component,t,value\n");
        for c in &self.components {
            for (t, v) in c.times().iter().zip(c.values()) {
                out.push_str(&format!("{},{},{}\n", c.name(), fmt_float(*t), fmt_float(*v)));
            }
        }
        out
    }
}

/// Shortest representation that parses back to the identical `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

fn parse_number(cell: &str, row: usize, col: &str) -> Result<f64> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Dataset(format!("row {row}, column `{col}`: not a finite number: `{cell}`")))
}

fn parse_wide(header: &[String], records: &[csv::StringRecord]) -> Result<Dataset> {
    let n = header.len() - 1;
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (i, rec) in records.iter().enumerate() {
        let row = i + 2;
        if rec.len() != header.len() {
            return Err(Error::Dataset(format!(
                "row {row}: expected {} fields, found {}",
                header.len(),
                rec.len()
            )));
        }
        let t = parse_number(&rec[0], row, &header[0])?;
        for k in 0..n {
            let cell = &rec[k + 1];
            if cell.is_empty() {
                continue;
            }
            times[k].push(t);
            values[k].push(parse_number(cell, row, &header[k + 1])?);
        }
    }
    let comps = header[1..]
        .iter()
        .zip(times.into_iter().zip(values))
        .map(|(name, (t, v))| build(name, t, v))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(comps)
}

fn parse_long(header: &[String], records: &[csv::StringRecord]) -> Result<Dataset> {
    if header.len() != 3 {
        return Err(Error::Dataset(
            "long format header must be `component,t,value`".into(),
        ));
    }
    let mut order: Vec<String> = Vec::new();
    let mut series: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let row = i + 2;
        if rec.len() != 3 {
            return Err(Error::Dataset(format!("row {row}: expected 3 fields")));
        }
        let name = rec[0].to_string();
        if name.is_empty() {
            return Err(Error::Dataset(format!("row {row}: empty component name")));
        }
        let t = parse_number(&rec[1], row, &header[1])?;
        let v = parse_number(&rec[2], row, &header[2])?;
        let k = match order.iter().position(|n| n == &name) {
            Some(k) => k,
            None => {
                order.push(name);
                series.push((Vec::new(), Vec::new()));
                order.len() - 1
            }
        };
        series[k].0.push(t);
        series[k].1.push(v);
    }
    let comps = order
        .iter()
        .zip(series)
        .map(|(name, (t, v))| build(name, t, v))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(comps)
}

fn build(name: &str, times: Vec<f64>, values: Vec<f64>) -> Result<SampledSignal> {
    if times.is_empty() {
        return Err(Error::Dataset(format!("component `{name}` has no samples")));
    }
    SampledSignal::new(name, times, values).map_err(|e| Error::Dataset(e.to_string()))
}
