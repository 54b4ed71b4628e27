use std::io::Write;

use crate::error::{Error, Result};

/// Summary of one value measured over several seeds; `std` is the sample
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
    pub runs: usize,
}

impl SeedStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("no values to summarize"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            std,
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            runs: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    /// Spearman per dataset (the mean over seeds for multi-seed rows).
    pub per_dataset: Vec<f64>,
    /// Unweighted mean of `per_dataset`.
    pub average: f64,
    /// Spread of the per-seed averages.
    pub seeds: Option<SeedStats>,
    /// Failed runs as `seed: reason`.
    pub failures: Vec<String>,
}

impl ReportRow {
    pub fn new(label: impl Into<String>, per_dataset: Vec<f64>) -> Self {
        let average = mean(&per_dataset);
        Self { label: label.into(), per_dataset, average, seeds: None, failures: Vec::new() }
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Rows of Spearman correlations over a fixed list of datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub row_header: String,
    pub datasets: Vec<String>,
    pub rows: Vec<ReportRow>,
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.6}")
    }
}

impl EvalReport {
    pub fn new(row_header: impl Into<String>, datasets: Vec<String>) -> Self {
        Self { row_header: row_header.into(), datasets, rows: Vec::new() }
    }

    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// TSV with a header row; multi-seed reports add mean, std, max, min,
    /// runs and failures columns.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let multi = self.rows.iter().any(|r| r.seeds.is_some() || !r.failures.is_empty());
        let mut header = vec![self.row_header.clone()];
        header.extend(self.datasets.iter().cloned());
        header.push("average".into());
        if multi {
            header.extend(["mean", "std", "max", "min", "runs", "failures"].map(String::from));
        }
        writeln!(out, "{}", header.join("\t"))?;
        for r in &self.rows {
            let mut cells = vec![r.label.clone()];
            cells.extend(r.per_dataset.iter().map(|&v| cell(v)));
            cells.push(cell(r.average));
            if multi {
                match r.seeds {
                    Some(s) => {
                        cells.extend([s.mean, s.std, s.max, s.min].map(cell));
                        cells.push(s.runs.to_string());
                    }
                    None => cells.extend(["NA", "NA", "NA", "NA", "0"].map(String::from)),
                }
                cells.push(if r.failures.is_empty() { "-".into() } else { r.failures.join("; ") });
            }
            writeln!(out, "{}", cells.join("\t"))?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("UTF-8")
    }
}
