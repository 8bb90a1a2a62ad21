//! Long-format reports: one row per `(κ, Δ/ε, id, metric)`, floats at six
//! significant digits, CSV or JSON.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::compare::Comparison;
use super::sweep::SweepReport;
use crate::error::{Error, Result};
use crate::instance::InstanceKind;
use crate::norm_search::{CalibrationMode, CalibrationReport};

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Column order of the CSV form.
pub const COLUMNS: [&str; 9] = ["series", "kind", "dimension", "kappa", "delta", "epsilon", "id", "metric", "value"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Validation(format!("unknown report format `{other}`"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// `shortcut`, or the baseline method for comparison rows.
    pub series: String,
    pub kind: InstanceKind,
    pub dimension: usize,
    pub kappa: f64,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    /// Instance id; empty for ensemble aggregates.
    pub id: Option<String>,
    pub metric: String,
    pub value: f64,
}

impl ReportRow {
    fn rounded(mut self) -> Self {
        self.kappa = round_sig(self.kappa);
        self.delta = self.delta.map(round_sig);
        self.epsilon = self.epsilon.map(round_sig);
        self.value = round_sig(self.value);
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

struct Key<'a> {
    series: &'a str,
    kind: InstanceKind,
    dimension: usize,
    kappa: f64,
    delta: Option<f64>,
    epsilon: Option<f64>,
}

impl Key<'_> {
    fn row(&self, id: Option<&str>, metric: &str, value: f64) -> ReportRow {
        ReportRow {
            series: self.series.to_string(),
            kind: self.kind,
            dimension: self.dimension,
            kappa: self.kappa,
            delta: self.delta,
            epsilon: self.epsilon,
            id: id.map(str::to_string),
            metric: metric.to_string(),
            value,
        }
    }
}

impl Report {
    /// Rounds and orders rows by `(κ, Δ, ε, id)`; ties keep their order.
    pub fn new(rows: Vec<ReportRow>) -> Self {
        let mut rows: Vec<ReportRow> = rows.into_iter().map(ReportRow::rounded).collect();
        let opt = |x: Option<f64>| x.unwrap_or(-1.0);
        rows.sort_by(|a, b| {
            a.kappa
                .total_cmp(&b.kappa)
                .then(opt(a.delta).total_cmp(&opt(b.delta)))
                .then(opt(a.epsilon).total_cmp(&opt(b.epsilon)))
                .then(a.id.cmp(&b.id))
        });
        Self { rows }
    }

    pub fn merge(reports: impl IntoIterator<Item = Report>) -> Self {
        Self::new(reports.into_iter().flat_map(|r| r.rows).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Value of an aggregate metric, if present.
    pub fn aggregate(&self, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.id.is_none() && r.metric == metric)
            .map(|r| r.value)
    }

    /// Calibrated `η`, mean error and mean cost with its `Cost_avg/κ`, plus
    /// per-instance error and cost. Known-norm targets go in the `ε`
    /// column, unknown-norm targets in `Δ`.
    pub fn from_calibration(r: &CalibrationReport) -> Self {
        let (delta, epsilon) = match r.mode {
            CalibrationMode::KnownNorm => (None, Some(r.target_delta)),
            CalibrationMode::UnknownNorm { .. } => (Some(r.target_delta), None),
        };
        let key = Key {
            series: "shortcut",
            kind: r.kind,
            dimension: r.dimension,
            kappa: r.kappa,
            delta,
            epsilon,
        };
        let mut rows = vec![
            key.row(None, "eta", r.eta),
            key.row(None, "mean_error", r.mean_error),
            key.row(None, "mean_cost", r.mean_cost),
            key.row(None, "cost_over_kappa", r.mean_cost / r.kappa),
        ];
        for s in &r.per_instance {
            rows.push(key.row(Some(&s.id), "error", s.bures_delta));
            rows.push(key.row(Some(&s.id), "cost", s.cost));
        }
        Self::new(rows)
    }

    pub fn from_sweep(r: &SweepReport) -> Self {
        let key = |delta, epsilon| Key {
            series: "shortcut",
            kind: r.kind,
            dimension: r.dimension,
            kappa: r.kappa,
            delta,
            epsilon,
        };
        let mut rows = Vec::new();
        for (i, &d) in r.delta_grid.iter().enumerate() {
            let k = key(Some(d), None);
            if let Some(eta) = r.etas[i] {
                rows.push(k.row(None, "eta", eta));
            }
            if let Some(c) = r.stage1_costs[i] {
                rows.push(k.row(None, "stage1_cost", c));
                rows.push(k.row(None, "stage1_cost_over_kappa", c / r.kappa));
            }
            if let Some(e) = r.stage1_errors[i] {
                rows.push(k.row(None, "stage1_error", e));
            }
            if r.flagged.iter().any(|f| f.delta == d) {
                rows.push(k.row(None, "flagged", 1.0));
            }
            for c in &r.curves {
                if let Some(t) = c.totals[i] {
                    rows.push(key(Some(d), Some(c.epsilon)).row(None, "total_cost", t));
                }
            }
        }
        for c in &r.curves {
            if let Some(rec) = c.recommendation {
                let k = key(None, Some(c.epsilon));
                rows.push(k.row(None, "recommended_delta", rec.delta));
                rows.push(k.row(None, "total_at_recommended", rec.total));
                rows.push(k.row(None, "total_over_kappa", rec.total / r.kappa));
                rows.push(k.row(None, "boundary_minimum", if rec.boundary { 1.0 } else { 0.0 }));
            }
        }
        for rec in &r.records {
            let k = key(Some(rec.delta), rec.epsilon);
            match rec.total {
                Some(t) => rows.push(k.row(Some(&rec.id), "total_cost", t)),
                None => {
                    rows.push(k.row(Some(&rec.id), "stage1_cost", rec.stage1_cost));
                    rows.push(k.row(Some(&rec.id), "stage1_error", rec.stage1_error));
                }
            }
        }
        Self::new(rows)
    }

    pub fn from_comparison(c: &Comparison, kind: InstanceKind, dimension: usize) -> Self {
        let mut rows = Vec::new();
        for r in &c.rows {
            let series = r.method.to_string();
            let k = Key {
                series: &series,
                kind,
                dimension,
                kappa: r.kappa,
                delta: Some(r.delta),
                epsilon: None,
            };
            rows.push(k.row(None, "baseline_cost", r.baseline_cost));
            rows.push(k.row(None, "shortcut_cost", r.shortcut_cost));
            rows.push(k.row(None, "rho", r.rho));
        }
        Self::new(rows)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::parse("csv", e.to_string());
        w.write_record(COLUMNS).map_err(csv_err)?;
        for row in &self.rows {
            w.serialize(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::parse("csv", e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::parse("csv", e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::parse("header", e.to_string()))?;
        if headers.iter().ne(COLUMNS) {
            return Err(Error::parse("header", format!("expected columns {}", COLUMNS.join(","))));
        }
        let mut rows = Vec::new();
        for (i, row) in rdr.deserialize::<ReportRow>().enumerate() {
            rows.push(row.map_err(|e| Error::parse(format!("row {}", i + 2), e.to_string()))?);
        }
        Ok(Self::new(rows))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::parse("json", e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text).map_err(|e| Error::parse("json", e.to_string()))?;
        Ok(Self::new(r.rows))
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: &Path, format: ReportFormat) -> Result<()> {
        std::fs::write(path, self.render(format)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(kappa: f64, delta: Option<f64>, id: Option<&str>, metric: &str, value: f64) -> ReportRow {
        ReportRow {
            series: "shortcut".into(),
            kind: InstanceKind::NonHermitian,
            dimension: 32,
            kappa,
            delta,
            epsilon: None,
            id: id.map(Into::into),
            metric: metric.into(),
            value,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let csv = Report::default().to_csv().unwrap();
        assert_eq!(csv.trim_end(), COLUMNS.join(","));
    }

    #[test]
    fn rounding_keeps_six_digits() {
        assert_eq!(round_sig(1.23456789), 1.23457);
        assert_eq!(round_sig(-0.000123456789), -0.000123457);
        assert_eq!(round_sig(123456789.0), 123457000.0);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn csv_json_round_trip() {
        let r = Report::new(vec![
            row(320.0, Some(0.05), Some("nh-7"), "cost", 4731.912345678),
            row(20.0, Some(0.3), None, "eta", 0.330612345),
            row(20.0, None, None, "cost_over_kappa", 5.40712345),
        ]);
        let json = r.to_json().unwrap();
        let csv = Report::from_json(&json).unwrap().to_csv().unwrap();
        let back = Report::from_json(&Report::from_csv(&csv).unwrap().to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.rows[0].kappa, 20.0);
        assert_eq!(r.rows[0].delta, None);
        assert_eq!(r.rows.last().unwrap().value, 4731.91);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(Report::from_csv("a,b\n1,2\n").is_err());
    }
}
