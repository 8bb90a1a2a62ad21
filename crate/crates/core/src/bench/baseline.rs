//! Baseline costs (quantum walk, randomised method) and the bundled
//! reference tables.
//!
//! All tables are CSV with a header row; lines starting with `#` are
//! provenance comments.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::InstanceKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineMethod {
    QW,
    Randomised,
}

impl FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qw" | "quantum walk" | "quantum-walk" => Ok(Self::QW),
            "randomised" | "randomized" => Ok(Self::Randomised),
            other => Err(Error::Validation(format!("unknown baseline method `{other}`"))),
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::QW => "QW",
            Self::Randomised => "Randomised",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub method: BaselineMethod,
    pub kappa: f64,
    pub delta: f64,
    pub cost: f64,
    pub mean_error: f64,
    pub alpha_avg: Option<f64>,
}

#[derive(Deserialize)]
struct RawBaseline {
    method: String,
    kappa: f64,
    delta: f64,
    cost: f64,
    mean_error: f64,
    #[serde(default)]
    alpha_avg: Option<String>,
}

/// Reads every data row with its file line number.
fn read_rows<R: DeserializeOwned>(text: &str) -> Result<Vec<(u64, R)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse("header", e.to_string()))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("row {line}"), e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(format!("row {line}"), e.to_string()))?;
        out.push((line, row));
    }
    Ok(out)
}

/// Parses baseline CSV text with header
/// `method,kappa,delta,cost,mean_error[,alpha_avg]`.
pub fn parse_baseline(text: &str) -> Result<Vec<BaselineRecord>> {
    read_rows::<RawBaseline>(text)?
        .into_iter()
        .map(|(line, raw)| {
            let at = |m: String| Error::Validation(format!("row {line}: {m}"));
            let method = raw.method.parse::<BaselineMethod>().map_err(|e| at(e.to_string()))?;
            let alpha_avg = match raw.alpha_avg.as_deref().map(str::trim) {
                None | Some("") | Some("---") | Some("-") => None,
                Some(s) => Some(
                    s.parse::<f64>()
                        .map_err(|e| Error::parse(format!("row {line}"), format!("alpha_avg `{s}`: {e}")))?,
                ),
            };
            if !(raw.cost > 0.0) || !raw.cost.is_finite() {
                return Err(at(format!("cost {} must be positive", raw.cost)));
            }
            if !(raw.delta > 0.0 && raw.delta <= 0.5) {
                return Err(at(format!("delta {} not in (0, 0.5]", raw.delta)));
            }
            if !(raw.kappa >= 1.0) {
                return Err(at(format!("kappa {} below 1", raw.kappa)));
            }
            Ok(BaselineRecord {
                method,
                kappa: raw.kappa,
                delta: raw.delta,
                cost: raw.cost,
                mean_error: raw.mean_error,
                alpha_avg,
            })
        })
        .collect()
}

pub fn ingest_baseline(path: &Path) -> Result<Vec<BaselineRecord>> {
    parse_baseline(&std::fs::read_to_string(path)?)
}

/// Known-norm shortcut row: calibrated `η`, cost per `κ`, mean error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownNormReference {
    pub kappa: f64,
    pub eta: f64,
    pub cost_over_kappa: f64,
    pub mean_error: f64,
}

/// Unknown-norm shortcut stage-1 row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownNormReference {
    pub kappa: f64,
    pub delta: f64,
    pub cost: f64,
    pub mean_error: f64,
    pub eta: f64,
}

/// One condition-number band of the sparse comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseReference {
    pub band: String,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub kappa_avg: f64,
    pub delta: f64,
    pub shortcut_cost: f64,
    pub shortcut_error: f64,
    pub qw_cost: f64,
    pub qw_error: f64,
    pub rho: f64,
}

impl SparseReference {
    /// The quantum-walk side as a baseline record at the band's mean `κ`.
    pub fn baseline(&self) -> BaselineRecord {
        BaselineRecord {
            method: BaselineMethod::QW,
            kappa: self.kappa_avg,
            delta: self.delta,
            cost: self.qw_cost,
            mean_error: self.qw_error,
            alpha_avg: None,
        }
    }
}

fn parse_table<R: DeserializeOwned>(text: &str) -> Result<Vec<R>> {
    Ok(read_rows(text)?.into_iter().map(|(_, r)| r).collect())
}

/// Reference tables compiled into the crate.
pub mod bundled {
    use super::*;

    macro_rules! data {
        ($name:literal) => {
            include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/", $name))
        };
    }

    pub const QW_NH_32: &str = data!("qw_nh_n32.csv");
    pub const QW_NH_64: &str = data!("qw_nh_n64.csv");
    pub const QW_PD_32: &str = data!("qw_pd_n32.csv");
    pub const QW_PD_64: &str = data!("qw_pd_n64.csv");
    pub const QW_RANDOMISED_8: &str = data!("qw_randomised_nh_n8.csv");
    pub const QW_RANDOMISED_16: &str = data!("qw_randomised_nh_n16.csv");
    pub const QW_RANDOMISED_32: &str = data!("qw_randomised_nh_n32.csv");
    pub const SPARSE_32: &str = data!("sparse_nh_n32.csv");
    pub const SPARSE_64: &str = data!("sparse_nh_n64.csv");
    pub const UNKNOWN_NH_32: &str = data!("shortcut_unknown_nh_n32.csv");
    pub const UNKNOWN_NH_64: &str = data!("shortcut_unknown_nh_n64.csv");

    const KNOWN: [(InstanceKind, usize, f64, &str); 8] = [
        (InstanceKind::NonHermitian, 32, 0.01, data!("shortcut_known_nh_n32_eps0.01.csv")),
        (InstanceKind::NonHermitian, 64, 0.01, data!("shortcut_known_nh_n64_eps0.01.csv")),
        (InstanceKind::NonHermitian, 32, 0.001, data!("shortcut_known_nh_n32_eps0.001.csv")),
        (InstanceKind::NonHermitian, 64, 0.001, data!("shortcut_known_nh_n64_eps0.001.csv")),
        (InstanceKind::PositiveDefinite, 32, 0.01, data!("shortcut_known_pd_n32_eps0.01.csv")),
        (InstanceKind::PositiveDefinite, 64, 0.01, data!("shortcut_known_pd_n64_eps0.01.csv")),
        (InstanceKind::PositiveDefinite, 32, 0.001, data!("shortcut_known_pd_n32_eps0.001.csv")),
        (InstanceKind::PositiveDefinite, 64, 0.001, data!("shortcut_known_pd_n64_eps0.001.csv")),
    ];

    fn missing(what: &str) -> Error {
        Error::Validation(format!("no bundled table for {what}"))
    }

    /// Quantum-walk stage-1 costs over the Δ grid, dense ensembles.
    pub fn qw(kind: InstanceKind, n: usize) -> Result<Vec<BaselineRecord>> {
        let text = match (kind, n) {
            (InstanceKind::NonHermitian, 32) => QW_NH_32,
            (InstanceKind::NonHermitian, 64) => QW_NH_64,
            (InstanceKind::PositiveDefinite, 32) => QW_PD_32,
            (InstanceKind::PositiveDefinite, 64) => QW_PD_64,
            _ => return Err(missing(&format!("{kind:?} n = {n}"))),
        };
        parse_baseline(text)
    }

    /// Quantum walk and randomised method at Δ = 0.4, small dimensions.
    pub fn qw_randomised(n: usize) -> Result<Vec<BaselineRecord>> {
        parse_baseline(match n {
            8 => QW_RANDOMISED_8,
            16 => QW_RANDOMISED_16,
            32 => QW_RANDOMISED_32,
            _ => return Err(missing(&format!("randomised n = {n}"))),
        })
    }

    pub fn known_norm(kind: InstanceKind, n: usize, epsilon: f64) -> Result<Vec<KnownNormReference>> {
        let (_, _, _, text) = KNOWN
            .iter()
            .find(|(k, m, e, _)| *k == kind && *m == n && (e - epsilon).abs() < 1e-12)
            .ok_or_else(|| missing(&format!("known norm {kind:?} n = {n} ε = {epsilon}")))?;
        parse_table(text)
    }

    pub fn unknown_norm(n: usize) -> Result<Vec<UnknownNormReference>> {
        parse_table(match n {
            32 => UNKNOWN_NH_32,
            64 => UNKNOWN_NH_64,
            _ => return Err(missing(&format!("unknown norm n = {n}"))),
        })
    }

    pub fn sparse(n: usize) -> Result<Vec<SparseReference>> {
        parse_table(match n {
            32 => SPARSE_32,
            64 => SPARSE_64,
            _ => return Err(missing(&format!("sparse n = {n}"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_qw_values() {
        let nh32 = bundled::qw(InstanceKind::NonHermitian, 32).unwrap();
        let r = nh32.iter().find(|r| r.kappa == 20.0 && r.delta == 0.40).unwrap();
        assert_eq!((r.cost, r.mean_error), (68.0, 0.385));
        let nh64 = bundled::qw(InstanceKind::NonHermitian, 64).unwrap();
        let r = nh64.iter().find(|r| r.kappa == 320.0 && r.delta == 0.15).unwrap();
        assert_eq!(r.cost, 2760.0);
        assert_eq!(nh32.len(), 25);
        assert_eq!(bundled::qw(InstanceKind::PositiveDefinite, 64).unwrap().len(), 40);
    }

    #[test]
    fn randomised_rows_have_no_alpha() {
        let rows = bundled::qw_randomised(8).unwrap();
        let r = rows
            .iter()
            .find(|r| r.method == BaselineMethod::Randomised && r.kappa == 20.0)
            .unwrap();
        assert_eq!(r.cost, 642.0);
        assert_eq!(r.alpha_avg, None);
        let q = rows.iter().find(|r| r.method == BaselineMethod::QW && r.kappa == 20.0).unwrap();
        assert_eq!(q.alpha_avg, Some(1.75));
    }

    #[test]
    fn every_bundled_table_parses() {
        for n in [32, 64] {
            assert_eq!(bundled::unknown_norm(n).unwrap().len(), 20);
            assert_eq!(bundled::sparse(n).unwrap().len(), 3);
            for kind in [InstanceKind::NonHermitian, InstanceKind::PositiveDefinite] {
                for eps in [0.01, 0.001] {
                    assert_eq!(bundled::known_norm(kind, n, eps).unwrap().len(), 8);
                }
            }
        }
        for n in [16, 32] {
            assert!(!bundled::qw_randomised(n).unwrap().is_empty());
        }
        assert!(bundled::qw(InstanceKind::Sparse, 32).is_err());
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "# comment\nmethod,kappa,delta,cost,mean_error\nQW,20,0.4,68,0.385\nQW,40,oops,160,0.39\n";
        match parse_baseline(text) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "row 4"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonpositive_cost_is_invalid() {
        let text = "method,kappa,delta,cost,mean_error\nQW,20,0.4,68,0.385\nQW,40,0.3,0,0.29\n";
        match parse_baseline(text) {
            Err(Error::Validation(m)) => assert!(m.starts_with("row 3"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn delta_out_of_range_is_invalid() {
        let text = "method,kappa,delta,cost,mean_error\nQW,20,0.6,68,0.385\n";
        assert!(matches!(parse_baseline(text), Err(Error::Validation(_))));
    }

    #[test]
    fn alpha_column_is_optional() {
        let text = "method,kappa,delta,cost,mean_error\nrandomized,20,0.4,600,0.39\n";
        let rows = parse_baseline(text).unwrap();
        assert_eq!(rows[0].method, BaselineMethod::Randomised);
        assert_eq!(rows[0].alpha_avg, None);
    }
}
