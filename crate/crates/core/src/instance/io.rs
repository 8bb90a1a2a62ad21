//! Ensemble files (JSON) and the per-instance CSV summary.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EnsembleSpec, InstanceKind, KappaSpec, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, StateVector};
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHeader {
    pub kind: InstanceKind,
    pub n: usize,
    pub kappa_spec: KappaSpec,
    pub count: usize,
    pub base_seed: u64,
    pub format_version: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct InstanceRecord {
    id: String,
    seed: u64,
    kappa_measured: f64,
    #[serde(default)]
    retries: u32,
    entries: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize)]
struct FileOut<'a> {
    header: &'a EnsembleHeader,
    instances: Vec<InstanceRecord>,
}

/// A loaded ensemble: header plus instances in file order.
#[derive(Clone, Debug)]
pub struct Ensemble<T> {
    pub header: EnsembleHeader,
    pub instances: Vec<ProblemInstance<T>>,
}

impl EnsembleHeader {
    pub fn for_spec(spec: &EnsembleSpec) -> Self {
        Self {
            kind: spec.kind,
            n: spec.n,
            kappa_spec: spec.kappa,
            count: spec.count,
            base_seed: spec.base_seed,
            format_version: FORMAT_VERSION,
        }
    }
}

pub fn ensemble_to_json<T: Real>(header: &EnsembleHeader, instances: &[ProblemInstance<T>]) -> Result<String> {
    let records = instances
        .iter()
        .map(|inst| InstanceRecord {
            id: inst.id.clone(),
            seed: inst.seed,
            kappa_measured: inst.kappa_measured.to_f64_lossy(),
            retries: inst.retries,
            entries: inst.a.as_slice().iter().map(|x| x.to_f64_lossy()).collect(),
            b: inst.b.as_slice().iter().map(|x| x.to_f64_lossy()).collect(),
        })
        .collect();
    let out = FileOut {
        header,
        instances: records,
    };
    serde_json::to_string_pretty(&out).map_err(|e| Error::parse("ensemble", e.to_string()))
}

pub fn save_ensemble<T: Real>(path: &Path, header: &EnsembleHeader, instances: &[ProblemInstance<T>]) -> Result<()> {
    let text = ensemble_to_json(header, instances)?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_ensemble<T: Real>(path: &Path) -> Result<Ensemble<T>> {
    let text = fs::read_to_string(path)?;
    ensemble_from_json(&text)
}

pub fn ensemble_from_json<T: Real>(text: &str) -> Result<Ensemble<T>> {
    let value: serde_json::Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) if e.is_eof() => return Err(truncation_error(text, &e)),
        Err(e) => {
            return Err(Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string()));
        }
    };
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse("top level", "expected an object with header and instances"))?;
    let header_v = obj
        .get("header")
        .ok_or_else(|| Error::parse("header", "missing section `header`"))?;
    let header: EnsembleHeader =
        serde_json::from_value(header_v.clone()).map_err(|e| Error::parse("header", e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::parse(
            "header.format_version",
            format!("unsupported version {}", header.format_version),
        ));
    }
    let list = obj
        .get("instances")
        .ok_or_else(|| Error::parse("instances", "missing section `instances`"))?
        .as_array()
        .ok_or_else(|| Error::parse("instances", "expected an array"))?;
    if list.len() != header.count {
        return Err(Error::parse(
            "instances",
            format!("header declares {} instances, found {}", header.count, list.len()),
        ));
    }
    let n = header.n;
    let mut instances = Vec::with_capacity(list.len());
    for (i, v) in list.iter().enumerate() {
        let loc = |field: &str| format!("instances[{i}].{field}");
        let rec: InstanceRecord =
            serde_json::from_value(v.clone()).map_err(|e| Error::parse(format!("instances[{i}]"), e.to_string()))?;
        if rec.entries.len() != n * n {
            return Err(Error::parse(
                loc("entries"),
                format!("expected {} entries, found {}", n * n, rec.entries.len()),
            ));
        }
        if rec.b.len() != n {
            return Err(Error::parse(loc("b"), format!("expected {} entries, found {}", n, rec.b.len())));
        }
        let a = DenseMatrix::from_row_major(n, n, rec.entries.into_iter().map(T::lit).collect())
            .map_err(|e| Error::parse(loc("entries"), e.to_string()))?;
        let b = StateVector::new(rec.b.into_iter().map(T::lit).collect())
            .map_err(|e| Error::parse(loc("b"), e.to_string()))?;
        instances.push(ProblemInstance {
            id: rec.id,
            kind: header.kind,
            a,
            b,
            kappa_spec: header.kappa_spec,
            kappa_measured: T::lit(rec.kappa_measured),
            seed: rec.seed,
            retries: rec.retries,
        });
    }
    Ok(Ensemble { header, instances })
}

fn truncation_error(text: &str, e: &serde_json::Error) -> Error {
    let location = format!("line {}, column {}", e.line(), e.column());
    let section = if !text.contains("\"header\"") {
        "header"
    } else if !text.contains("\"instances\"") {
        "instances"
    } else {
        // header is written first, so a truncated tail sits in the instances
        let tail = &text[text.find("\"instances\"").unwrap_or(0)..];
        if tail.contains("\"id\"") || tail.contains('[') {
            "instances"
        } else {
            "header"
        }
    };
    let message = if text.contains(&format!("\"{section}\"")) {
        format!("file truncated inside section `{section}` ({location})")
    } else {
        format!("file truncated: missing section `{section}` ({location})")
    };
    Error::Parse {
        location: section.to_string(),
        message,
    }
}

/// `id,kappa_measured,nnz` per instance.
pub fn summary_csv<T: Real>(instances: &[ProblemInstance<T>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "kappa_measured", "nnz"])
        .map_err(|e| Error::parse("csv", e.to_string()))?;
    for inst in instances {
        w.write_record([
            inst.id.clone(),
            format!("{}", inst.kappa_measured.to_f64_lossy()),
            inst.a.count_nonzero().to_string(),
        ])
        .map_err(|e| Error::parse("csv", e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse("csv", e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::parse("csv", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (EnsembleHeader, Vec<ProblemInstance<f64>>) {
        let spec = EnsembleSpec::dense(InstanceKind::NonHermitian, 4, 10.0, 3, 5);
        (EnsembleHeader::for_spec(&spec), spec.generate().unwrap())
    }

    #[test]
    fn round_trip_is_exact() {
        let (h, insts) = small();
        let text = ensemble_to_json(&h, &insts).unwrap();
        let back: Ensemble<f64> = ensemble_from_json(&text).unwrap();
        assert_eq!(back.header, h);
        for (a, b) in insts.iter().zip(&back.instances) {
            assert_eq!(a.a, b.a);
            assert_eq!(a.b, b.b);
            assert_eq!(a.kappa_measured, b.kappa_measured);
            assert_eq!(a.id, b.id);
        }
    }

    #[test]
    fn truncation_names_section() {
        let (h, insts) = small();
        let text = ensemble_to_json(&h, &insts).unwrap();
        let cut = &text[..text.len() / 2];
        match ensemble_from_json::<f64>(cut) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "instances"),
            other => panic!("{other:?}"),
        }
        let head_only = &text[..text.find("\"instances\"").unwrap()];
        match ensemble_from_json::<f64>(head_only) {
            Err(Error::Parse { location, message }) => {
                assert_eq!(location, "instances");
                assert!(message.contains("missing"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_entry_count_names_field() {
        let (h, insts) = small();
        let text = ensemble_to_json(&h, &insts).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["instances"][1]["b"].as_array_mut().unwrap().pop();
        match ensemble_from_json::<f64>(&v.to_string()) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "instances[1].b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_summary_has_row_per_instance() {
        let (_, insts) = small();
        let csv = summary_csv(&insts).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("id,kappa_measured,nnz"));
    }
}
