//! Cost ratio `ρ = cost_baseline / cost_shortcut` on matched `(κ, Δ)`.

use serde::{Deserialize, Serialize};

use super::baseline::{BaselineMethod, BaselineRecord};
use super::sweep::SweepReport;
use crate::error::{Error, Result};

/// A shortcut stage-1 cost at one `(κ, Δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortcutPoint {
    pub kappa: f64,
    pub delta: f64,
    pub cost: f64,
}

impl SweepReport {
    /// Calibrated stage-1 costs, one per feasible grid point.
    pub fn stage1_points(&self) -> Vec<ShortcutPoint> {
        self.delta_grid
            .iter()
            .zip(&self.stage1_costs)
            .filter_map(|(&delta, c)| {
                c.map(|cost| ShortcutPoint {
                    kappa: self.kappa,
                    delta,
                    cost,
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// Count each baseline stage-1 call twice; filter calls are not doubled.
    pub double_stage1: bool,
    /// Relative tolerance when matching `κ`.
    pub kappa_rtol: f64,
    /// Absolute tolerance when matching `Δ`.
    pub delta_atol: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            double_stage1: false,
            kappa_rtol: 1e-3,
            delta_atol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: BaselineMethod,
    pub kappa: f64,
    pub delta: f64,
    pub baseline_stage1: f64,
    pub baseline_filter: f64,
    /// Stage 1 (doubled when requested) plus filter.
    pub baseline_cost: f64,
    pub shortcut_cost: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub double_stage1: bool,
    /// Sorted by `(κ, Δ, method)`.
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn find(&self, method: BaselineMethod, kappa: f64, delta: f64) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && (r.kappa - kappa).abs() <= 1e-9 * kappa && (r.delta - delta).abs() <= 1e-9)
    }
}

pub fn compare(shortcut: &[ShortcutPoint], baseline: &[BaselineRecord], opts: &CompareOptions) -> Result<Comparison> {
    compare_with(shortcut, baseline, opts, |_| 0.0)
}

/// As [`compare`], adding `filter(record)` calls to each baseline after the
/// optional doubling.
pub fn compare_with(
    shortcut: &[ShortcutPoint],
    baseline: &[BaselineRecord],
    opts: &CompareOptions,
    filter: impl Fn(&BaselineRecord) -> f64,
) -> Result<Comparison> {
    let mut rows = Vec::new();
    for b in baseline {
        let Some(s) = shortcut.iter().find(|s| {
            (s.kappa - b.kappa).abs() <= opts.kappa_rtol * b.kappa && (s.delta - b.delta).abs() <= opts.delta_atol
        }) else {
            continue;
        };
        if !(s.cost > 0.0) {
            return Err(Error::Validation(format!("shortcut cost {} at κ = {} must be positive", s.cost, s.kappa)));
        }
        let stage1 = if opts.double_stage1 { 2.0 * b.cost } else { b.cost };
        let extra = filter(b);
        let baseline_cost = stage1 + extra;
        rows.push(ComparisonRow {
            method: b.method,
            kappa: b.kappa,
            delta: b.delta,
            baseline_stage1: stage1,
            baseline_filter: extra,
            baseline_cost,
            shortcut_cost: s.cost,
            rho: baseline_cost / s.cost,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyComparison);
    }
    rows.sort_by(|a, b| {
        a.kappa
            .total_cmp(&b.kappa)
            .then(a.delta.total_cmp(&b.delta))
            .then((a.method as u8).cmp(&(b.method as u8)))
    });
    Ok(Comparison {
        double_stage1: opts.double_stage1,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qw(kappa: f64, delta: f64, cost: f64) -> BaselineRecord {
        BaselineRecord {
            method: BaselineMethod::QW,
            kappa,
            delta,
            cost,
            mean_error: delta,
            alpha_avg: None,
        }
    }

    fn sc(kappa: f64, delta: f64, cost: f64) -> ShortcutPoint {
        ShortcutPoint { kappa, delta, cost }
    }

    #[test]
    fn ratio_on_matched_points() {
        let c = compare(
            &[sc(20.0, 0.3, 150.0), sc(40.0, 0.3, 400.0)],
            &[qw(20.0, 0.3, 84.0), qw(20.0, 0.2, 112.0)],
            &CompareOptions::default(),
        )
        .unwrap();
        assert_eq!(c.rows.len(), 1);
        assert!((c.rows[0].rho - 84.0 / 150.0).abs() < 1e-15);
    }

    #[test]
    fn no_overlap_is_an_error() {
        let e = compare(&[sc(20.0, 0.3, 1.0)], &[qw(40.0, 0.3, 1.0)], &CompareOptions::default()).unwrap_err();
        assert!(matches!(e, Error::EmptyComparison));
    }

    #[test]
    fn doubling_leaves_filter_alone() {
        let s = [sc(20.0, 0.3, 100.0)];
        let b = [qw(20.0, 0.3, 80.0)];
        let plain = CompareOptions::default();
        let doubled = CompareOptions {
            double_stage1: true,
            ..plain
        };
        let one = compare_with(&s, &b, &plain, |_| 30.0).unwrap();
        let two = compare_with(&s, &b, &doubled, |_| 30.0).unwrap();
        assert_eq!(one.rows[0].baseline_cost, 110.0);
        assert_eq!(two.rows[0].baseline_cost, 190.0);
        let bare = compare(&s, &b, &doubled).unwrap();
        assert_eq!(bare.rows[0].rho, 2.0 * compare(&s, &b, &plain).unwrap().rows[0].rho);
    }

    #[test]
    fn ratio_is_scale_free() {
        let c1 = compare(&[sc(20.0, 0.3, 150.0)], &[qw(20.0, 0.3, 84.0)], &CompareOptions::default()).unwrap();
        let c2 = compare(&[sc(20.0, 0.3, 150.0 * 7.5)], &[qw(20.0, 0.3, 84.0 * 7.5)], &CompareOptions::default()).unwrap();
        assert!((c1.rows[0].rho - c2.rows[0].rho).abs() < 1e-15);
    }
}
