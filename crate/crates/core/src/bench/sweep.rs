//! Δ sweeps: calibrate stage 1 at each threshold error, add the filter for
//! each final error, and pick the cheapest Δ by monotone interpolation.

use serde::{Deserialize, Serialize};

use super::cost::{filter_cost, total_cost, CostAssumptions, FilterCost};
use crate::error::{Error, Result};
use crate::instance::{InstanceKind, ProblemInstance};
use crate::linalg::infidelity_from_bures;
use crate::norm_search::{CalibrationMode, Calibrator};
use crate::scalar::Real;

/// Points evaluated between the smallest and largest Δ when locating the
/// minimum.
pub const REFINEMENT_POINTS: usize = 200;

/// Monotone piecewise-cubic (Fritsch-Carlson) interpolant.
#[derive(Clone, Debug)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing, at least two points.
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::domain("interpolation", format!("{n} abscissae, {} values", y.len())));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("interpolation", "abscissae must increase strictly"));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = s[0];
            d[1] = s[0];
        } else {
            for k in 1..n - 1 {
                if s[k - 1] * s[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / s[k - 1] + w2 / s[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], s[0], s[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

// three-point end derivative, clipped to keep the shape
fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub delta: f64,
    pub total: f64,
    /// The minimum sits at the smallest or largest Δ tried.
    pub boundary: bool,
}

/// Minimiser of the total cost over `[min Δ, max Δ]`, interpolating in
/// `ln Δ`. Grid points may come in any order.
pub fn recommend_delta(deltas: &[f64], totals: &[f64]) -> Result<Recommendation> {
    if deltas.len() != totals.len() {
        return Err(Error::DimensionMismatch {
            expected: deltas.len(),
            actual: totals.len(),
        });
    }
    let mut pts: Vec<(f64, f64)> = deltas.iter().copied().zip(totals.iter().copied()).collect();
    if pts.iter().any(|&(d, c)| !(d > 0.0) || !c.is_finite()) {
        return Err(Error::domain("sweep", "threshold errors must be positive and totals finite"));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let interp = Pchip::new(&x, &y)?;
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let step = (hi - lo) / (REFINEMENT_POINTS - 1) as f64;
    let mut best = (lo, interp.eval(lo), 0usize);
    for i in 1..REFINEMENT_POINTS {
        let t = if i == REFINEMENT_POINTS - 1 { hi } else { lo + step * i as f64 };
        let v = interp.eval(t);
        if v < best.1 {
            best = (t, v, i);
        }
    }
    // never report more than the best grid point
    let (gi, gv) = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("at least two points");
    let (delta, total, boundary) = if gv <= best.1 {
        (pts[gi].0, gv, gi == 0 || gi == pts.len() - 1)
    } else {
        (best.0.exp(), best.1, best.2 == 0 || best.2 == REFINEMENT_POINTS - 1)
    };
    Ok(Recommendation { delta, total, boundary })
}

/// One instance at one Δ (and one final error, when filtering). `kappa` is
/// the ensemble mean, so records group by ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub kappa: f64,
    pub delta: f64,
    pub epsilon: Option<f64>,
    pub id: String,
    pub stage1_cost: f64,
    pub stage1_error: f64,
    pub total: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaFlag {
    pub delta: f64,
    pub reason: String,
}

/// Total cost against Δ for one final error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCurve {
    pub epsilon: f64,
    /// Ensemble mean per grid point; `None` where calibration failed.
    pub totals: Vec<Option<f64>>,
    pub recommendation: Option<Recommendation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: InstanceKind,
    pub dimension: usize,
    pub kappa: f64,
    pub mode: CalibrationMode,
    pub assumptions: CostAssumptions,
    pub delta_grid: Vec<f64>,
    pub etas: Vec<Option<f64>>,
    pub stage1_costs: Vec<Option<f64>>,
    pub stage1_errors: Vec<Option<f64>>,
    pub curves: Vec<EpsilonCurve>,
    pub flagged: Vec<DeltaFlag>,
    /// Sorted by `(κ, Δ, ε, id)`.
    pub records: Vec<SweepRecord>,
}

impl SweepReport {
    pub fn is_partial(&self) -> bool {
        self.stage1_costs.iter().any(Option::is_none)
    }

    pub fn curve(&self, epsilon: f64) -> Option<&EpsilonCurve> {
        self.curves.iter().find(|c| (c.epsilon - epsilon).abs() <= 1e-12 * epsilon)
    }
}

pub fn validate_grid(delta_grid: &[f64], epsilons: &[f64]) -> Result<()> {
    if delta_grid.len() < 3 {
        return Err(Error::Validation(format!("Δ grid has {} points, need at least 3", delta_grid.len())));
    }
    if let Some(d) = delta_grid.iter().find(|&&d| !(d > 0.0 && d < 0.5)) {
        return Err(Error::Validation(format!("Δ = {d} not in (0, 0.5)")));
    }
    let dmin = delta_grid.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(e) = epsilons.iter().find(|&&e| !(e > 0.0 && e < dmin)) {
        return Err(Error::Validation(format!("ε = {e} not in (0, {dmin})")));
    }
    Ok(())
}

/// Runs the sweep. A Δ whose calibration is infeasible is flagged and left
/// out of the interpolation.
pub fn sweep_delta<T: Real>(
    ensemble: &[ProblemInstance<T>],
    delta_grid: &[f64],
    epsilons: &[f64],
    mode: CalibrationMode,
    assumptions: CostAssumptions,
) -> Result<SweepReport> {
    validate_grid(delta_grid, epsilons)?;
    let calibrator = Calibrator::new(ensemble, mode)?;
    let n_inst = ensemble.len() as f64;
    let kappa = ensemble.iter().map(|i| i.kappa_measured.to_f64_lossy()).sum::<f64>() / n_inst;
    let mut etas = Vec::new();
    let mut stage1_costs = Vec::new();
    let mut stage1_errors = Vec::new();
    let mut flagged = Vec::new();
    let mut records = Vec::new();
    let mut totals = vec![Vec::with_capacity(delta_grid.len()); epsilons.len()];

    for &delta in delta_grid {
        let cal = match calibrator.calibrate(delta) {
            Ok(c) => c,
            Err(e @ (Error::InfeasibleTarget { .. } | Error::Domain { .. })) => {
                flagged.push(DeltaFlag {
                    delta,
                    reason: e.to_string(),
                });
                etas.push(None);
                stage1_costs.push(None);
                stage1_errors.push(None);
                totals.iter_mut().for_each(|t| t.push(None));
                continue;
            }
            Err(e) => return Err(e),
        };
        if cal.saturated {
            flagged.push(DeltaFlag {
                delta,
                reason: format!("saturated at η = {}", cal.eta),
            });
        }
        etas.push(Some(cal.eta));
        stage1_costs.push(Some(cal.mean_cost));
        stage1_errors.push(Some(cal.mean_error));
        for s in &cal.per_instance {
            records.push(SweepRecord {
                kappa,
                delta,
                epsilon: None,
                id: s.id.clone(),
                stage1_cost: s.cost,
                stage1_error: s.bures_delta,
                total: None,
            });
        }
        for (j, &eps) in epsilons.iter().enumerate() {
            let mut sum = 0.0;
            for s in &cal.per_instance {
                let mu_sq = infidelity_from_bures(s.bures_delta);
                let filter = match filter_cost(mu_sq, eps, s.kappa, assumptions.early_halving) {
                    Ok(f) => f,
                    // this instance already meets the final error
                    Err(Error::FilterUnnecessary { .. }) => FilterCost::NONE,
                    Err(e) => return Err(e),
                };
                let total = total_cost(s.ua_calls, s.p_succ, &filter, assumptions)?.expected_total;
                sum += total;
                records.push(SweepRecord {
                    kappa,
                    delta,
                    epsilon: Some(eps),
                    id: s.id.clone(),
                    stage1_cost: s.cost,
                    stage1_error: s.bures_delta,
                    total: Some(total),
                });
            }
            totals[j].push(Some(sum / n_inst));
        }
    }

    let curves = epsilons
        .iter()
        .zip(totals)
        .map(|(&epsilon, totals)| {
            let (d, c): (Vec<f64>, Vec<f64>) = delta_grid
                .iter()
                .zip(&totals)
                .filter_map(|(&d, t)| t.map(|t| (d, t)))
                .unzip();
            let recommendation = if d.len() >= 2 { Some(recommend_delta(&d, &c)?) } else { None };
            Ok(EpsilonCurve {
                epsilon,
                totals,
                recommendation,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    sort_records(&mut records);
    Ok(SweepReport {
        kind: ensemble[0].kind,
        dimension: ensemble[0].dimension(),
        kappa,
        mode,
        assumptions,
        delta_grid: delta_grid.to_vec(),
        etas,
        stage1_costs,
        stage1_errors,
        curves,
        flagged,
        records,
    })
}

pub(crate) fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| {
        a.kappa
            .total_cmp(&b.kappa)
            .then(a.delta.total_cmp(&b.delta))
            .then(a.epsilon.unwrap_or(-1.0).total_cmp(&b.epsilon.unwrap_or(-1.0)))
            .then(a.id.cmp(&b.id))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::EnsembleSpec;

    #[test]
    fn pchip_reproduces_nodes_and_lines() {
        let x = [0.0, 1.0, 2.5, 4.0];
        let y = [1.0, 3.0, 6.0, 9.0];
        let p = Pchip::new(&x, &y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((p.eval(*a) - b).abs() < 1e-12);
        }
        let line = Pchip::new(&x, &[0.0, 2.0, 5.0, 8.0]).unwrap();
        for t in [0.3, 1.7, 3.1] {
            assert!((line.eval(t) - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn pchip_stays_monotone_on_monotone_data() {
        let x = [0.0, 1.0, 1.1, 3.0, 3.2];
        let y = [0.0, 0.1, 5.0, 5.1, 9.0];
        let p = Pchip::new(&x, &y).unwrap();
        let mut prev = p.eval(0.0);
        for i in 1..=320 {
            let v = p.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn convex_minimum_found_near_analytic_point() {
        // (ln Δ − ln 0.17)² + 1 on a geometric grid
        let grid: Vec<f64> = (0..9).map(|i| 0.05 * 1.18f64.powi(i)).collect();
        let cost: Vec<f64> = grid.iter().map(|d| (d.ln() - 0.17f64.ln()).powi(2) + 1.0).collect();
        let r = recommend_delta(&grid, &cost).unwrap();
        let half_spacing = 0.5 * 1.18f64.ln();
        assert!((r.delta.ln() - 0.17f64.ln()).abs() <= half_spacing + 1e-12);
        assert!(!r.boundary);
        assert!(cost.iter().all(|&c| r.total <= c + 1e-9));
    }

    #[test]
    fn two_point_sweep_flags_boundary() {
        let r = recommend_delta(&[0.3, 0.1], &[50.0, 80.0]).unwrap();
        assert_eq!(r.delta, 0.3);
        assert!(r.boundary);
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[0.3, 0.2], &[0.01]).is_err());
        assert!(validate_grid(&[0.3, 0.2, 0.6], &[0.01]).is_err());
        assert!(validate_grid(&[0.3, 0.2, 0.1], &[0.1]).is_err());
        assert!(validate_grid(&[0.3, 0.2, 0.1], &[0.01, 0.001]).is_ok());
    }

    #[test]
    fn small_known_norm_sweep() {
        let ens = EnsembleSpec::dense(InstanceKind::NonHermitian, 8, 20.0, 6, 11)
            .generate::<f64>()
            .unwrap();
        let r = sweep_delta(
            &ens,
            &[0.3, 0.2, 0.1],
            &[0.01, 0.001],
            CalibrationMode::KnownNorm,
            CostAssumptions {
                early_halving: true,
                doubled_stage1: false,
            },
        )
        .unwrap();
        assert!(!r.is_partial());
        assert_eq!(r.records.len(), 3 * 6 * 3);
        for c in &r.curves {
            let rec = c.recommendation.unwrap();
            assert!(rec.delta >= 0.1 && rec.delta <= 0.3);
            for t in c.totals.iter().flatten() {
                assert!(rec.total <= t + 1e-9);
                assert!(*t >= r.stage1_costs.iter().flatten().cloned().fold(f64::INFINITY, f64::min));
            }
        }
        let fine = r.curve(0.001).unwrap().recommendation.unwrap().total;
        let coarse = r.curve(0.01).unwrap().recommendation.unwrap().total;
        assert!(fine >= coarse - 1e-9);
        let keys: Vec<_> = r.records.iter().map(|x| (x.delta, x.epsilon.unwrap_or(-1.0))).collect();
        assert!(keys.windows(2).all(|w| w[0].0 <= w[1].0));
    }
}
