//! Unknown-norm regime: the norm guess `t` is drawn log-uniformly from
//! `[1, κ]`, and success probability and infidelity are averaged over `τ = ln t`
//! with Clenshaw-Curtis quadrature. Also hosts the ensemble-wide `η`
//! calibration used by both regimes.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{augment_with, reflection_spec, solve, KnownNormEnsemble, SpectralProfile};
use crate::error::{Error, Result};
use crate::filter::order_for;
use crate::instance::{InstanceKind, ProblemInstance};
use crate::linalg::{bures_from_infidelity, ClenshawCurtis};
use crate::scalar::Real;

pub const DEFAULT_NODES: usize = 30;
pub const MIN_NODES: usize = 8;
pub const ETA_MIN: f64 = 1e-6;
pub const ETA_MAX: f64 = 0.9;
pub const MAX_ITERATIONS: usize = 40;
/// Lower edge of the accepted band, as a fraction of the target.
pub const BAND_LOWER: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSearchResult {
    pub q_succ: f64,
    pub mu_sq_avg: f64,
    pub bures_delta: f64,
    pub ua_calls: usize,
    pub nodes: usize,
    /// `(Q_L, μ_L², Q_R, μ_R²)` at `t = 1` and `t = κ`.
    pub endpoints: (f64, f64, f64, f64),
}

impl NormSearchResult {
    /// Expected stage-1 calls per accepted sample.
    pub fn cost(&self) -> f64 {
        self.ua_calls as f64 / self.q_succ
    }
}

/// `(Q_L, μ_L², Q_R, μ_R²)` at `t = 1` and `t = κ`.
pub type Endpoints<T> = (T, T, T, T);

/// Success and conditional infidelity averaged over `τ ∈ [0, ln κ]`, with
/// unit endpoint masses and weight 2 on the interior integral.
///
/// `profile` maps each rule node `τ` to `(Q_t, μ_t²)`; the first and last
/// nodes are the endpoints. Returns `(q_succ, μ²_avg, endpoints)`.
pub fn average_profile<T: Real>(
    rule: &ClenshawCurtis<T>,
    profile: impl Fn(usize, T) -> Result<(T, T)>,
) -> Result<(T, T, Endpoints<T>)> {
    let nodes = rule.nodes();
    let mut q = Vec::with_capacity(nodes.len());
    let mut qm = Vec::with_capacity(nodes.len());
    for (i, &tau) in nodes.iter().enumerate() {
        let (qt, mt) = profile(i, tau)?;
        q.push(qt);
        qm.push(qt * mt);
    }
    let (lo, hi) = rule.interval();
    let norm = T::lit(2.0) * (hi - lo) + T::lit(2.0);
    let last = nodes.len() - 1;
    let two = T::lit(2.0);
    let q_succ = (q[0] + q[last] + two * rule.integrate_values(&q)?) / norm;
    if !(q_succ > T::zero()) {
        return Err(Error::DegenerateSuccess {
            p_succ: q_succ.to_f64_lossy(),
        });
    }
    let mu_sq = (qm[0] + qm[last] + two * rule.integrate_values(&qm)?) / (q_succ * norm);
    let ends = (q[0], qm[0] / q[0].max(T::min_positive_value()), q[last], qm[last] / q[last].max(T::min_positive_value()));
    Ok((q_succ, mu_sq.max(T::zero()).min(T::one()), ends))
}

/// Spectral profiles of one instance at every quadrature node.
#[derive(Clone, Debug)]
pub struct UnknownNormCache<T> {
    pub id: String,
    pub kappa: T,
    rule: ClenshawCurtis<T>,
    profiles: Vec<SpectralProfile<T>>,
}

impl<T: Real> UnknownNormCache<T> {
    pub fn build(inst: &ProblemInstance<T>, nodes: usize) -> Result<Self> {
        if nodes < MIN_NODES {
            return Err(Error::domain("quadrature nodes", format!("{nodes} < {MIN_NODES}")));
        }
        let kappa = inst.kappa_measured;
        if !(kappa > T::one()) {
            return Err(Error::domain("kappa", format!("{kappa} must exceed 1 for a norm search")));
        }
        let rule = ClenshawCurtis::new(nodes, T::zero(), kappa.ln())?;
        let sol = solve(inst)?;
        let last = nodes - 1;
        let profiles = rule
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &tau)| {
                let t = match i {
                    0 => T::one(),
                    i if i == last => kappa,
                    _ => tau.exp().max(T::one()).min(kappa),
                };
                SpectralProfile::build(augment_with(inst, &sol, t)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            id: inst.id.clone(),
            kappa,
            rule,
            profiles,
        })
    }

    pub fn nodes(&self) -> usize {
        self.profiles.len()
    }

    pub fn evaluate(&self, eta: T) -> Result<NormSearchResult> {
        let spec = reflection_spec(self.kappa, eta)?;
        let (q, mu_sq, ends) = average_profile(&self.rule, |i, _| {
            let s = self.profiles[i].evaluate(&spec);
            Ok((s.p_succ, s.infidelity))
        })?;
        Ok(NormSearchResult {
            q_succ: q.to_f64_lossy(),
            mu_sq_avg: mu_sq.to_f64_lossy(),
            bures_delta: bures_from_infidelity(mu_sq)?.to_f64_lossy(),
            ua_calls: spec.degree(),
            nodes: self.nodes(),
            endpoints: (
                ends.0.to_f64_lossy(),
                ends.1.to_f64_lossy(),
                ends.2.to_f64_lossy(),
                ends.3.to_f64_lossy(),
            ),
        })
    }
}

pub fn evaluate_unknown_norm<T: Real>(inst: &ProblemInstance<T>, eta: T, nodes: usize) -> Result<NormSearchResult> {
    UnknownNormCache::build(inst, nodes)?.evaluate(eta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CalibrationMode {
    /// Error is the phase-fixed distance with `t = ‖x‖`.
    KnownNorm,
    /// Error is the Bures distance of the `t`-averaged state.
    UnknownNorm { nodes: usize },
}

/// Error and cost of one instance at the calibrated `η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub id: String,
    /// Phase-fixed distance (known norm) or Bures distance (unknown norm).
    pub bures_delta: f64,
    pub ua_calls: usize,
    /// Success probability (known norm) or `q_succ` (unknown norm).
    pub p_succ: f64,
    pub cost: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub eta: f64,
    pub mean_error: f64,
    pub mean_cost: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
    /// Mean error lies in `[0.9, 1]·target`.
    pub in_band: bool,
    /// The upper end of the bracket already meets the target.
    pub saturated: bool,
    pub per_instance: Vec<InstanceScore>,
}

/// Per-instance evaluators for a calibration run, with scores memoised on
/// the vector of filter orders (the only way `η` enters).
pub struct Calibrator<T> {
    mode: CalibrationMode,
    kappas: Vec<T>,
    known: Option<KnownNormEnsemble<T>>,
    unknown: Vec<UnknownNormCache<T>>,
    memo: Mutex<HashMap<Vec<usize>, Vec<InstanceScore>>>,
}

impl<T: Real> Calibrator<T> {
    pub fn new(ensemble: &[ProblemInstance<T>], mode: CalibrationMode) -> Result<Self> {
        if ensemble.is_empty() {
            return Err(Error::domain("ensemble", "empty"));
        }
        let kappas = ensemble.iter().map(|i| i.kappa_measured).collect();
        let (known, unknown) = match mode {
            CalibrationMode::KnownNorm => (Some(KnownNormEnsemble::build(ensemble)?), Vec::new()),
            CalibrationMode::UnknownNorm { nodes } => (
                None,
                ensemble
                    .par_iter()
                    .map(|i| UnknownNormCache::build(i, nodes))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(Self {
            mode,
            kappas,
            known,
            unknown,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn mode(&self) -> CalibrationMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }

    fn orders(&self, eta: f64) -> Result<Vec<usize>> {
        self.kappas
            .iter()
            .map(|&k| Ok(reflection_spec(k, T::lit(eta))?.order))
            .collect()
    }

    /// Scores of every instance at `eta`.
    pub fn scores(&self, eta: f64) -> Result<Vec<InstanceScore>> {
        let key = self.orders(eta)?;
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(hit.clone());
        }
        let eta_t = T::lit(eta);
        let scores = match (&self.known, self.mode) {
            (Some(known), _) => known
                .profiles
                .par_iter()
                .zip(&known.ids)
                .map(|(p, id)| {
                    let spec = reflection_spec(p.kappa, eta_t)?;
                    let s = p.evaluate(&spec);
                    let p_succ = s.p_succ.to_f64_lossy();
                    Ok(InstanceScore {
                        id: id.clone(),
                        bures_delta: s.error_l2.to_f64_lossy(),
                        ua_calls: spec.degree(),
                        p_succ,
                        cost: spec.degree() as f64 / p_succ,
                        kappa: p.kappa.to_f64_lossy(),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            (None, _) => self
                .unknown
                .par_iter()
                .map(|c| {
                    let r = c.evaluate(eta_t)?;
                    Ok(InstanceScore {
                        id: c.id.clone(),
                        bures_delta: r.bures_delta,
                        ua_calls: r.ua_calls,
                        p_succ: r.q_succ,
                        cost: r.cost(),
                        kappa: c.kappa.to_f64_lossy(),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        self.memo.lock().expect("memo lock").insert(key, scores.clone());
        Ok(scores)
    }

    pub fn mean_error(&self, eta: f64) -> Result<f64> {
        Ok(mean_of(&self.scores(eta)?, |s| s.bures_delta))
    }

    /// Largest `η ∈ [1e-6, 0.9]` whose ensemble mean error does not exceed
    /// `target`.
    pub fn calibrate(&self, target: f64) -> Result<CalibrationResult> {
        let b = bisect_eta(|eta| self.mean_error(eta), target)?;
        let eta = if b.saturated {
            b.eta
        } else {
            self.widest_eta(b.bracket.0, b.bracket.1)?
        };
        self.finish(eta, target, b.iterations, b.bracket, b.saturated)
    }

    /// Within a bracket whose lower end meets the target, the largest `η`
    /// that still maps to the same filter orders as the lower end.
    fn widest_eta(&self, lo: f64, hi: f64) -> Result<f64> {
        let key = self.orders(lo)?;
        let (mut a, mut b) = (lo.ln(), hi.ln());
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if self.orders(mid.exp())? == key {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(a.exp())
    }

    fn finish(&self, eta: f64, target: f64, iterations: usize, bracket: (f64, f64), saturated: bool) -> Result<CalibrationResult> {
        let per_instance = self.scores(eta)?;
        let mean_error = mean_of(&per_instance, |s| s.bures_delta);
        Ok(CalibrationResult {
            eta,
            mean_error,
            mean_cost: mean_of(&per_instance, |s| s.cost),
            iterations,
            bracket,
            in_band: mean_error <= target && mean_error >= BAND_LOWER * target,
            saturated,
            per_instance,
        })
    }
}

/// Outcome of [`bisect_eta`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bisection {
    pub eta: f64,
    pub iterations: usize,
    /// Last bracket: the lower end meets the target, the upper end does not.
    pub bracket: (f64, f64),
    pub saturated: bool,
}

/// Bisection on `ln η` over `[1e-6, 0.9]` for the largest `η` with
/// `objective(η) ≤ target`, assuming the objective is nondecreasing.
pub fn bisect_eta(mut objective: impl FnMut(f64) -> Result<f64>, target: f64) -> Result<Bisection> {
    if !(target > 1e-4 && target < 0.5) {
        return Err(Error::domain("target error", format!("{target} not in (1e-4, 0.5)")));
    }
    if objective(ETA_MAX)? <= target {
        return Ok(Bisection {
            eta: ETA_MAX,
            iterations: 0,
            bracket: (ETA_MAX, ETA_MAX),
            saturated: true,
        });
    }
    let lo_err = objective(ETA_MIN)?;
    if lo_err > target {
        return Err(Error::InfeasibleTarget { target, best: lo_err });
    }
    let (mut lo, mut hi) = (ETA_MIN.ln(), ETA_MAX.ln());
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if objective(mid.exp())? <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Bisection {
        eta: lo.exp(),
        iterations: MAX_ITERATIONS,
        bracket: (lo.exp(), hi.exp()),
        saturated: false,
    })
}

fn mean_of(scores: &[InstanceScore], f: impl Fn(&InstanceScore) -> f64) -> f64 {
    scores.iter().map(f).sum::<f64>() / scores.len().max(1) as f64
}

/// Builds the evaluators and calibrates in one call.
pub fn calibrate_eta<T: Real>(
    ensemble: &[ProblemInstance<T>],
    target: f64,
    mode: CalibrationMode,
) -> Result<CalibrationResult> {
    Calibrator::new(ensemble, mode)?.calibrate(target)
}

/// Serialised calibration outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub kappa: f64,
    pub dimension: usize,
    pub kind: InstanceKind,
    pub mode: CalibrationMode,
    pub target_delta: f64,
    pub eta: f64,
    pub mean_error: f64,
    pub mean_cost: f64,
    pub in_band: bool,
    pub saturated: bool,
    pub per_instance: Vec<InstanceScore>,
}

impl CalibrationReport {
    pub fn new<T: Real>(ensemble: &[ProblemInstance<T>], mode: CalibrationMode, target: f64, r: &CalibrationResult) -> Self {
        let kappa = ensemble.iter().map(|i| i.kappa_measured.to_f64_lossy()).sum::<f64>() / ensemble.len().max(1) as f64;
        Self {
            kappa,
            dimension: ensemble.first().map_or(0, |i| i.dimension()),
            kind: ensemble.first().map_or(InstanceKind::NonHermitian, |i| i.kind),
            mode,
            target_delta: target,
            eta: r.eta,
            mean_error: r.mean_error,
            mean_cost: r.mean_cost,
            in_band: r.in_band,
            saturated: r.saturated,
            per_instance: r.per_instance.clone(),
        }
    }
}

/// Bures error for each `η` (ascending) and the indices where it drops by
/// more than `1e-6` from the previous value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityProbe {
    pub etas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub violations: Vec<usize>,
}

pub fn monotonicity_probe<T: Real>(inst: &ProblemInstance<T>, etas: &[f64], nodes: usize) -> Result<MonotonicityProbe> {
    if etas.len() < 3 {
        return Err(Error::domain("probe", format!("{} eta values, need at least 3", etas.len())));
    }
    if etas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("probe", "eta values must be ascending"));
    }
    let cache = UnknownNormCache::build(inst, nodes)?;
    let deltas = etas
        .iter()
        .map(|&e| Ok(cache.evaluate(T::lit(e))?.bures_delta))
        .collect::<Result<Vec<_>>>()?;
    let violations = (1..deltas.len()).filter(|&i| deltas[i] < deltas[i - 1] - 1e-6).collect();
    Ok(MonotonicityProbe {
        etas: etas.to_vec(),
        deltas,
        violations,
    })
}

/// KR order for a given `η` at width `1/κ`; convenience for reports.
pub fn stage1_order(kappa: f64, eta: f64) -> Result<usize> {
    order_for(1.0 / kappa, eta)
}
