//! Matrix-level simulation of the solver.
//!
//! The block-encoding circuits are replaced by applying the filter
//! polynomials directly to the singular values of `G = (I − bbᵀ)A`, which
//! gives the exact post-selected state and success probability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{EdgeValue, FilterKind, FilterSpec};
use crate::instance::ProblemInstance;
use crate::linalg::{dot, norm, phase_fixed_distance, solve_with, svd, DenseMatrix, StateVector, SvdFactors};
use crate::scalar::Real;

/// Success probabilities below this are reported as degenerate.
pub const DEGENERATE_P_SUCC: f64 = 1e-14;
/// Slack on the upper end of the admissible norm-guess range.
const T_RANGE_SLACK: f64 = 1e-9;
/// Singular values this far below `1/κ` still count as outside the gap.
const GAP_SLACK: f64 = 1e-9;

/// Normalised solution of `A x = b` together with `‖x‖`.
#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub x_hat: StateVector<T>,
    pub norm_x: T,
}

pub fn solve<T: Real>(inst: &ProblemInstance<T>) -> Result<Solution<T>> {
    let f = svd(&inst.a)?;
    let x = solve_with(&inst.a, &f, &inst.b)?;
    let norm_x = x.norm();
    Ok(Solution {
        x_hat: x.scale(T::one() / norm_x),
        norm_x,
    })
}

/// `A_t = diag(A, 1/t)`, `b' = (b, 1)/√2` and the normalised solution
/// `x_t ∝ (x, t)`.
#[derive(Clone, Debug)]
pub struct AugmentedSystem<T> {
    pub t: T,
    pub a_t: DenseMatrix<T>,
    pub b_prime: StateVector<T>,
    pub x_t: StateVector<T>,
    /// `arctan(‖x‖/t)`
    pub theta_t: T,
    /// `x/‖x‖` in the original `n` coordinates.
    pub x_true: StateVector<T>,
    pub norm_x: T,
    pub kappa: T,
}

impl<T: Real> AugmentedSystem<T> {
    pub fn dim(&self) -> usize {
        self.a_t.rows()
    }
}

/// Augments `inst` with norm guess `t`, solving the system directly.
pub fn augment<T: Real>(inst: &ProblemInstance<T>, t: T) -> Result<AugmentedSystem<T>> {
    let sol = solve(inst)?;
    augment_with(inst, &sol, t)
}

/// As [`augment`] with a precomputed solution.
pub fn augment_with<T: Real>(inst: &ProblemInstance<T>, sol: &Solution<T>, t: T) -> Result<AugmentedSystem<T>> {
    let kappa = inst.kappa_measured;
    if !(t >= T::one() && t <= kappa * (T::one() + T::lit(T_RANGE_SLACK))) {
        return Err(Error::domain("norm guess", format!("t = {t} not in [1, {kappa}]")));
    }
    let n = inst.dimension();
    let m = n + 1;
    let mut a_t = DenseMatrix::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            a_t[(i, j)] = inst.a[(i, j)];
        }
    }
    a_t[(n, n)] = T::one() / t;

    let r = T::FRAC_1_SQRT_2();
    let mut bp: Vec<T> = inst.b.as_slice().iter().map(|&v| v * r).collect();
    bp.push(r);
    let b_prime = StateVector::new(bp)?;

    let theta_t = sol.norm_x.atan2(t);
    let (s, c) = theta_t.sin_cos();
    let mut xt: Vec<T> = sol.x_hat.as_slice().iter().map(|&v| v * s).collect();
    xt.push(c);
    Ok(AugmentedSystem {
        t,
        a_t,
        b_prime,
        x_t: StateVector::new(xt)?,
        theta_t,
        x_true: sol.x_hat.clone(),
        norm_x: sol.norm_x,
        kappa,
    })
}

/// `G = (I − bbᵀ)A` with its SVD.
#[derive(Clone, Debug)]
pub struct KernelOperator<T> {
    pub g: DenseMatrix<T>,
    pub svd: SvdFactors<T>,
    pub kernel_dim: usize,
    pub kappa: T,
}

impl<T: Real> KernelOperator<T> {
    /// Singular values below `1/(2κ)` are treated as kernel.
    pub fn kernel_threshold(&self) -> T {
        kernel_threshold(self.kappa)
    }

    /// Columns of `V` spanning the numerical kernel.
    pub fn kernel_vectors(&self) -> Vec<Vec<T>> {
        let k = self.svd.singular_values.len();
        (k - self.kernel_dim..k).map(|j| self.svd.right.column(j)).collect()
    }

    /// Squared norm of the component of `v` inside the kernel.
    pub fn kernel_weight(&self, v: &[T]) -> T {
        self.kernel_vectors().iter().map(|k| dot(k, v).powi(2)).sum()
    }

    /// Smallest singular value above the kernel threshold.
    pub fn smallest_nonzero(&self) -> T {
        let s = &self.svd.singular_values;
        s[s.len() - self.kernel_dim - 1]
    }

    /// `V p(Σ) Vᵀ v` for the selected filter.
    pub fn apply(&self, spec: &FilterSpec<T>, v: &[T]) -> Result<Vec<T>> {
        self.svd.apply_right_spectral(v, |s| spec.eval(s))
    }
}

fn kernel_threshold<T: Real>(kappa: T) -> T {
    T::one() / (T::lit(2.0) * kappa)
}

pub fn build_kernel_operator<T: Real>(a: &DenseMatrix<T>, b: &StateVector<T>, kappa: T) -> Result<KernelOperator<T>> {
    if a.rows() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: b.dim(),
        });
    }
    if !b.is_normalized() {
        return Err(Error::domain("kernel operator", format!("|b| = {} is not 1", b.norm())));
    }
    if !(kappa >= T::one()) {
        return Err(Error::domain("kappa", format!("{kappa} < 1")));
    }
    // (I - bbᵀ)A = A - b (Aᵀb)ᵀ
    let atb = a.tr_matvec(b.as_slice())?;
    let bs = b.as_slice();
    let g = DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] - bs[i] * atb[j]);
    let f = svd(&g)?;
    let threshold = kernel_threshold(kappa);
    let floor = T::one() / kappa - T::lit(GAP_SLACK);
    let mut kernel_dim = 0;
    for &s in &f.singular_values {
        if s < threshold {
            kernel_dim += 1;
        } else if s < floor {
            return Err(Error::GapViolation {
                sigma: s.to_f64_lossy(),
                threshold: threshold.to_f64_lossy(),
                floor: floor.to_f64_lossy(),
            });
        }
    }
    Ok(KernelOperator {
        g,
        svd: f,
        kernel_dim,
        kappa,
    })
}

/// Result of one filtered run.
#[derive(Clone, Debug)]
pub struct RunOutcome<T> {
    pub p_succ: T,
    pub output: StateVector<T>,
    pub error_l2: T,
    /// `1 − ⟨x̂, out⟩²`
    pub infidelity: T,
    pub ua_calls: usize,
    pub cost: T,
    pub eta: T,
    pub order: usize,
    pub t: T,
}

/// Serialised form of a [`RunOutcome`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub t: f64,
    pub eta: f64,
    pub l: usize,
    pub degree: usize,
    pub p_succ: f64,
    pub error_l2: f64,
    pub infidelity: f64,
    pub cost: f64,
}

impl<T: Real> RunOutcome<T> {
    pub fn record(&self, instance_id: &str) -> RunRecord {
        RunRecord {
            instance_id: instance_id.to_string(),
            t: self.t.to_f64_lossy(),
            eta: self.eta.to_f64_lossy(),
            l: self.order,
            degree: self.ua_calls,
            p_succ: self.p_succ.to_f64_lossy(),
            error_l2: self.error_l2.to_f64_lossy(),
            infidelity: self.infidelity.to_f64_lossy(),
            cost: self.cost.to_f64_lossy(),
        }
    }
}

/// `e²(1 − e²/4)`, the infidelity matching a phase-fixed distance `e`.
pub fn infidelity_from_distance<T: Real>(e: T) -> T {
    let e2 = e * e;
    e2 * (T::one() - e2 / T::lit(4.0))
}

/// Everything needed to rerun KR on one augmented system with a new `η`:
/// the SVD of `G_t` and the coefficients of `e_{m−1}` in its right basis.
#[derive(Clone, Debug)]
pub struct KrCache<T> {
    pub aug: AugmentedSystem<T>,
    pub kop: KernelOperator<T>,
    coeffs: Vec<T>,
}

impl<T: Real> KrCache<T> {
    pub fn new(aug: AugmentedSystem<T>) -> Result<Self> {
        let kop = build_kernel_operator(&aug.a_t, &aug.b_prime, aug.kappa)?;
        let mut e = vec![T::zero(); aug.dim()];
        e[aug.dim() - 1] = T::one();
        let coeffs = kop.svd.right.tr_matvec(&e)?;
        Ok(Self { aug, kop, coeffs })
    }

    /// Unnormalised final state (first `n` coordinates of `K(G_t) e_{m−1}`).
    pub fn raw_output(&self, spec: &FilterSpec<T>) -> Result<Vec<T>> {
        let scaled: Vec<T> = self
            .coeffs
            .iter()
            .zip(&self.kop.svd.singular_values)
            .map(|(&c, &s)| c * spec.eval_k(s))
            .collect();
        let mut psi = self.kop.svd.right.matvec(&scaled)?;
        psi.pop();
        Ok(psi)
    }

    /// `(p_succ, μ²)` without the degenerate-success check; `μ² = 1` when the
    /// output vanishes.
    pub fn profile(&self, spec: &FilterSpec<T>) -> Result<(T, T)> {
        let psi = self.raw_output(spec)?;
        let nrm = norm(&psi);
        let p = nrm * nrm;
        if nrm == T::zero() {
            return Ok((p, T::one()));
        }
        let out = StateVector::new(psi.iter().map(|&v| v / nrm).collect())?;
        let e = phase_fixed_distance(&out, &self.aug.x_true)?;
        Ok((p, infidelity_from_distance(e)))
    }

    pub fn run(&self, spec: &FilterSpec<T>) -> Result<RunOutcome<T>> {
        let psi = self.raw_output(spec)?;
        let nrm = norm(&psi);
        let p_succ = nrm * nrm;
        if !p_succ.is_finite() {
            return Err(Error::NonFinite("success probability"));
        }
        if p_succ < T::lit(DEGENERATE_P_SUCC) {
            return Err(Error::DegenerateSuccess {
                p_succ: p_succ.to_f64_lossy(),
            });
        }
        let output = StateVector::new(psi.iter().map(|&v| v / nrm).collect())?;
        let error_l2 = phase_fixed_distance(&output, &self.aug.x_true)?;
        let ua_calls = spec.degree();
        Ok(RunOutcome {
            p_succ,
            infidelity: infidelity_from_distance(error_l2),
            output,
            error_l2,
            ua_calls,
            cost: T::from_usize_lossy(ua_calls) / p_succ,
            eta: spec.eta,
            order: spec.order,
            t: self.aug.t,
        })
    }

    pub fn reflection_spec(&self, eta: T) -> Result<FilterSpec<T>> {
        reflection_spec(self.aug.kappa, eta)
    }
}

/// KR outcome summary without the output state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrSummary<T> {
    pub p_succ: T,
    pub error_l2: T,
    pub infidelity: T,
}

/// Compact spectral data of one augmented system: enough to evaluate KR for
/// any filter in `O(m)` without keeping the SVD factors.
#[derive(Clone, Debug)]
pub struct SpectralProfile<T> {
    pub t: T,
    pub kappa: T,
    sigma: Vec<T>,
    /// `Vᵀ e_{m−1}`
    along_e: Vec<T>,
    /// last row of `V`
    last_row: Vec<T>,
    /// `Vᵀ (x̂, 0)`
    along_x: Vec<T>,
}

impl<T: Real> SpectralProfile<T> {
    pub fn from_cache(cache: &KrCache<T>) -> Result<Self> {
        let v = &cache.kop.svd.right;
        let m = v.rows();
        let mut x = cache.aug.x_true.as_slice().to_vec();
        x.push(T::zero());
        Ok(Self {
            t: cache.aug.t,
            kappa: cache.aug.kappa,
            sigma: cache.kop.svd.singular_values.clone(),
            along_e: cache.coeffs.clone(),
            last_row: v.row(m - 1).to_vec(),
            along_x: v.tr_matvec(&x)?,
        })
    }

    pub fn build(aug: AugmentedSystem<T>) -> Result<Self> {
        Self::from_cache(&KrCache::new(aug)?)
    }

    /// Evaluates KR; never fails on small success probabilities (a vanishing
    /// output is reported with infidelity 1).
    pub fn evaluate(&self, spec: &FilterSpec<T>) -> KrSummary<T> {
        let (mut total, mut last, mut overlap) = (T::zero(), T::zero(), T::zero());
        for k in 0..self.sigma.len() {
            let a = spec.eval_k(self.sigma[k]) * self.along_e[k];
            total = total + a * a;
            last = last + a * self.last_row[k];
            overlap = overlap + a * self.along_x[k];
        }
        let p_succ = (total - last * last).max(T::zero());
        if p_succ == T::zero() {
            return KrSummary {
                p_succ,
                error_l2: T::SQRT_2(),
                infidelity: T::one(),
            };
        }
        let c = (overlap.abs() / p_succ.sqrt()).min(T::one());
        let error_l2 = (T::lit(2.0) * (T::one() - c)).sqrt();
        KrSummary {
            p_succ,
            error_l2,
            infidelity: infidelity_from_distance(error_l2),
        }
    }
}

/// KR filter of width `1/κ`. `κ = 1` (identity-like systems) uses the widest
/// admissible width instead.
pub fn reflection_spec<T: Real>(kappa: T, eta: T) -> Result<FilterSpec<T>> {
    filter_spec(FilterKind::Reflection, kappa, eta)
}

fn filter_spec<T: Real>(kind: FilterKind, kappa: T, eta: T) -> Result<FilterSpec<T>> {
    if kappa > T::one() {
        FilterSpec::for_kappa(kind, kappa, eta)
    } else {
        FilterSpec::new(kind, T::one() - T::epsilon(), eta)
    }
}

/// Kernel-reflection run from `e_{m−1}` on an augmented system.
pub fn run_kr<T: Real>(aug: &AugmentedSystem<T>, eta: T, kappa: T) -> Result<RunOutcome<T>> {
    run_kr_with_edge(aug, eta, kappa, EdgeValue::Exact)
}

pub fn run_kr_with_edge<T: Real>(aug: &AugmentedSystem<T>, eta: T, kappa: T, edge: EdgeValue) -> Result<RunOutcome<T>> {
    let mut aug = aug.clone();
    aug.kappa = kappa;
    let cache = KrCache::new(aug)?;
    let spec = reflection_spec(kappa, eta)?.with_edge(edge);
    cache.run(&spec)
}

/// Outcome of a kernel-projection run.
#[derive(Clone, Debug)]
pub struct KpOutcome<T> {
    pub p_succ: T,
    pub output: StateVector<T>,
    /// Infidelity of the input with the kernel.
    pub input_infidelity: T,
    /// Infidelity of the output with the kernel.
    pub output_infidelity: T,
    pub ua_calls: usize,
    pub eta: T,
    pub order: usize,
}

/// Kernel projection of a unit `input`.
pub fn run_kp<T: Real>(kop: &KernelOperator<T>, input: &StateVector<T>, eta: T, kappa: T) -> Result<KpOutcome<T>> {
    if input.dim() != kop.g.cols() {
        return Err(Error::DimensionMismatch {
            expected: kop.g.cols(),
            actual: input.dim(),
        });
    }
    if !input.is_normalized() {
        return Err(Error::domain("kernel projection input", format!("|v| = {}", input.norm())));
    }
    let in_weight = kop.kernel_weight(input.as_slice());
    let input_infidelity = (T::one() - in_weight).max(T::zero());
    if input_infidelity > T::one() - T::lit(1e-12) {
        return Err(Error::FilterDivergence {
            mu_sq: input_infidelity.to_f64_lossy(),
        });
    }
    let spec = filter_spec(FilterKind::Projection, kappa, eta)?;
    let y = kop.apply(&spec, input.as_slice())?;
    let nrm = norm(&y);
    let p_succ = nrm * nrm;
    let output = StateVector::new(y.iter().map(|&v| v / nrm).collect())?;
    let out_weight = kop.kernel_weight(output.as_slice());
    Ok(KpOutcome {
        p_succ,
        output,
        input_infidelity,
        output_infidelity: (T::one() - out_weight).max(T::zero()),
        ua_calls: spec.degree(),
        eta,
        order: spec.order,
    })
}

/// How `η_KR` is chosen for a known-norm run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaRule {
    Calibrated(f64),
    /// `η = ε/√2`, valid for every `θ_t` when `t = ‖x‖`.
    WorstCase,
}

impl EtaRule {
    pub fn eta(&self, epsilon: f64) -> Result<f64> {
        match *self {
            EtaRule::Calibrated(eta) => Ok(eta),
            EtaRule::WorstCase => {
                if !(epsilon > 0.0 && epsilon < 0.5) {
                    return Err(Error::domain("epsilon", format!("{epsilon} not in (0, 0.5)")));
                }
                Ok(epsilon / std::f64::consts::SQRT_2)
            }
        }
    }
}

/// Known-norm cache for one instance: `t = ‖x‖`.
pub fn known_norm_cache<T: Real>(inst: &ProblemInstance<T>) -> Result<KrCache<T>> {
    let sol = solve(inst)?;
    let aug = augment_with(inst, &sol, sol.norm_x)?;
    KrCache::new(aug)
}

/// Single KR stage with the exact norm, no filtering.
pub fn known_norm_run<T: Real>(inst: &ProblemInstance<T>, epsilon: f64, rule: EtaRule) -> Result<RunOutcome<T>> {
    let cache = known_norm_cache(inst)?;
    let spec = cache.reflection_spec(T::lit(rule.eta(epsilon)?))?;
    cache.run(&spec)
}

/// Known-norm caches for a whole ensemble, built in parallel.
#[derive(Clone, Debug)]
pub struct KnownNormEnsemble<T> {
    pub ids: Vec<String>,
    pub caches: Vec<KrCache<T>>,
    pub profiles: Vec<SpectralProfile<T>>,
}

impl<T: Real> KnownNormEnsemble<T> {
    pub fn build(instances: &[ProblemInstance<T>]) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::domain("ensemble", "empty"));
        }
        let caches = instances.par_iter().map(known_norm_cache).collect::<Result<Vec<_>>>()?;
        let profiles = caches.iter().map(SpectralProfile::from_cache).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ids: instances.iter().map(|i| i.id.clone()).collect(),
            caches,
            profiles,
        })
    }

    pub fn len(&self) -> usize {
        self.caches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caches.is_empty()
    }

    pub fn run_all(&self, eta: T) -> Result<Vec<RunOutcome<T>>> {
        self.caches
            .par_iter()
            .map(|c| c.run(&c.reflection_spec(eta)?))
            .collect()
    }

    /// Per-instance `(summary, degree)` through the spectral profiles.
    pub fn summaries(&self, eta: T) -> Result<Vec<(KrSummary<T>, usize)>> {
        self.profiles
            .iter()
            .map(|p| {
                let spec = reflection_spec(p.kappa, eta)?;
                Ok((p.evaluate(&spec), spec.degree()))
            })
            .collect()
    }

    pub fn mean_error(&self, eta: T) -> Result<T> {
        let s = self.summaries(eta)?;
        Ok(mean(s.iter().map(|(k, _)| k.error_l2)))
    }
}

pub(crate) fn mean<T: Real>(it: impl ExactSizeIterator<Item = T>) -> T {
    let n = it.len();
    it.sum::<T>() / T::from_usize_lossy(n.max(1))
}
