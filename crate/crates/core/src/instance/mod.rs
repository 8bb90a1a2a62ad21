//! Seed-reproducible benchmark systems: dense non-Hermitian and positive
//! definite matrices with an exact condition number, sparse stencil matrices
//! with a condition-number band, and random right-hand sides.

pub mod io;
mod seed;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, DenseMatrix, StateVector};
use crate::scalar::Real;

pub use seed::{derive_seed, splitmix64};
use seed::{rng_for, RHS_STREAM};

/// Smallest admissible `κ − 1` for the dense generators.
const MIN_KAPPA_EXCESS: f64 = 1e-6;
const DEGENERATE_RETRIES: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    NonHermitian,
    PositiveDefinite,
    Sparse,
}

impl InstanceKind {
    pub fn tag(self) -> &'static str {
        match self {
            InstanceKind::NonHermitian => "nh",
            InstanceKind::PositiveDefinite => "pd",
            InstanceKind::Sparse => "sp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nh" | "non_hermitian" | "non-hermitian" | "nonhermitian" => Ok(Self::NonHermitian),
            "pd" | "positive_definite" | "positive-definite" => Ok(Self::PositiveDefinite),
            "sp" | "sparse" => Ok(Self::Sparse),
            other => Err(Error::domain("instance kind", other.to_string())),
        }
    }
}

/// Requested conditioning: exact for the dense kinds, a band for sparse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSpec {
    Exact(f64),
    Band(f64, f64),
}

impl KappaSpec {
    pub fn contains(&self, kappa: f64) -> bool {
        match *self {
            KappaSpec::Exact(k) => (kappa - k).abs() <= 1e-8 * k,
            KappaSpec::Band(lo, hi) => kappa >= lo && kappa <= hi,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemInstance<T> {
    pub id: String,
    pub kind: InstanceKind,
    /// `n × n`, spectral norm 1.
    pub a: DenseMatrix<T>,
    /// Unit right-hand side.
    pub b: StateVector<T>,
    pub kappa_spec: KappaSpec,
    /// `σ_max / σ_min` of `a`.
    pub kappa_measured: T,
    pub seed: u64,
    /// Regenerations needed to avoid a degenerate sample or hit the band.
    pub retries: u32,
}

impl<T: Real> ProblemInstance<T> {
    pub fn dimension(&self) -> usize {
        self.a.rows()
    }

    /// Builds an instance from given data, measuring `κ` from the SVD.
    pub fn from_parts(
        id: impl Into<String>,
        kind: InstanceKind,
        a: DenseMatrix<T>,
        b: StateVector<T>,
        kappa_spec: KappaSpec,
        seed: u64,
    ) -> Result<Self> {
        if !a.is_square() || a.rows() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                actual: b.dim(),
            });
        }
        let kappa_measured = condition_number(&a)?;
        Ok(Self {
            id: id.into(),
            kind,
            a,
            b,
            kappa_spec,
            kappa_measured,
            seed,
            retries: 0,
        })
    }
}

pub fn condition_number<T: Real>(a: &DenseMatrix<T>) -> Result<T> {
    let f = svd(a)?;
    Ok(f.sigma_max() / f.sigma_min())
}

/// Maps raw singular values affinely onto `[1/κ, 1]`, keeping their order.
pub fn rescale_spectrum<T: Real>(sigma: &[T], kappa: T) -> Result<Vec<T>> {
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for &s in sigma {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if !(hi > lo) {
        return Err(Error::domain("raw spectrum", "sigma_max == sigma_min"));
    }
    let floor = T::one() / kappa;
    let slope = (T::one() - floor) / (hi - lo);
    Ok(sigma
        .iter()
        .map(|&s| {
            if s == hi {
                T::one()
            } else if s == lo {
                floor
            } else {
                floor + (s - lo) * slope
            }
        })
        .collect())
}

fn check_dense_args(n: usize, kappa: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::domain("dimension", format!("{n} < 2")));
    }
    if !(kappa.is_finite() && kappa - 1.0 >= MIN_KAPPA_EXCESS) {
        return Err(Error::domain("kappa", format!("{kappa} must exceed 1 by at least {MIN_KAPPA_EXCESS}")));
    }
    Ok(())
}

/// Dense instance with condition number exactly `kappa`.
///
/// Samples i.i.d. uniform `[0, 2]` entries, takes their SVD `U Σ Vᵀ`, rescales
/// `Σ` onto `[1/κ, 1]` and returns `U Σ' Vᵀ` (non-Hermitian) or `V Σ' Vᵀ`
/// (positive definite).
pub fn generate_dense<T: Real>(kind: InstanceKind, n: usize, kappa: f64, seed: u64) -> Result<ProblemInstance<T>> {
    check_dense_args(n, kappa)?;
    if kind == InstanceKind::Sparse {
        return Err(Error::domain("dense kind", "sparse instances come from generate_sparse"));
    }
    let kappa_t = T::lit(kappa);
    let mut retries = 0u32;
    let (a, f_sigma) = loop {
        let sample_seed = if retries == 0 { seed } else { derive_seed(seed, retries as u64) };
        let mut rng = rng_for(sample_seed);
        let raw = DenseMatrix::from_fn(n, n, |_, _| T::lit(rng.random_range(0.0..2.0)));
        let f = svd(&raw)?;
        match rescale_spectrum(&f.singular_values, kappa_t) {
            Ok(sigma) => {
                let (left, right) = match kind {
                    InstanceKind::NonHermitian => (&f.left, &f.right),
                    _ => (&f.right, &f.right),
                };
                let mut a = DenseMatrix::from_fn(n, n, |i, j| {
                    (0..n).map(|k| left[(i, k)] * sigma[k] * right[(j, k)]).sum()
                });
                if kind == InstanceKind::PositiveDefinite {
                    let half = T::lit(0.5);
                    a = DenseMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)]) * half);
                }
                break (a, sigma);
            }
            Err(_) if (retries as u64) < DEGENERATE_RETRIES => retries += 1,
            Err(e) => return Err(e),
        }
    };
    debug_assert_eq!(f_sigma.len(), n);
    let b = generate_rhs(n, derive_seed(seed, RHS_STREAM))?;
    let mut inst = ProblemInstance::from_parts(
        format!("{}-n{}-{:016x}", kind.tag(), n, seed),
        kind,
        a,
        b,
        KappaSpec::Exact(kappa),
        seed,
    )?;
    inst.retries = retries;
    Ok(inst)
}

/// Tunables of the sparse stencil generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseConfig {
    /// Nominal diagonal value before noise.
    pub diagonal: f64,
    /// Half-width of the relative noise on diagonal and off-diagonal entries.
    pub stencil_noise: f64,
    /// Half-width of the uniform perturbation entries.
    pub perturbation: f64,
    pub max_attempts: usize,
}

impl Default for SparseConfig {
    fn default() -> Self {
        Self {
            diagonal: 2.2,
            stencil_noise: 0.1,
            perturbation: 0.5,
            max_attempts: 1000,
        }
    }
}

/// Random tridiagonal stencil plus optional off-band perturbation, scaled to
/// unit norm and rejection-sampled until `κ` falls in `band`.
pub fn generate_sparse<T: Real>(
    n: usize,
    density: f64,
    seed: u64,
    band: (f64, f64),
    config: &SparseConfig,
) -> Result<ProblemInstance<T>> {
    if n < 3 {
        return Err(Error::domain("dimension", format!("{n} < 3")));
    }
    if !(0.0..=0.2).contains(&density) {
        return Err(Error::domain("density", format!("{density} not in [0, 0.2]")));
    }
    let (lo, hi) = band;
    if !(lo >= 1.0 && hi >= lo) {
        return Err(Error::domain("kappa band", format!("[{lo}, {hi}]")));
    }
    let mut seen = Vec::with_capacity(config.max_attempts);
    for attempt in 0..config.max_attempts {
        let sample_seed = if attempt == 0 { seed } else { derive_seed(seed, attempt as u64) };
        let raw = sparse_stencil(n, density, sample_seed, config);
        let f = svd(&raw.cast::<T>())?;
        let kappa = (f.sigma_max() / f.sigma_min()).to_f64_lossy();
        seen.push(kappa);
        if kappa >= lo && kappa <= hi {
            let a = raw.cast::<T>().scale(T::one() / f.sigma_max());
            let b = generate_rhs(n, derive_seed(sample_seed, RHS_STREAM))?;
            let mut inst = ProblemInstance::from_parts(
                format!("sp-n{}-{:016x}", n, seed),
                InstanceKind::Sparse,
                a,
                b,
                KappaSpec::Band(lo, hi),
                seed,
            )?;
            inst.retries = attempt as u32;
            return Ok(inst);
        }
    }
    Err(Error::BandInfeasible {
        lo,
        hi,
        attempts: config.max_attempts,
        histogram: kappa_histogram(&seen),
    })
}

fn sparse_stencil(n: usize, density: f64, seed: u64, config: &SparseConfig) -> DenseMatrix<f64> {
    let mut rng = rng_for(seed);
    let w = config.stencil_noise;
    let mut a = DenseMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = config.diagonal * (1.0 + rng.random_range(-w..=w));
    }
    for i in 0..n - 1 {
        a[(i, i + 1)] = -(1.0 + rng.random_range(-w..=w));
        a[(i + 1, i)] = -(1.0 + rng.random_range(-w..=w));
    }
    let mut slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i.abs_diff(j) > 1)
        .collect();
    let extra = (density * slots.len() as f64).round() as usize;
    // partial Fisher-Yates: the first `extra` slots become a uniform sample
    for k in 0..extra {
        let pick = rng.random_range(k..slots.len());
        slots.swap(k, pick);
        let (i, j) = slots[k];
        let p = config.perturbation;
        a[(i, j)] = rng.random_range(-p..=p);
    }
    a
}

fn kappa_histogram(kappas: &[f64]) -> String {
    let edges = [1.0, 10.0, 20.0, 30.0, 40.0, 50.0, 100.0, 1000.0, f64::INFINITY];
    let mut counts = vec![0usize; edges.len() - 1];
    for &k in kappas {
        if let Some(bin) = edges.windows(2).position(|w| k >= w[0] && k < w[1]) {
            counts[bin] += 1;
        }
    }
    edges
        .windows(2)
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(w, c)| format!("[{}, {}): {}", w[0], w[1], c))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Standard-normal entries normalised to a unit vector.
pub fn generate_rhs<T: Real>(n: usize, seed: u64) -> Result<StateVector<T>> {
    if n == 0 {
        return Err(Error::domain("dimension", "0"));
    }
    let mut rng = rng_for(seed);
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if v.iter().any(|&x| x != 0.0) {
            return StateVector::normalized(v.into_iter().map(T::lit).collect());
        }
    }
}

/// Recipe for a whole ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: InstanceKind,
    pub n: usize,
    pub kappa: KappaSpec,
    pub count: usize,
    pub base_seed: u64,
    /// Off-band perturbation density (sparse only).
    #[serde(default)]
    pub density: f64,
    #[serde(default)]
    pub sparse: SparseConfig,
}

impl EnsembleSpec {
    pub fn dense(kind: InstanceKind, n: usize, kappa: f64, count: usize, base_seed: u64) -> Self {
        Self {
            kind,
            n,
            kappa: KappaSpec::Exact(kappa),
            count,
            base_seed,
            density: 0.0,
            sparse: SparseConfig::default(),
        }
    }

    pub fn sparse(n: usize, band: (f64, f64), density: f64, count: usize, base_seed: u64) -> Self {
        Self {
            kind: InstanceKind::Sparse,
            n,
            kappa: KappaSpec::Band(band.0, band.1),
            count,
            base_seed,
            density,
            sparse: SparseConfig::default(),
        }
    }

    pub fn instance_seed(&self, index: usize) -> u64 {
        derive_seed(self.base_seed, index as u64)
    }

    pub fn generate_one<T: Real>(&self, index: usize) -> Result<ProblemInstance<T>> {
        let seed = self.instance_seed(index);
        let mut inst = match (self.kind, self.kappa) {
            (InstanceKind::Sparse, KappaSpec::Band(lo, hi)) => {
                generate_sparse(self.n, self.density, seed, (lo, hi), &self.sparse)?
            }
            (InstanceKind::Sparse, KappaSpec::Exact(_)) => {
                return Err(Error::domain("kappa spec", "sparse ensembles need a band"))
            }
            (kind, KappaSpec::Exact(k)) => generate_dense(kind, self.n, k, seed)?,
            (_, KappaSpec::Band(..)) => {
                return Err(Error::domain("kappa spec", "dense ensembles need an exact kappa"))
            }
        };
        inst.id = format!("{}-n{}-k{}-{:03}", self.kind.tag(), self.n, self.kappa_label(), index);
        Ok(inst)
    }

    fn kappa_label(&self) -> String {
        match self.kappa {
            KappaSpec::Exact(k) => format!("{k}"),
            KappaSpec::Band(lo, hi) => format!("{lo}-{hi}"),
        }
    }

    /// Generates all instances in parallel; output order is by index.
    pub fn generate<T: Real>(&self) -> Result<Vec<ProblemInstance<T>>> {
        if self.count == 0 {
            return Err(Error::domain("ensemble count", "0"));
        }
        (0..self.count).into_par_iter().map(|i| self.generate_one(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_rescale_example() {
        let s = rescale_spectrum(&[3.0, 2.0, 1.0], 4.0).unwrap();
        assert_eq!(s, vec![1.0, 0.625, 0.25]);
        assert_eq!(s[0] / s[2], 4.0);
    }

    #[test]
    fn degenerate_spectrum_rejected() {
        assert!(rescale_spectrum(&[1.0, 1.0], 4.0).is_err());
    }

    #[test]
    fn dense_hits_kappa_and_unit_norm() {
        for kind in [InstanceKind::NonHermitian, InstanceKind::PositiveDefinite] {
            let inst = generate_dense::<f64>(kind, 12, 80.0, 9).unwrap();
            let f = svd(&inst.a).unwrap();
            assert!((f.sigma_max() - 1.0).abs() < 1e-10);
            assert!((inst.kappa_measured - 80.0).abs() <= 80.0 * 1e-8);
            assert!((inst.b.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_too_close_to_one_rejected() {
        assert!(generate_dense::<f64>(InstanceKind::NonHermitian, 4, 1.0 + 1e-9, 1).is_err());
        assert!(generate_dense::<f64>(InstanceKind::NonHermitian, 1, 10.0, 1).is_err());
    }

    #[test]
    fn positive_definite_is_symmetric() {
        let inst = generate_dense::<f64>(InstanceKind::PositiveDefinite, 10, 20.0, 4).unwrap();
        let asym = inst.a.sub(&inst.a.transpose()).unwrap().max_abs();
        assert!(asym <= 1e-12);
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = generate_dense::<f64>(InstanceKind::NonHermitian, 8, 40.0, 77).unwrap();
        let b = generate_dense::<f64>(InstanceKind::NonHermitian, 8, 40.0, 77).unwrap();
        assert_eq!(a.a, b.a);
        assert_eq!(a.b, b.b);
    }

    #[test]
    fn pure_tridiagonal_sparsity() {
        let a = sparse_stencil(16, 0.0, 3, &SparseConfig::default());
        assert!(a.count_nonzero() <= 3 * 16 - 2);
        let a = sparse_stencil(16, 0.1, 3, &SparseConfig::default());
        assert!(a.count_nonzero() > 3 * 16 - 2);
    }

    #[test]
    fn sparse_band_is_respected() {
        let inst = generate_sparse::<f64>(32, 0.0, 5, (10.0, 30.0), &SparseConfig::default()).unwrap();
        assert!(inst.kappa_measured >= 10.0 && inst.kappa_measured <= 30.0);
        let f = svd(&inst.a).unwrap();
        assert!(f.sigma_max() <= 1.0 + 1e-12);
    }

    #[test]
    fn infeasible_band_reports_histogram() {
        let cfg = SparseConfig {
            max_attempts: 5,
            ..SparseConfig::default()
        };
        match generate_sparse::<f64>(16, 0.0, 1, (1.0, 1.01), &cfg) {
            Err(Error::BandInfeasible { attempts, histogram, .. }) => {
                assert_eq!(attempts, 5);
                assert!(!histogram.is_empty());
            }
            other => panic!("expected band error, got {other:?}"),
        }
    }

    #[test]
    fn rhs_examples() {
        let b = generate_rhs::<f64>(1, 3).unwrap();
        assert_eq!(b.as_slice()[0].abs(), 1.0);
        let b1 = generate_rhs::<f64>(32, 1).unwrap();
        let b2 = generate_rhs::<f64>(32, 2).unwrap();
        assert!((b1.norm() - 1.0).abs() < 1e-12);
        assert!(b1.dot(&b2).unwrap().abs() < 0.9);
    }
}
