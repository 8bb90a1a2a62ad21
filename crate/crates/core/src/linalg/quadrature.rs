//! Closed Clenshaw-Curtis quadrature.
//!
//! Nodes are the Chebyshev extrema `cos(kπ/n)`, `k = 0..=n`, endpoints
//! included; weights come from the cosine-sum formula. With `N = n + 1` nodes
//! the rule is exact for polynomials of degree at most `N − 1`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A Clenshaw-Curtis rule mapped onto `[lo, hi]`. Nodes are stored in
/// increasing order; build once and reuse for every integrand on the same
/// interval.
#[derive(Clone, Debug)]
pub struct ClenshawCurtis<T> {
    lo: T,
    hi: T,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> ClenshawCurtis<T> {
    pub fn new(count: usize, lo: T, hi: T) -> Result<Self> {
        if count < 2 {
            return Err(Error::domain("quadrature nodes", format!("{count} < 2")));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::domain("quadrature interval", format!("[{lo}, {hi}]")));
        }
        let n = count - 1;
        let nf = T::from_usize_lossy(n);
        let half = T::lit(0.5);
        let mid = (lo + hi) * half;
        let rad = (hi - lo) * half;

        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        // k = n .. 0 walks the reference nodes from -1 up to +1.
        for k in (0..=n).rev() {
            let theta = T::PI() * T::from_usize_lossy(k) / nf;
            let mut s = T::zero();
            for j in 1..=n / 2 {
                let b = if 2 * j == n { T::one() } else { T::lit(2.0) };
                let jf = T::from_usize_lossy(j);
                s = s + b / (T::lit(4.0) * jf * jf - T::one()) * (T::lit(2.0) * jf * theta).cos();
            }
            let c = if k == 0 || k == n { T::one() } else { T::lit(2.0) };
            let x = if 2 * k == n { T::zero() } else { theta.cos() };
            let x = if k == 0 {
                hi
            } else if k == n {
                lo
            } else {
                mid + rad * x
            };
            nodes.push(x);
            weights.push(rad * c / nf * (T::one() - s));
        }
        Ok(Self {
            lo,
            hi,
            nodes,
            weights,
        })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn interval(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    /// Integrates precomputed node values.
    pub fn integrate_values(&self, values: &[T]) -> Result<T> {
        if values.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.len(),
                actual: values.len(),
            });
        }
        let mut acc = T::zero();
        for (i, (&w, &v)) in self.weights.iter().zip(values).enumerate() {
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    index: i,
                    abscissa: self.nodes[i].to_f64_lossy(),
                });
            }
            acc = acc + w * v;
        }
        Ok(acc)
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> Result<T> {
        let values: Vec<T> = self.nodes.iter().map(|&x| f(x)).collect();
        self.integrate_values(&values)
    }
}

/// One-shot `∫_lo^hi f` with `nodes` Clenshaw-Curtis points.
pub fn clenshaw_curtis<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, nodes: usize) -> Result<T> {
    ClenshawCurtis::new(nodes, lo, hi)?.integrate(f)
}
