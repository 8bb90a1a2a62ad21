//! One-sided (Hestenes) Jacobi SVD.
//!
//! Jacobi rotations give singular values with high relative accuracy and an
//! orthonormal right basis even when the matrix has an exact kernel, which is
//! the situation for every `G = Q_b A` operator the engine builds.

use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, norm, DenseMatrix};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U diag(σ) Vᵀ` with `σ` nonincreasing.
///
/// For an `r × c` input, `U` is `r × k` and `V` is `c × k` with `k = min(r, c)`.
/// Signs are fixed so the largest-magnitude entry of every right singular
/// vector is positive (first such entry on ties).
#[derive(Clone, Debug)]
pub struct SvdFactors<T> {
    pub left: DenseMatrix<T>,
    pub singular_values: Vec<T>,
    pub right: DenseMatrix<T>,
}

impl<T: Real> SvdFactors<T> {
    pub fn sigma_max(&self) -> T {
        self.singular_values[0]
    }

    pub fn sigma_min(&self) -> T {
        *self.singular_values.last().expect("non-empty spectrum")
    }

    /// `U diag(σ) Vᵀ`
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let (r, c, k) = (self.left.rows(), self.right.rows(), self.singular_values.len());
        DenseMatrix::from_fn(r, c, |i, j| {
            (0..k)
                .map(|p| self.left[(i, p)] * self.singular_values[p] * self.right[(j, p)])
                .sum()
        })
    }

    /// Applies `V diag(f(σ)) Vᵀ` to `x`: a spectral function of `MᵀM`
    /// expressed through the singular values.
    pub fn apply_right_spectral(&self, x: &[T], f: impl Fn(T) -> T) -> Result<Vec<T>> {
        let coeffs = self.right.tr_matvec(x)?;
        let scaled: Vec<T> = coeffs
            .iter()
            .zip(&self.singular_values)
            .map(|(&c, &s)| c * f(s))
            .collect();
        self.right.matvec(&scaled)
    }
}

/// Computes the thin SVD of `m`.
pub fn svd<T: Real>(m: &DenseMatrix<T>) -> Result<SvdFactors<T>> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    if m.rows() < m.cols() {
        let t = svd_tall(&m.transpose())?;
        let mut f = SvdFactors {
            left: t.right,
            singular_values: t.singular_values,
            right: t.left,
        };
        fix_signs(&mut f);
        return Ok(f);
    }
    let mut f = svd_tall(m)?;
    fix_signs(&mut f);
    Ok(f)
}

fn svd_tall<T: Real>(m: &DenseMatrix<T>) -> Result<SvdFactors<T>> {
    let (r, c) = (m.rows(), m.cols());
    let mut w: Vec<Vec<T>> = (0..c).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..c)
        .map(|j| {
            let mut e = vec![T::zero(); c];
            e[j] = T::one();
            e
        })
        .collect();

    let tol = T::epsilon() * T::from_usize_lossy(r).sqrt();
    let mut converged = c == 1;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == T::zero() || gamma.abs() <= tol * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + T::one().hypot(zeta));
                let cs = T::one() / T::one().hypot(t);
                let sn = cs * t;
                rotate(&mut w, p, q, cs, sn);
                rotate(&mut v, p, q, cs, sn);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let sigma: Vec<T> = w.iter().map(|col| norm(col)).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).expect("finite singular values"));

    let sigma_max = sigma[order[0]];
    let negligible = sigma_max * T::epsilon() * T::from_usize_lossy(r);
    let mut left_cols: Vec<Vec<T>> = Vec::with_capacity(c);
    for &j in &order {
        let candidate = if sigma[j] > negligible {
            let inv = T::one() / sigma[j];
            w[j].iter().map(|&x| x * inv).collect()
        } else {
            vec![T::zero(); r]
        };
        left_cols.push(orthonormal_completion(candidate, &left_cols, r));
    }

    let singular_values = order.iter().map(|&j| sigma[j]).collect();
    let left = DenseMatrix::from_fn(r, c, |i, k| left_cols[k][i]);
    let right = DenseMatrix::from_fn(c, c, |i, k| v[order[k]][i]);
    Ok(SvdFactors {
        left,
        singular_values,
        right,
    })
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, cs: T, sn: T) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = cs * x - sn * y;
        *b = sn * x + cs * y;
    }
}

/// Orthogonalises `candidate` against `basis` (two passes of modified
/// Gram-Schmidt). If little survives, substitutes the canonical basis vector
/// with the largest residual.
fn orthonormal_completion<T: Real>(candidate: Vec<T>, basis: &[Vec<T>], dim: usize) -> Vec<T> {
    let project_out = |mut x: Vec<T>| {
        for _ in 0..2 {
            for b in basis {
                let c = dot(&x, b);
                for (xi, &bi) in x.iter_mut().zip(b) {
                    *xi = *xi - c * bi;
                }
            }
        }
        x
    };
    let x = project_out(candidate);
    let nx = norm(&x);
    if nx > T::lit(0.5) {
        return x.into_iter().map(|xi| xi / nx).collect();
    }
    let mut best: Option<(T, Vec<T>)> = None;
    for k in 0..dim {
        let mut e = vec![T::zero(); dim];
        e[k] = T::one();
        let e = project_out(e);
        let ne = norm(&e);
        if best.as_ref().is_none_or(|(bn, _)| ne > *bn) {
            best = Some((ne, e));
        }
    }
    let (nb, e) = best.expect("dimension >= 1");
    e.into_iter().map(|xi| xi / nb).collect()
}

fn fix_signs<T: Real>(f: &mut SvdFactors<T>) {
    let k = f.singular_values.len();
    for j in 0..k {
        let mut pivot = 0;
        let mut best = T::zero();
        for i in 0..f.right.rows() {
            let a = f.right[(i, j)].abs();
            if a > best {
                best = a;
                pivot = i;
            }
        }
        if f.right[(pivot, j)] < T::zero() {
            for i in 0..f.right.rows() {
                f.right[(i, j)] = -f.right[(i, j)];
            }
            for i in 0..f.left.rows() {
                f.left[(i, j)] = -f.left[(i, j)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, m: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormality_defect(q: &DenseMatrix<f64>) -> f64 {
        let g = q.transpose().matmul(q).unwrap();
        g.sub(&DenseMatrix::identity(q.cols())).unwrap().frobenius_norm()
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let f = svd(&DenseMatrix::<f64>::identity(4)).unwrap();
        assert_eq!(f.singular_values, vec![1.0; 4]);
    }

    #[test]
    fn diagonal_spectrum_is_sorted() {
        let f = svd(&DenseMatrix::from_diagonal(&[1.0f64, 3.0])).unwrap();
        assert!((f.singular_values[0] - 3.0).abs() < 1e-15);
        assert!((f.singular_values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_square_reconstructs() {
        let m = random(5, 5, 7);
        let f = svd(&m).unwrap();
        let resid = f.reconstruct().sub(&m).unwrap().frobenius_norm();
        assert!(resid <= 1e-10 * m.frobenius_norm().max(1.0), "{resid}");
        assert!(orthonormality_defect(&f.left) <= 1e-10);
        assert!(orthonormality_defect(&f.right) <= 1e-10);
        assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn wide_and_tall_shapes() {
        for (r, c) in [(3, 6), (7, 2)] {
            let m = random(r, c, 11);
            let f = svd(&m).unwrap();
            let resid = f.reconstruct().sub(&m).unwrap().frobenius_norm();
            assert!(resid <= 1e-12, "{r}x{c}: {resid}");
        }
    }

    #[test]
    fn exact_kernel_keeps_left_basis_orthonormal() {
        // rank-deficient: last row is a combination of the first two
        let mut m = random(6, 6, 3);
        for j in 0..6 {
            m[(5, j)] = m[(0, j)] - 2.0 * m[(1, j)];
        }
        let mt = m.transpose();
        let f = svd(&mt).unwrap();
        assert!(f.sigma_min() < 1e-14);
        assert!(orthonormality_defect(&f.left) <= 1e-10);
        assert!(orthonormality_defect(&f.right) <= 1e-10);
        let resid = f.reconstruct().sub(&mt).unwrap().frobenius_norm();
        assert!(resid <= 1e-12);
    }

    #[test]
    fn sign_convention_makes_dominant_right_entry_positive() {
        let f = svd(&random(5, 5, 19)).unwrap();
        for j in 0..5 {
            let col = f.right.column(j);
            let dominant = col
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            assert!(dominant > 0.0);
        }
    }

    #[test]
    fn zero_matrix_is_handled() {
        let f = svd(&DenseMatrix::<f64>::zeros(3, 3)).unwrap();
        assert!(f.singular_values.iter().all(|&s| s == 0.0));
        assert!(orthonormality_defect(&f.left) <= 1e-12);
    }

    #[test]
    fn single_precision_works() {
        let m: DenseMatrix<f32> = random(4, 4, 5).cast();
        let f = svd(&m).unwrap();
        let resid = f.reconstruct().sub(&m).unwrap().frobenius_norm();
        assert!(resid < 1e-5);
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut m = DenseMatrix::<f64>::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::NonFinite(_))));
    }
}
