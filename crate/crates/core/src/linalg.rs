//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, RsfwError};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Condition number above which a PD factorization is reported as singular.
pub const MAX_CONDITION: f64 = 1e14;

pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_iterator(rows, cols, (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform point on the unit sphere S^{n-1}.
pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    loop {
        let v = gaussian_vector(n, rng);
        let norm = v.norm();
        if norm > 1e-300 {
            return v / norm;
        }
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
/// `U diag(λ) Uᵀ` with Haar-like `U` from a Gaussian QR and `λ ~ U(lo, hi)`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Matrix {
    let q = gaussian_matrix(n, n, rng).qr().q();
    let vals = Vector::from_fn(n, |_, _| rng.random_range(lo..hi));
    symmetrize(&(&q * Matrix::from_diagonal(&vals) * q.transpose()))
}

pub fn sym_eigenvalues(a: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// (lambda_min, lambda_max) of a symmetric matrix.
pub fn sym_extremes(a: &Matrix) -> (f64, f64) {
    if a.nrows() == 1 {
        return (a[(0, 0)], a[(0, 0)]);
    }
    let ev = sym_eigenvalues(a);
    (ev[0], ev[ev.len() - 1])
}

/// Spectral norm of a symmetric matrix.
pub fn sym_operator_norm(a: &Matrix) -> f64 {
    let (lo, hi) = sym_extremes(a);
    lo.abs().max(hi.abs())
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Cholesky factor of a symmetric positive-definite matrix, with a condition guard.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl SpdFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        let (lambda_min, lambda_max) = sym_extremes(a);
        if !(lambda_min > 0.0) || lambda_max / lambda_min > MAX_CONDITION {
            return Err(RsfwError::DegenerateFrame(format!(
                "matrix not numerically positive definite (eigenvalues in [{lambda_min:e}, {lambda_max:e}])"
            )));
        }
        let chol = Cholesky::new(a.clone()).ok_or_else(|| {
            RsfwError::DegenerateFrame("Cholesky factorization failed".into())
        })?;
        Ok(Self { chol, lambda_min, lambda_max })
    }

    pub fn solve(&self, b: &Vector) -> Vector {
        self.chol.solve(b)
    }
}

/// Max-entry norm of `a - I`.
pub fn identity_defect(a: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a[(i, j)] - target).abs());
        }
    }
    worst
}

/// Largest eigenvalue of a symmetric linear operator by power iteration.
pub fn power_iteration<F>(n: usize, apply: F, iters: usize, seed: u64) -> f64
where
    F: Fn(&Vector) -> Vector,
{
    let mut rng = crate::rng::rng_from_seed(seed);
    let mut v = random_unit(n, &mut rng);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = apply(&v);
        lambda = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
    }
    lambda
}

/// Conjugate gradients for a symmetric positive-definite operator.
pub fn conjugate_gradient<F>(apply: F, b: &Vector, x0: Option<Vector>, rel_tol: f64, max_iter: usize) -> Vector
where
    F: Fn(&Vector) -> Vector,
{
    let mut x = x0.unwrap_or_else(|| Vector::zeros(b.len()));
    let mut r = b - apply(&x);
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let target = (rel_tol * b.norm()).powi(2);
    for _ in 0..max_iter {
        if rs <= target {
            break;
        }
        let ap = apply(&p);
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            break;
        }
        let step = rs / denom;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let rs_new = r.dot(&r);
        p = &r + &p * (rs_new / rs);
        rs = rs_new;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes_of_diagonal() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0, 2.0]));
        assert_eq!(sym_extremes(&a), (1.0, 3.0));
        assert!((sym_operator_norm(&(-a)) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn spd_factor_rejects_singular() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]));
        assert!(SpdFactor::new(&a).is_err());
        let b = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1e-15]));
        assert!(SpdFactor::new(&b).is_err());
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let b = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = conjugate_gradient(|v| &a * v, &b, None, 1e-14, 50);
        assert!((&a * &x - &b).norm() < 1e-12);
    }
}
