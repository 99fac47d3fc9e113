//! Haar-distributed row-orthonormal frames and the maps between ambient
//! space and section coordinates.

use rand::Rng;

use crate::error::{check_len, Result, RsfwError};
use crate::linalg::{gaussian_matrix, identity_defect, Matrix, Vector};
use crate::rng::rng_from_seed;

/// Tolerance on `max |P P^T - I|` for frames built from external rows.
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

/// A `d x n` matrix `P` with `P P^T = I_d`. The section subspace is `range(P^T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelFrame {
    rows: Matrix,
    seed: u64,
}

impl StiefelFrame {
    /// Haar sample from a dedicated stream seeded with `seed`.
    pub fn sample(n: usize, d: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let mut frame = Self::sample_with(n, d, &mut rng)?;
        frame.seed = seed;
        Ok(frame)
    }

    /// Haar sample drawn from an existing generator; the recorded seed is 0.
    ///
    /// A Gaussian `n x d` matrix is QR-factored and each column of `Q` is
    /// multiplied by the sign of the matching diagonal entry of `R`. Without
    /// that correction the law of `Q` depends on the QR convention and is not
    /// rotation invariant.
    pub fn sample_with<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Self> {
        validate_dims(n, d)?;
        let g = gaussian_matrix(n, d, rng);
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Ok(Self { rows: q.transpose(), seed: 0 })
    }

    /// Selector of the first `d` coordinates.
    pub fn coordinate(n: usize, d: usize) -> Result<Self> {
        validate_dims(n, d)?;
        let rows = Matrix::from_fn(d, n, |i, j| if i == j { 1.0 } else { 0.0 });
        Ok(Self { rows, seed: 0 })
    }

    /// Wrap explicit rows, checking orthonormality.
    pub fn from_rows(rows: Matrix) -> Result<Self> {
        validate_dims(rows.ncols(), rows.nrows())?;
        let defect = identity_defect(&(&rows * rows.transpose()));
        if defect > 1e-10 {
            return Err(RsfwError::InvalidParameter(format!(
                "rows are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self { rows, seed: 0 })
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.rows.ncols()
    }

    /// Section dimension.
    pub fn d(&self) -> usize {
        self.rows.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `P v`.
    pub fn project(&self, v: &Vector) -> Result<Vector> {
        check_len(self.n(), v.len())?;
        Ok(&self.rows * v)
    }

    /// `P^T w`.
    pub fn lift(&self, w: &Vector) -> Result<Vector> {
        check_len(self.d(), w.len())?;
        Ok(self.rows.tr_mul(w))
    }

    /// `P A P^T` for a symmetric `n x n` matrix.
    pub fn compress(&self, a: &Matrix) -> Result<Matrix> {
        check_len(self.n(), a.nrows())?;
        check_len(self.n(), a.ncols())?;
        let pa = &self.rows * a;
        Ok(crate::linalg::symmetrize(&(pa * self.rows.transpose())))
    }

    /// `max |P P^T - I_d|`.
    pub fn orthonormality_defect(&self) -> f64 {
        identity_defect(&(&self.rows * self.rows.transpose()))
    }
}

/// Draw a Haar frame with `1 <= d <= n` from its own seeded stream.
pub fn sample_stiefel(n: usize, d: usize, seed: u64) -> Result<StiefelFrame> {
    StiefelFrame::sample(n, d, seed)
}

fn validate_dims(n: usize, d: usize) -> Result<()> {
    if d == 0 || d > n {
        return Err(RsfwError::InvalidDimension(format!(
            "section dimension d={d} must satisfy 1 <= d <= n={n}"
        )));
    }
    Ok(())
}
