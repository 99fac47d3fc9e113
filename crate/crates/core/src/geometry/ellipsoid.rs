use nalgebra::{Cholesky, Dyn, SymmetricEigen};

use super::{ConvexBody, GeometryConstants, SetKind, MEMBERSHIP_TOL};
use crate::error::{check_len, Result, RsfwError};
use crate::linalg::{symmetrize, Matrix, Vector, MAX_CONDITION};
use crate::stiefel::StiefelFrame;

#[derive(Debug, Clone)]
enum Form {
    Dense {
        m: Matrix,
        /// Ascending eigenvalues and matching eigenvector columns.
        values: Vector,
        vectors: Matrix,
    },
    /// `M = scale · (Φ Φᵀ + shift · I)`, never materialized.
    Feature {
        phi: Matrix,
        shift: f64,
        scale: f64,
        /// Cholesky of `shift · I_m + Φᵀ Φ` for the Woodbury solve.
        inner: Cholesky<f64, Dyn>,
    },
}

/// `{x : xᵀ M x <= 1}` with `M` symmetric positive definite.
///
/// The `(H, R)` parameterization `{a : aᵀ H a <= R²}` maps to `M = H / R²`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    n: usize,
    form: Form,
    lambda_min: f64,
    lambda_max: f64,
    trace: f64,
}

impl Ellipsoid {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(RsfwError::InvalidSet(format!("M must be square and nonempty, got {}x{}", m.nrows(), m.ncols())));
        }
        let asym = (&m - m.transpose()).abs().max();
        if asym > 1e-10 * m.abs().max().max(1.0) {
            return Err(RsfwError::InvalidSet(format!("M is not symmetric (max asymmetry {asym:e})")));
        }
        let m = symmetrize(&m);
        let eig = SymmetricEigen::new(m.clone());
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = Matrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
        let (lambda_min, lambda_max) = (values[0], values[n - 1]);
        if !(lambda_min > 0.0) || lambda_max / lambda_min > MAX_CONDITION {
            return Err(RsfwError::InvalidSet(format!(
                "M must be positive definite (eigenvalues in [{lambda_min:e}, {lambda_max:e}])"
            )));
        }
        let trace = m.trace();
        Ok(Self { n, form: Form::Dense { m, values, vectors }, lambda_min, lambda_max, trace })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&Vector::from_column_slice(values)))
    }

    /// `{a : aᵀ H a <= R²}`.
    pub fn from_hr(h: Matrix, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(RsfwError::InvalidSet(format!("R must be positive, got {r}")));
        }
        Self::new(h / (r * r))
    }

    /// `{a : aᵀ (Φ Φᵀ + shift I) a <= R²}` stored in feature form.
    pub fn feature(phi: Matrix, shift: f64, r: f64) -> Result<Self> {
        if !(shift > 0.0) || !(r > 0.0) {
            return Err(RsfwError::InvalidSet(format!("shift and R must be positive, got {shift}, {r}")));
        }
        let (n, m) = phi.shape();
        if n == 0 {
            return Err(RsfwError::InvalidSet("feature matrix has no rows".into()));
        }
        let gram = phi.transpose() * &phi;
        let inner_m = &gram + Matrix::identity(m, m) * shift;
        let inner = Cholesky::new(inner_m).ok_or_else(|| RsfwError::InvalidSet("feature Gram factorization failed".into()))?;
        let scale = 1.0 / (r * r);
        let sig_max = if m == 0 { 0.0 } else { crate::linalg::sym_extremes(&gram).1.max(0.0) };
        let lambda_min = scale * shift;
        let lambda_max = scale * (shift + sig_max);
        let trace = scale * (phi.norm_squared() + shift * n as f64);
        Ok(Self { n, form: Form::Feature { phi, shift, scale, inner }, lambda_min, lambda_max, trace })
    }

    pub fn is_feature_form(&self) -> bool {
        matches!(self.form, Form::Feature { .. })
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Dense `M`. Materializes the feature form.
    pub fn matrix(&self) -> Matrix {
        match &self.form {
            Form::Dense { m, .. } => m.clone(),
            Form::Feature { phi, shift, scale, .. } => {
                (phi * phi.transpose() + Matrix::identity(self.n, self.n) * *shift) * *scale
            }
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        match &self.form {
            Form::Dense { m, .. } => m * x,
            Form::Feature { phi, shift, scale, .. } => (phi * (phi.transpose() * x) + x * *shift) * *scale,
        }
    }

    /// `M⁻¹ g`.
    pub fn solve(&self, g: &Vector) -> Vector {
        match &self.form {
            Form::Dense { values, vectors, .. } => {
                let mut w = vectors.transpose() * g;
                for (wi, li) in w.iter_mut().zip(values.iter()) {
                    *wi /= li;
                }
                vectors * w
            }
            Form::Feature { phi, shift, scale, inner } => {
                let t = inner.solve(&(phi.transpose() * g));
                (g - phi * t) / (*shift * *scale)
            }
        }
    }

    pub fn quad(&self, x: &Vector) -> f64 {
        x.dot(&self.apply(x))
    }

    /// `P M Pᵀ`, computed without forming `M` in feature form.
    pub fn compress(&self, frame: &StiefelFrame) -> Result<Matrix> {
        check_len(self.n, frame.n())?;
        let p = frame.rows();
        Ok(match &self.form {
            Form::Dense { m, .. } => symmetrize(&(p * m * p.transpose())),
            Form::Feature { phi, shift, scale, .. } => {
                let f = p * phi;
                let d = p.nrows();
                symmetrize(&((&f * f.transpose() + Matrix::identity(d, d) * *shift) * *scale))
            }
        })
    }

    /// Inward unit normal `-Mx/|Mx|` at a boundary point.
    pub fn inward_normal(&self, x: &Vector) -> Result<Vector> {
        check_len(self.n, x.len())?;
        let mx = self.apply(x);
        let norm = mx.norm();
        if norm == 0.0 {
            return Err(RsfwError::InvalidParameter("normal undefined at the center".into()));
        }
        Ok(-mx / norm)
    }

    /// Euclidean projection onto the set via the multiplier equation in the eigenbasis.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        check_len(self.n, x.len())?;
        let Form::Dense { values, vectors, .. } = &self.form else {
            return Err(RsfwError::Unsupported("projection requires the dense form".into()));
        };
        if self.quad(x) <= 1.0 {
            return Ok(x.clone());
        }
        let w = vectors.transpose() * x;
        let phi = |nu: f64| -> (f64, f64) {
            let mut val = -1.0;
            let mut der = 0.0;
            for (wi, li) in w.iter().zip(values.iter()) {
                let q = 1.0 + nu * li;
                val += li * wi * wi / (q * q);
                der -= 2.0 * li * li * wi * wi / (q * q * q);
            }
            (val, der)
        };
        let mut nu = 0.0f64;
        for _ in 0..200 {
            let (val, der) = phi(nu);
            if val.abs() <= 1e-12 || der == 0.0 {
                break;
            }
            let next = nu - val / der;
            if !(next > nu) {
                break;
            }
            nu = next;
        }
        let y = Vector::from_iterator(self.n, w.iter().zip(values.iter()).map(|(wi, li)| wi / (1.0 + nu * li)));
        Ok(vectors * y)
    }

    /// Membership in the parallel body `E + εB₂`.
    pub fn parallel_contains(&self, x: &Vector, eps: f64) -> Result<bool> {
        if !(eps >= 0.0) {
            return Err(RsfwError::InvalidParameter(format!("eps must be nonnegative, got {eps}")));
        }
        let p = self.project(x)?;
        Ok((x - p).norm() <= eps + MEMBERSHIP_TOL)
    }

    /// Distance from an inside point `c` to the boundary.
    ///
    /// The nearest boundary point is `y_i = c_i / (1 - ν λ_i)` in the
    /// eigenbasis with `ν ∈ [0, 1/λ_max]` chosen so that `yᵀMy = 1`. When `c`
    /// has no component along the top eigenspace and the secular function
    /// stays below one, the remainder of the step goes along that eigenspace.
    pub fn boundary_distance(&self, c: &Vector) -> Result<f64> {
        check_len(self.n, c.len())?;
        let Form::Dense { values, vectors, .. } = &self.form else {
            return Err(RsfwError::Unsupported("boundary distance requires the dense form".into()));
        };
        if self.quad(c) > 1.0 + MEMBERSHIP_TOL {
            return Err(RsfwError::Infeasible("point lies outside the ellipsoid".into()));
        }
        let w = vectors.transpose() * c;
        let lmax = self.lambda_max;
        let top = |i: usize| values[i] >= lmax * (1.0 - 1e-12);
        let top_mass: f64 = (0..self.n).filter(|&i| top(i)).map(|i| w[i] * w[i]).sum();
        let secular = |nu: f64, skip_top: bool| -> f64 {
            (0..self.n)
                .filter(|&i| !(skip_top && top(i)))
                .map(|i| {
                    let q = 1.0 - nu * values[i];
                    values[i] * w[i] * w[i] / (q * q)
                })
                .sum()
        };
        let hard = top_mass <= 1e-30 * (1.0 + c.norm_squared());
        let nu_cap = 1.0 / lmax;
        if hard && secular(nu_cap, true) < 1.0 {
            let mut dist2 = 0.0;
            let mut level = 0.0;
            for i in (0..self.n).filter(|&i| !top(i)) {
                let y = w[i] / (1.0 - nu_cap * values[i]);
                dist2 += (y - w[i]).powi(2);
                level += values[i] * y * y;
            }
            return Ok((dist2 + (1.0 - level).max(0.0) / lmax).sqrt());
        }
        let (mut lo, mut hi) = (0.0, nu_cap);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if secular(mid, false) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let nu = 0.5 * (lo + hi);
        let dist2: f64 = (0..self.n)
            .map(|i| {
                let y = w[i] / (1.0 - nu * values[i]);
                (y - w[i]).powi(2)
            })
            .sum();
        Ok(dist2.sqrt())
    }

    /// Semi-axis lengths `λ_i^{-1/2}` in descending order (dense form).
    pub fn semi_axes(&self) -> Option<Vec<f64>> {
        match &self.form {
            Form::Dense { values, .. } => Some(values.iter().map(|l| l.powf(-0.5)).collect()),
            Form::Feature { .. } => None,
        }
    }
}

/// Semi-axes `a_i = λ_i^{-1/2}`, `D = 2 a_max`, `R_min = a_min²/a_max`,
/// `R_max = a_max²/a_min`, `β_C = 1/(2 R_max)`.
pub fn ellipsoid_geometry(e: &Ellipsoid) -> GeometryConstants {
    let a_max = e.lambda_min.powf(-0.5);
    let a_min = e.lambda_max.powf(-0.5);
    let r_min = a_min * a_min / a_max;
    let r_max = a_max * a_max / a_min;
    let beta_c = 0.5 / r_max;
    let diameter = 2.0 * a_max;
    GeometryConstants {
        beta_c,
        r_min,
        diameter,
        kappa_unif: (2.0 * beta_c * r_min).min(r_min / diameter),
        beta0: None,
    }
}

impl ConvexBody for Ellipsoid {
    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> SetKind {
        SetKind::Ellipsoid
    }

    fn constraint_excess(&self, x: &Vector) -> Result<f64> {
        check_len(self.n, x.len())?;
        Ok(self.quad(x) - 1.0)
    }

    fn initial_point(&self) -> Vector {
        Vector::zeros(self.n)
    }

    fn geometry(&self) -> Option<GeometryConstants> {
        Some(ellipsoid_geometry(self))
    }
}
