//! Smooth convex objectives.

use rand::Rng;

use crate::error::{check_len, Result, RsfwError};
use crate::linalg::{random_unit, sym_extremes, symmetrize, Matrix, Vector};

pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> f64;

    fn gradient(&self, x: &Vector) -> Vector;

    /// Lipschitz constant of the gradient.
    fn smoothness(&self) -> f64;

    /// `dᵀ ∇²f d` when the Hessian is constant.
    fn hessian_quadratic(&self, _d: &Vector) -> Option<f64> {
        None
    }

    /// Constant Hessian, when it exists and is cheap to form.
    fn hessian_matrix(&self) -> Option<Matrix> {
        None
    }

    /// Known or reference optimal value over the feasible set.
    fn f_star(&self) -> Option<f64> {
        None
    }
}

/// `f = (1/N) Σ f_i`.
pub trait FiniteSum: Objective {
    fn components(&self) -> usize;

    fn component_gradient(&self, i: usize, x: &Vector) -> Vector;

    /// `Σ (c_i / b) ∇f_i(x)` for sampled indices with multiplicities `c_i`
    /// summing to `b`.
    fn batch_gradient(&self, counts: &[(usize, usize)], x: &Vector) -> Vector {
        let b: usize = counts.iter().map(|c| c.1).sum();
        let mut out = Vector::zeros(self.dim());
        for &(i, c) in counts {
            out.axpy(c as f64 / b as f64, &self.component_gradient(i, x), 1.0);
        }
        out
    }
}

/// `f(x) = ½ xᵀQx + rᵀx + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    q: Matrix,
    r: Vector,
    c: f64,
    lambda_max: f64,
    f_star: Option<f64>,
}

impl Quadratic {
    pub fn new(q: Matrix, r: Vector, c: f64) -> Result<Self> {
        check_len(q.nrows(), r.len())?;
        if q.nrows() != q.ncols() {
            return Err(RsfwError::InvalidParameter("Q must be square".into()));
        }
        let q = symmetrize(&q);
        let (lo, hi) = sym_extremes(&q);
        if lo < -1e-10 * hi.abs().max(1.0) {
            return Err(RsfwError::InvalidParameter(format!("Q must be PSD (lambda_min = {lo:e})")));
        }
        Ok(Self { q, r, c, lambda_max: hi.max(0.0), f_star: None })
    }

    /// `½ |x - a|²`.
    pub fn distance_to(a: &Vector) -> Self {
        let n = a.len();
        Self { q: Matrix::identity(n, n), r: -a, c: 0.5 * a.norm_squared(), lambda_max: 1.0, f_star: None }
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Vector {
        &self.r
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.r.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.r.dot(x) + self.c
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.q * x + &self.r
    }

    fn smoothness(&self) -> f64 {
        self.lambda_max
    }

    fn hessian_quadratic(&self, d: &Vector) -> Option<f64> {
        Some(d.dot(&(&self.q * d)))
    }

    fn hessian_matrix(&self) -> Option<Matrix> {
        Some(self.q.clone())
    }

    fn f_star(&self) -> Option<f64> {
        self.f_star
    }
}

/// `(1/N) Σ_i (½ xᵀQx + r_iᵀx)` with a shared `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSumQuadratic {
    base: Quadratic,
    rs: Vec<Vector>,
}

impl FiniteSumQuadratic {
    pub fn new(q: Matrix, rs: Vec<Vector>) -> Result<Self> {
        if rs.is_empty() {
            return Err(RsfwError::InvalidParameter("need at least one component".into()));
        }
        let n = q.nrows();
        for r in &rs {
            check_len(n, r.len())?;
        }
        let mut mean = Vector::zeros(n);
        for r in &rs {
            mean += r;
        }
        mean /= rs.len() as f64;
        Ok(Self { base: Quadratic::new(q, mean, 0.0)?, rs })
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.base.f_star = Some(f_star);
        self
    }

    /// The averaged objective as a plain quadratic.
    pub fn mean(&self) -> &Quadratic {
        &self.base
    }

    pub fn component_offset(&self, i: usize) -> &Vector {
        &self.rs[i]
    }
}

impl Objective for FiniteSumQuadratic {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.base.value(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.base.gradient(x)
    }

    fn smoothness(&self) -> f64 {
        self.base.smoothness()
    }

    fn hessian_quadratic(&self, d: &Vector) -> Option<f64> {
        self.base.hessian_quadratic(d)
    }

    fn hessian_matrix(&self) -> Option<Matrix> {
        self.base.hessian_matrix()
    }

    fn f_star(&self) -> Option<f64> {
        self.base.f_star
    }
}

impl FiniteSum for FiniteSumQuadratic {
    fn components(&self) -> usize {
        self.rs.len()
    }

    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        &self.base.q * x + &self.rs[i]
    }

    fn batch_gradient(&self, counts: &[(usize, usize)], x: &Vector) -> Vector {
        let b: usize = counts.iter().map(|c| c.1).sum();
        let mut out = &self.base.q * x;
        for &(i, c) in counts {
            out.axpy(c as f64 / b as f64, &self.rs[i], 1.0);
        }
        out
    }
}

/// Any objective is a one-component finite sum.
#[derive(Debug, Clone)]
pub struct SingleComponent<O>(pub O);

impl<O: Objective> Objective for SingleComponent<O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Vector) -> f64 {
        self.0.value(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.0.gradient(x)
    }
    fn smoothness(&self) -> f64 {
        self.0.smoothness()
    }
    fn hessian_quadratic(&self, d: &Vector) -> Option<f64> {
        self.0.hessian_quadratic(d)
    }
    fn hessian_matrix(&self) -> Option<Matrix> {
        self.0.hessian_matrix()
    }
    fn f_star(&self) -> Option<f64> {
        self.0.f_star()
    }
}

impl<O: Objective> FiniteSum for SingleComponent<O> {
    fn components(&self) -> usize {
        1
    }
    fn component_gradient(&self, _i: usize, x: &Vector) -> Vector {
        self.0.gradient(x)
    }
    fn batch_gradient(&self, _counts: &[(usize, usize)], x: &Vector) -> Vector {
        self.0.gradient(x)
    }
}

/// `f(u) = (2|I|)^{-1} Σ_{i ∈ I} (u_i - y_i)²` over a labeled index set `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledQuadratic {
    n: usize,
    labeled: Vec<usize>,
    targets: Vec<f64>,
    f_star: Option<f64>,
}

impl LabeledQuadratic {
    pub fn new(n: usize, labeled: Vec<usize>, targets: Vec<f64>) -> Result<Self> {
        if labeled.is_empty() || labeled.len() != targets.len() {
            return Err(RsfwError::InvalidParameter("labeled indices and targets must be nonempty and equal length".into()));
        }
        let mut sorted = labeled.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != labeled.len() || sorted.last().is_some_and(|&i| i >= n) {
            return Err(RsfwError::InvalidParameter("labeled indices must be distinct and in range".into()));
        }
        Ok(Self { n, labeled, targets, f_star: None })
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    fn inv_count(&self) -> f64 {
        1.0 / self.labeled.len() as f64
    }
}

impl Objective for LabeledQuadratic {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, u: &Vector) -> f64 {
        let s: f64 = self.labeled.iter().zip(&self.targets).map(|(&i, y)| (u[i] - y).powi(2)).sum();
        0.5 * self.inv_count() * s
    }

    fn gradient(&self, u: &Vector) -> Vector {
        let mut g = Vector::zeros(self.n);
        for (&i, y) in self.labeled.iter().zip(&self.targets) {
            g[i] = self.inv_count() * (u[i] - y);
        }
        g
    }

    fn smoothness(&self) -> f64 {
        self.inv_count()
    }

    fn hessian_quadratic(&self, d: &Vector) -> Option<f64> {
        Some(self.inv_count() * self.labeled.iter().map(|&i| d[i] * d[i]).sum::<f64>())
    }

    fn f_star(&self) -> Option<f64> {
        self.f_star
    }
}

/// Kernel logistic regression with `K = ΦΦᵀ + ρ_K I`:
/// `f(a) = n^{-1} Σ log(1 + exp(-y_i (Ka)_i)) + (λ/2) aᵀKa`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureLogistic {
    phi: Matrix,
    y: Vector,
    rho_k: f64,
    lambda: f64,
    k_norm: f64,
    f_star: Option<f64>,
}

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl RandomFeatureLogistic {
    pub fn new(phi: Matrix, y: Vector, rho_k: f64, lambda: f64) -> Result<Self> {
        check_len(phi.nrows(), y.len())?;
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(RsfwError::InvalidParameter("labels must be +1 or -1".into()));
        }
        if !(rho_k >= 0.0) || !(lambda >= 0.0) {
            return Err(RsfwError::InvalidParameter("rho_K and lambda must be nonnegative".into()));
        }
        let gram = phi.transpose() * &phi;
        let top = if gram.nrows() == 0 { 0.0 } else { sym_extremes(&gram).1.max(0.0) };
        Ok(Self { phi, y, rho_k, lambda, k_norm: top + rho_k, f_star: None })
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn labels(&self) -> &Vector {
        &self.y
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn rho_k(&self) -> f64 {
        self.rho_k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `K v` without forming `K`.
    pub fn kernel_apply(&self, v: &Vector) -> Vector {
        &self.phi * (self.phi.transpose() * v) + v * self.rho_k
    }

    /// `K S` for a block of columns.
    pub fn kernel_apply_block(&self, s: &Matrix) -> Matrix {
        &self.phi * (self.phi.transpose() * s) + s * self.rho_k
    }

    /// `|K|₂`.
    pub fn kernel_norm(&self) -> f64 {
        self.k_norm
    }
}

impl Objective for RandomFeatureLogistic {
    fn dim(&self) -> usize {
        self.y.len()
    }

    fn value(&self, a: &Vector) -> f64 {
        let ka = self.kernel_apply(a);
        let n = self.y.len() as f64;
        let loss: f64 = ka.iter().zip(self.y.iter()).map(|(k, y)| log1p_exp(-y * k)).sum();
        loss / n + 0.5 * self.lambda * a.dot(&ka)
    }

    fn gradient(&self, a: &Vector) -> Vector {
        let ka = self.kernel_apply(a);
        let n = self.y.len() as f64;
        let w = Vector::from_iterator(
            self.y.len(),
            ka.iter().zip(self.y.iter()).zip(a.iter()).map(|((k, y), ai)| self.lambda * ai - y * sigmoid(-y * k) / n),
        );
        self.kernel_apply(&w)
    }

    /// `|K|²/(4n) + λ|K|`.
    fn smoothness(&self) -> f64 {
        self.k_norm * self.k_norm / (4.0 * self.y.len() as f64) + self.lambda * self.k_norm
    }

    fn f_star(&self) -> Option<f64> {
        self.f_star
    }
}

/// Largest relative error between central differences and `⟨∇f, v⟩` over
/// random unit directions at the given points.
pub fn gradient_check<O: Objective + ?Sized, R: Rng + ?Sized>(f: &O, points: &[Vector], rng: &mut R) -> f64 {
    let mut worst: f64 = 0.0;
    for x in points {
        let v = random_unit(f.dim(), rng);
        let scale = 1.0 + x.norm();
        let h = 1e-5 * scale;
        let fd = (f.value(&(x + &v * h)) - f.value(&(x - &v * h))) / (2.0 * h);
        let an = f.gradient(x).dot(&v);
        worst = worst.max((fd - an).abs() / an.abs().max(1e-3 * f.gradient(x).norm()).max(1e-12));
    }
    worst
}
