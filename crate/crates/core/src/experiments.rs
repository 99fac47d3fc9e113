//! Synthetic instance generators for the experiment families, their JSON
//! round trip, and helpers for reference optima.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsfwError};
use crate::geometry::{make_knn_laplacian, Ball, ConvexBody, Ellipsoid, GraphQuartic, SimplexPolytope};
use crate::linalg::{gaussian_vector, random_spd, random_unit, symmetrize, Matrix, SpdFactor, Vector};
use crate::problem::{FiniteSumQuadratic, LabeledQuadratic, Objective, Quadratic, RandomFeatureLogistic};
use crate::rng::{rng_from_seed, stream};
use crate::solver::{full_fw_run, fw_gap_full, RunTrace, SolverConfig, StepRule};
use crate::stiefel::StiefelFrame;

/// Knobs for [`gen_quadratic_ellipsoid_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticEllipsoidSpec {
    pub n: usize,
    /// `λ_max(Q) / λ_min(Q)`.
    pub cond: f64,
    /// Eigenvalues of `M` are spread linearly over `[m_min, m_max]`.
    pub m_min: f64,
    pub m_max: f64,
    /// `sqrt(x_uᵀ M x_u)` for the unconstrained minimizer `x_u`; above 1 means outside.
    pub outside: f64,
}

impl QuadraticEllipsoidSpec {
    pub fn new(n: usize, cond: f64) -> Self {
        Self { n, cond, m_min: 1.0, m_max: 2.0, outside: 3.0 }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticEllipsoidInstance {
    pub problem: Quadratic,
    pub set: Ellipsoid,
    pub x_star: Vector,
    /// Full Frank-Wolfe gap at `x_star`.
    pub certificate: f64,
}

pub fn gen_quadratic_ellipsoid(n: usize, cond: f64, seed: u64) -> Result<QuadraticEllipsoidInstance> {
    gen_quadratic_ellipsoid_with(&QuadraticEllipsoidSpec::new(n, cond), seed)
}

/// `f(x) = ½ (x - x_u)ᵀ Q (x - x_u)` over `{xᵀMx ≤ 1}` with `Q = U diag(1..cond) Uᵀ`
/// for a Haar rotation `U` and `x_u` outside the set.
pub fn gen_quadratic_ellipsoid_with(spec: &QuadraticEllipsoidSpec, seed: u64) -> Result<QuadraticEllipsoidInstance> {
    let n = spec.n;
    if n == 0 {
        return Err(RsfwError::InvalidDimension("n must be positive".into()));
    }
    if !(spec.cond >= 1.0) {
        return Err(RsfwError::InvalidParameter(format!("condition number must be >= 1, got {}", spec.cond)));
    }
    if !(spec.m_min > 0.0 && spec.m_max >= spec.m_min) || !(spec.outside > 1.0) {
        return Err(RsfwError::InvalidParameter("need 0 < m_min <= m_max and outside > 1".into()));
    }
    let q = if spec.cond == 1.0 {
        Matrix::identity(n, n)
    } else {
        let u = StiefelFrame::sample(n, n, crate::rng::derive_seed(seed, &[0]))?;
        let spectrum = crate::curvature::linear_spectrum(n, 1.0, spec.cond);
        symmetrize(&(u.rows().transpose() * spectrum * u.rows()))
    };
    let m_diag = crate::curvature::linear_spectrum(n, spec.m_min, spec.m_max);
    let set = Ellipsoid::new(m_diag.clone())?;
    let mut rng = stream(seed, &[1]);
    let dir = random_unit(n, &mut rng);
    let x_u = &dir * (spec.outside / set.quad(&dir).sqrt());
    let r = -(&q * &x_u);
    let c = 0.5 * x_u.dot(&(&q * &x_u));
    let base = Quadratic::new(q, r, c)?;
    let x_star = quadratic_ellipsoid_optimum(base.q(), base.r(), &m_diag)?;
    let f_star = base.value(&x_star);
    let problem = base.with_f_star(f_star);
    let certificate = fw_gap_full(&problem, &set, &x_star)?;
    Ok(QuadraticEllipsoidInstance { problem, set, x_star, certificate })
}

/// Minimizer of `½ xᵀQx + rᵀx` over `{xᵀMx ≤ 1}` from the multiplier equation
/// `x(ν) = -(Q + νM)⁻¹ r`, `x(ν)ᵀ M x(ν) = 1`, solved by bisection on `ν`.
pub fn quadratic_ellipsoid_optimum(q: &Matrix, r: &Vector, m: &Matrix) -> Result<Vector> {
    let solve = |nu: f64| -> Result<Vector> {
        let f = SpdFactor::new(&(q + m * nu))?;
        Ok(-f.solve(r))
    };
    let level = |x: &Vector| x.dot(&(m * x));
    if let Ok(x) = solve(0.0) {
        if level(&x) <= 1.0 {
            return Ok(x);
        }
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while level(&solve(hi)?) > 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(RsfwError::OracleFailure("multiplier bracket diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if level(&solve(mid)?) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = solve(hi)?;
    let l = level(&x);
    Ok(if l > 1.0 { x / l.sqrt() } else { x })
}

/// Smallest `|∇f|` over `samples` random points of an ellipsoid.
pub fn min_sampled_gradient_norm<O: Objective + ?Sized>(f: &O, set: &Ellipsoid, samples: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, &[2]);
    let n = set.dim();
    (0..samples)
        .map(|_| {
            let v = random_unit(n, &mut rng);
            let t: f64 = rng.random::<f64>();
            let x = &v * (t / set.quad(&v).sqrt());
            f.gradient(&x).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticSpec {
    /// Number of samples, which is also the dimension of the coefficient vector.
    pub n: usize,
    /// Number of random features.
    pub m: usize,
    pub rho_k: f64,
    pub lambda: f64,
    pub rho_h: f64,
    /// Constraint `aᵀ H a ≤ radius²`.
    pub radius: f64,
    /// Raw input dimension of the synthetic points.
    pub input_dim: usize,
}

impl LogisticSpec {
    pub fn new(n: usize, m: usize, rho_k: f64, lambda: f64) -> Self {
        Self { n, m, rho_k, lambda, rho_h: 1e-3, radius: 1.0, input_dim: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticInstance {
    pub problem: RandomFeatureLogistic,
    /// `{a : aᵀ(K + ρ_H I)a ≤ R²}` in feature form.
    pub set: Ellipsoid,
    pub spec: LogisticSpec,
}

pub fn gen_logistic_rf(n: usize, m: usize, rho_k: f64, lambda: f64, seed: u64) -> Result<LogisticInstance> {
    gen_logistic_rf_with(&LogisticSpec::new(n, m, rho_k, lambda), seed)
}

/// Gaussian points with labels planted by a noisy linear rule, mapped to
/// random Fourier features `√(2/m) cos(ωᵀp + b)`.
pub fn gen_logistic_rf_with(spec: &LogisticSpec, seed: u64) -> Result<LogisticInstance> {
    if spec.n == 0 || spec.m == 0 || spec.input_dim == 0 {
        return Err(RsfwError::InvalidDimension("n, m and input_dim must be positive".into()));
    }
    let mut rng = stream(seed, &[3]);
    let p = crate::linalg::gaussian_matrix(spec.n, spec.input_dim, &mut rng);
    let w = gaussian_vector(spec.input_dim, &mut rng);
    let noise = Normal::new(0.0, 0.3).expect("valid normal");
    let y = Vector::from_fn(spec.n, |i, _| {
        let score = p.row(i).transpose().dot(&w) + noise.sample(&mut rng);
        if score >= 0.0 { 1.0 } else { -1.0 }
    });
    logistic_from_raw(&p, y, spec, crate::rng::derive_seed(seed, &[4]))
}

/// Builds the random-feature instance from raw points (one row per sample) and `±1` labels.
pub fn logistic_from_raw(points: &Matrix, y: Vector, spec: &LogisticSpec, seed: u64) -> Result<LogisticInstance> {
    let n = points.nrows();
    let p = points.ncols();
    if !(spec.rho_h > 0.0 || spec.rho_k > 0.0) || !(spec.radius > 0.0) {
        return Err(RsfwError::InvalidParameter("need rho_K + rho_H > 0 and radius > 0".into()));
    }
    let mut rng = stream(seed, &[0]);
    let bandwidth = (p as f64).sqrt();
    let omega = crate::linalg::gaussian_matrix(p, spec.m, &mut rng) / bandwidth;
    let phase = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
    let b: Vec<f64> = (0..spec.m).map(|_| phase.sample(&mut rng)).collect();
    let scale = (2.0 / spec.m as f64).sqrt();
    let proj = points * omega;
    let phi = Matrix::from_fn(n, spec.m, |i, j| scale * (proj[(i, j)] + b[j]).cos());
    let problem = RandomFeatureLogistic::new(phi.clone(), y, spec.rho_k, spec.lambda)?;
    let set = Ellipsoid::feature(phi, spec.rho_k + spec.rho_h, spec.radius)?;
    let mut spec = *spec;
    spec.n = n;
    spec.input_dim = p;
    Ok(LogisticInstance { problem, set, spec })
}

/// Best objective over a full Frank-Wolfe run, with the smallest gap seen as certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub f_ref: f64,
    /// `f_ref - f* ≤ certificate`.
    pub certificate: f64,
    pub iterations: usize,
}

pub fn reference_by_full_fw<O, S>(f: &O, set: &S, iterations: usize) -> Result<ReferenceValue>
where
    O: Objective + ?Sized,
    S: crate::oracles::SectionOracle + ?Sized,
{
    let cfg = SolverConfig::new(iterations, set.dim(), 0, StepRule::ShortStep { l: f.smoothness() });
    let trace = full_fw_run(f, set, &cfg)?;
    let f_ref = trace.summary.final_f;
    let certificate = fw_gap_full(f, set, &trace.final_x)?;
    Ok(ReferenceValue { f_ref, certificate, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSslSpec {
    pub m_nodes: usize,
    pub k_nn: usize,
    pub labeled_count: usize,
    pub mu: f64,
    pub gamma_g: f64,
    pub beta4: f64,
    pub tau: f64,
}

impl Default for GraphSslSpec {
    fn default() -> Self {
        Self { m_nodes: 400, k_nn: 10, labeled_count: 40, mu: 1e-6, gamma_g: 0.05, beta4: 0.01, tau: 1000.0 }
    }
}

#[derive(Debug, Clone)]
pub struct GraphSslInstance {
    pub problem: LabeledQuadratic,
    pub set: GraphQuartic,
    pub points: Vec<[f64; 2]>,
    /// Cluster label of every node.
    pub classes: Vec<f64>,
    pub spec: GraphSslSpec,
}

/// Two Gaussian clusters in the plane, a normalized kNN Laplacian, and a
/// random labeled subset.
pub fn gen_graph_ssl(spec: &GraphSslSpec, seed: u64) -> Result<GraphSslInstance> {
    if spec.labeled_count == 0 || spec.labeled_count > spec.m_nodes {
        return Err(RsfwError::InvalidParameter(format!(
            "need 1 <= labeled_count <= m_nodes, got {} and {}",
            spec.labeled_count, spec.m_nodes
        )));
    }
    let mut rng = stream(seed, &[5]);
    let spread = Normal::new(0.0, 0.7).expect("valid normal");
    let mut points = Vec::with_capacity(spec.m_nodes);
    let mut classes = Vec::with_capacity(spec.m_nodes);
    for i in 0..spec.m_nodes {
        let side = if i % 2 == 0 { 1.0 } else { -1.0 };
        points.push([2.0 * side + spread.sample(&mut rng), spread.sample(&mut rng)]);
        classes.push(side);
    }
    graph_ssl_from_points(points, classes, spec, crate::rng::derive_seed(seed, &[6]))
}

pub fn graph_ssl_from_points(points: Vec<[f64; 2]>, classes: Vec<f64>, spec: &GraphSslSpec, seed: u64) -> Result<GraphSslInstance> {
    if points.len() != classes.len() {
        return Err(RsfwError::DimensionMismatch { expected: points.len(), got: classes.len() });
    }
    let laplacian = make_knn_laplacian(&points, spec.k_nn, true)?;
    let set = GraphQuartic::new(spec.mu, spec.gamma_g, laplacian, spec.beta4, spec.tau)?;
    let mut rng = stream(seed, &[0]);
    let mut labeled = sample_indices(&mut rng, points.len(), spec.labeled_count).into_vec();
    labeled.sort_unstable();
    let targets = labeled.iter().map(|&i| classes[i]).collect();
    let problem = LabeledQuadratic::new(points.len(), labeled, targets)?;
    let mut spec = *spec;
    spec.m_nodes = points.len();
    Ok(GraphSslInstance { problem, set, points, classes, spec })
}

impl GraphSslInstance {
    /// `f* = 0` when the labeled targets, zero elsewhere, are feasible.
    pub fn zero_loss_point(&self) -> Option<Vector> {
        let mut u = Vector::zeros(self.set.dim());
        for (&i, &t) in self.problem.labeled().iter().zip(self.problem.targets()) {
            u[i] = t;
        }
        (self.set.h(&u) <= self.set.tau).then_some(u)
    }
}

#[derive(Debug, Clone)]
pub struct FiniteSumInstance {
    pub problem: FiniteSumQuadratic,
    pub set: Ball,
    pub x_star: Vector,
}

/// `N` quadratics `½xᵀQx + r_iᵀx` sharing `Q` with spectrum in `[1, 4]`, over the
/// unit ball. Each `r_i = -Q(c + 0.5 u_i)` with `|c| = 2.5`, so the mean
/// minimizer lies outside the ball.
pub fn gen_finite_sum_quadratic(components: usize, n: usize, seed: u64) -> Result<FiniteSumInstance> {
    if components == 0 || n == 0 {
        return Err(RsfwError::InvalidParameter(format!("need components, n >= 1, got {components}, {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let q = random_spd(n, 1.0, 4.0, &mut rng);
    let center = random_unit(n, &mut rng) * 2.5;
    let rs: Vec<Vector> = (0..components).map(|_| -(&q * (&center + random_unit(n, &mut rng) * 0.5))).collect();
    let fs = FiniteSumQuadratic::new(q.clone(), rs)?;
    let x_star = quadratic_ellipsoid_optimum(&q, fs.mean().r(), &Matrix::identity(n, n))?;
    let f_star = fs.value(&x_star);
    Ok(FiniteSumInstance { problem: fs.with_f_star(f_star), set: Ball::unit(n), x_star })
}

pub const FAILURE_TARGET: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct FailureInstance {
    pub problem: Quadratic,
    pub set: SimplexPolytope,
    pub x0: Vector,
    pub d: usize,
}

/// `f = ½|x - 5e₁|²` over the simplex polytope, started at `(δ/n) 1`; `f* = 8` at `e₁`.
pub fn gen_failure_instance(n: usize, d: usize, delta: f64) -> Result<FailureInstance> {
    if n < 2 {
        return Err(RsfwError::InvalidDimension(format!("need n >= 2, got {n}")));
    }
    if d == 0 || d > n {
        return Err(RsfwError::InvalidDimension(format!("need 1 <= d <= n, got d={d}, n={n}")));
    }
    let set = SimplexPolytope::new(n)?.with_interior_delta(delta)?;
    let mut a = Vector::zeros(n);
    a[0] = FAILURE_TARGET;
    let problem = Quadratic::distance_to(&a).with_f_star(0.5 * (FAILURE_TARGET - 1.0).powi(2));
    let x0 = set.initial_point();
    Ok(FailureInstance { problem, set, x0, d })
}

/// Runs `run(L)` for each grid value in increasing order and returns the
/// first whose objective sequence never increases.
pub fn smallest_monotone_l<F>(grid: &[f64], mut run: F) -> Result<Option<(f64, RunTrace)>>
where
    F: FnMut(f64) -> Result<RunTrace>,
{
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    for l in sorted {
        let trace = run(l)?;
        let vals = trace.objective_values();
        if vals.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)) {
            return Ok(Some((l, trace)));
        }
    }
    Ok(None)
}

/// Serialized instance data. Matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceDocument {
    QuadraticEllipsoid {
        q: Vec<Vec<f64>>,
        r: Vec<f64>,
        c: f64,
        m: Vec<Vec<f64>>,
        x_star: Vec<f64>,
        f_star: f64,
        certificate: f64,
    },
    LogisticRf {
        phi: Vec<Vec<f64>>,
        y: Vec<f64>,
        rho_k: f64,
        lambda: f64,
        rho_h: f64,
        radius: f64,
    },
    GraphSsl {
        points: Vec<[f64; 2]>,
        classes: Vec<f64>,
        labeled: Vec<usize>,
        spec: GraphSslSpec,
    },
    Failure {
        n: usize,
        d: usize,
        delta: f64,
    },
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(RsfwError::Parse("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(n, c, |i, j| rows[i][j]))
}

impl QuadraticEllipsoidInstance {
    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument::QuadraticEllipsoid {
            q: matrix_to_rows(self.problem.q()),
            r: self.problem.r().iter().copied().collect(),
            c: self.problem.constant(),
            m: matrix_to_rows(&self.set.matrix()),
            x_star: self.x_star.iter().copied().collect(),
            f_star: self.problem.f_star().unwrap_or(f64::NAN),
            certificate: self.certificate,
        }
    }
}

impl LogisticInstance {
    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument::LogisticRf {
            phi: matrix_to_rows(self.problem.phi()),
            y: self.problem.labels().iter().copied().collect(),
            rho_k: self.spec.rho_k,
            lambda: self.spec.lambda,
            rho_h: self.spec.rho_h,
            radius: self.spec.radius,
        }
    }
}

impl GraphSslInstance {
    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument::GraphSsl {
            points: self.points.clone(),
            classes: self.classes.clone(),
            labeled: self.problem.labeled().to_vec(),
            spec: self.spec,
        }
    }
}

impl FailureInstance {
    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument::Failure { n: self.set.dim(), d: self.d, delta: self.set.interior_delta() }
    }
}

/// A loaded instance.
#[derive(Debug, Clone)]
pub enum Instance {
    QuadraticEllipsoid(QuadraticEllipsoidInstance),
    LogisticRf(LogisticInstance),
    GraphSsl(GraphSslInstance),
    Failure(FailureInstance),
}

impl InstanceDocument {
    pub fn build(&self) -> Result<Instance> {
        Ok(match self {
            InstanceDocument::QuadraticEllipsoid { q, r, c, m, x_star, f_star, certificate } => {
                let problem = Quadratic::new(rows_to_matrix(q)?, Vector::from_vec(r.clone()), *c)?.with_f_star(*f_star);
                Instance::QuadraticEllipsoid(QuadraticEllipsoidInstance {
                    problem,
                    set: Ellipsoid::new(rows_to_matrix(m)?)?,
                    x_star: Vector::from_vec(x_star.clone()),
                    certificate: *certificate,
                })
            }
            InstanceDocument::LogisticRf { phi, y, rho_k, lambda, rho_h, radius } => {
                let phi = rows_to_matrix(phi)?;
                let spec = LogisticSpec {
                    n: phi.nrows(),
                    m: phi.ncols(),
                    rho_k: *rho_k,
                    lambda: *lambda,
                    rho_h: *rho_h,
                    radius: *radius,
                    input_dim: 0,
                };
                let problem = RandomFeatureLogistic::new(phi.clone(), Vector::from_vec(y.clone()), *rho_k, *lambda)?;
                let set = Ellipsoid::feature(phi, rho_k + rho_h, *radius)?;
                Instance::LogisticRf(LogisticInstance { problem, set, spec })
            }
            InstanceDocument::GraphSsl { points, classes, labeled, spec } => {
                let laplacian = make_knn_laplacian(points, spec.k_nn, true)?;
                let set = GraphQuartic::new(spec.mu, spec.gamma_g, laplacian, spec.beta4, spec.tau)?;
                if classes.len() != points.len() {
                    return Err(RsfwError::DimensionMismatch { expected: points.len(), got: classes.len() });
                }
                if labeled.iter().any(|&i| i >= points.len()) {
                    return Err(RsfwError::Parse("labeled index out of range".into()));
                }
                let targets = labeled.iter().map(|&i| classes[i]).collect();
                let problem = LabeledQuadratic::new(points.len(), labeled.clone(), targets)?;
                Instance::GraphSsl(GraphSslInstance {
                    problem,
                    set,
                    points: points.clone(),
                    classes: classes.clone(),
                    spec: *spec,
                })
            }
            InstanceDocument::Failure { n, d, delta } => Instance::Failure(gen_failure_instance(*n, *d, *delta)?),
        })
    }
}

pub fn save_instance(doc: &InstanceDocument, path: &Path) -> Result<()> {
    let text = serde_json::to_string(doc).map_err(|e| RsfwError::Parse(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| RsfwError::Io(e.to_string()))
}

pub fn load_instance(path: &Path) -> Result<InstanceDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| RsfwError::Io(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| RsfwError::Parse(e.to_string()))
}

/// Numeric CSV without a header, one row per sample.
pub fn read_feature_csv(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| RsfwError::Io(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| RsfwError::Parse(e.to_string()))?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| RsfwError::Parse(format!("row {}: bad number {v:?}", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(RsfwError::Parse("feature file is empty".into()));
    }
    rows_to_matrix(&rows)
}

/// One label per line; `{-1, +1}` or `{0, 1}` (mapped to `-1, +1`).
pub fn read_label_csv(path: &Path) -> Result<Vector> {
    let m = read_feature_csv(path)?;
    if m.ncols() != 1 {
        return Err(RsfwError::Parse(format!("label file must have one column, got {}", m.ncols())));
    }
    let binary01 = m.iter().all(|&v| v == 0.0 || v == 1.0);
    m.column(0)
        .iter()
        .map(|&v| match v {
            _ if binary01 => Ok(2.0 * v - 1.0),
            1.0 | -1.0 => Ok(v),
            _ => Err(RsfwError::Parse(format!("label {v} is not in {{-1, +1}} or {{0, 1}}"))),
        })
        .collect::<Result<Vec<f64>>>()
        .map(Vector::from_vec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::gradient_check;
    use crate::rng::rng_from_seed;
    use crate::solver::{rsfw_run, StepRule};

    #[test]
    fn quadratic_instance_properties() {
        let inst = gen_quadratic_ellipsoid(20, 10.0, 3).unwrap();
        assert!(inst.certificate <= 1e-6, "{}", inst.certificate);
        assert!(inst.set.quad(&inst.x_star) <= 1.0 + 1e-12);
        assert!(min_sampled_gradient_norm(&inst.problem, &inst.set, 10_000, 1) > 0.0);
        let (lo, hi) = crate::linalg::sym_extremes(inst.problem.q());
        assert!((hi / lo - 10.0).abs() < 1e-8);
        let again = gen_quadratic_ellipsoid(20, 10.0, 3).unwrap();
        assert_eq!(inst.to_document(), again.to_document());
        assert_eq!(*gen_quadratic_ellipsoid(5, 1.0, 0).unwrap().problem.q(), Matrix::identity(5, 5));
        let mut rng = rng_from_seed(1);
        let pts: Vec<Vector> = (0..20).map(|_| random_unit(20, &mut rng) * 0.5).collect();
        assert!(gradient_check(&inst.problem, &pts, &mut rng) < 1e-5);
    }

    #[test]
    fn kkt_optimum_beats_random_feasible_points() {
        let inst = gen_quadratic_ellipsoid(8, 5.0, 9).unwrap();
        let fs = inst.problem.f_star().unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..2000 {
            let v = random_unit(8, &mut rng);
            let x = &v / inst.set.quad(&v).sqrt();
            assert!(inst.problem.value(&x) >= fs - 1e-12);
        }
    }

    #[test]
    fn logistic_instance_properties() {
        let inst = gen_logistic_rf(60, 16, 0.1, 0.01, 4).unwrap();
        let zero = Vector::zeros(60);
        assert!((inst.problem.value(&zero) - 2f64.ln()).abs() < 1e-14);
        let mut rng = rng_from_seed(3);
        let pts: Vec<Vector> = (0..20).map(|_| random_unit(60, &mut rng) * 0.1).collect();
        assert!(gradient_check(&inst.problem, &pts, &mut rng) < 1e-5);
        // Reduced matrices of the feature form match the dense ellipsoid.
        let phi = inst.problem.phi();
        let h = phi * phi.transpose() + Matrix::identity(60, 60) * (0.1 + 1e-3);
        let dense = Ellipsoid::new(h).unwrap();
        let f = StiefelFrame::sample(60, 5, 1).unwrap();
        let a = inst.set.compress(&f).unwrap();
        let b = dense.compress(&f).unwrap();
        assert!((a - b).amax() < 1e-10);
        let again = gen_logistic_rf(60, 16, 0.1, 0.01, 4).unwrap();
        assert_eq!(inst.to_document(), again.to_document());
    }

    #[test]
    fn graph_instance_defaults() {
        let spec = GraphSslSpec::default();
        assert_eq!((spec.mu, spec.gamma_g, spec.beta4, spec.tau), (1e-6, 0.05, 0.01, 1000.0));
        let small = GraphSslSpec { m_nodes: 80, labeled_count: 10, ..spec };
        let inst = gen_graph_ssl(&small, 5).unwrap();
        assert!(inst.set.contains(&Vector::zeros(80)).unwrap());
        let cfg = SolverConfig::new(100, 5, 1, StepRule::ExactDirectional);
        let t = rsfw_run(&inst.problem, &inst.set, &cfg).unwrap();
        let v = t.objective_values();
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(v[100] < v[0]);
        assert!(gen_graph_ssl(&GraphSslSpec { labeled_count: 81, ..small }, 5).is_err());
    }

    #[test]
    fn failure_instance() {
        let inst = gen_failure_instance(100, 10, 0.1).unwrap();
        assert_eq!(inst.problem.f_star(), Some(8.0));
        let mut e1 = Vector::zeros(100);
        e1[0] = 1.0;
        assert_eq!(inst.problem.value(&e1), 8.0);
        assert!((inst.x0.sum() - 0.1).abs() < 1e-15);
        assert!(gen_failure_instance(1, 1, 0.1).is_err());
    }

    #[test]
    fn documents_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let q = gen_quadratic_ellipsoid(6, 4.0, 1).unwrap();
        let docs = vec![
            q.to_document(),
            gen_logistic_rf(10, 4, 0.1, 0.01, 2).unwrap().to_document(),
            gen_graph_ssl(&GraphSslSpec { m_nodes: 30, labeled_count: 5, k_nn: 4, ..Default::default() }, 3)
                .unwrap()
                .to_document(),
            gen_failure_instance(10, 3, 0.2).unwrap().to_document(),
        ];
        for (i, doc) in docs.iter().enumerate() {
            let path = dir.path().join(format!("{i}.json"));
            save_instance(doc, &path).unwrap();
            let back = load_instance(&path).unwrap();
            assert_eq!(&back, doc);
            let rebuilt = back.build().unwrap();
            let doc2 = match rebuilt {
                Instance::QuadraticEllipsoid(x) => x.to_document(),
                Instance::LogisticRf(x) => x.to_document(),
                Instance::GraphSsl(x) => x.to_document(),
                Instance::Failure(x) => x.to_document(),
            };
            assert_eq!(&doc2, doc);
        }
    }

    #[test]
    fn csv_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x.csv");
        let l = dir.path().join("y.csv");
        std::fs::write(&f, "1.0, 2.0\n3.0,4.0\n").unwrap();
        std::fs::write(&l, "0\n1\n").unwrap();
        let x = read_feature_csv(&f).unwrap();
        assert_eq!(x[(1, 0)], 3.0);
        assert_eq!(read_label_csv(&l).unwrap(), Vector::from_vec(vec![-1.0, 1.0]));
        std::fs::write(&l, "2\n1\n").unwrap();
        assert!(read_label_csv(&l).is_err());
        std::fs::write(&f, "1,x\n").unwrap();
        assert!(read_feature_csv(&f).is_err());
        let inst = logistic_from_raw(&Matrix::from_fn(2, 2, |i, j| (i + j) as f64), Vector::from_vec(vec![1.0, -1.0]),
            &LogisticSpec::new(0, 8, 0.1, 0.01), 1).unwrap();
        assert_eq!(inst.spec.n, 2);
    }

    #[test]
    fn monotone_grid_selection() {
        let inst = gen_quadratic_ellipsoid(10, 20.0, 2).unwrap();
        let run = |l| Ok(rsfw_run(&inst.problem, &inst.set, &SolverConfig::new(100, 3, 1, StepRule::ShortStep { l }))?);
        let grid = [100.0, 0.5, 2.0, 20.0];
        let (l, trace) = smallest_monotone_l(&grid, run).unwrap().unwrap();
        // The exact smoothness constant always qualifies.
        assert!(l <= 20.0);
        let v = trace.objective_values();
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
        for smaller in grid.iter().filter(|&&g| g < l) {
            let v = run(*smaller).unwrap().objective_values();
            assert!(v.windows(2).any(|w| w[1] > w[0] + 1e-12 * w[0].abs().max(1.0)));
        }
    }
}
