//! Section curvature of quadratics over random ellipsoidal sections, and the
//! Haar compression sandwich `P H Pᵀ ≈ (tr H / n) I`.

use serde::Serialize;

use crate::error::{Result, RsfwError};
use crate::geometry::{ConvexBody, Ellipsoid};
use crate::linalg::{sym_extremes, sym_operator_norm, Matrix, Vector};
use crate::oracles::{ellipsoid_section_parts, section_lmo_ellipsoid, SectionResult};
use crate::problem::{Objective, Quadratic, RandomFeatureLogistic};
use crate::rng::derive_seed;
use crate::solver::short_step_alpha;
use crate::stats::{median, par_map_indexed};
use crate::stiefel::StiefelFrame;

/// Absolute slack for the per-iteration descent inequality.
pub const DESCENT_TOL: f64 = 1e-9;

/// Multiplier on `err_H(d, η; C = 1)` fixed by [`calibrate_k_cal`] on the
/// reference fixture (linear spectrum, n = 200, d = 10, η = 0.1, seed 2024,
/// 2000 trials, quantile level 1 - η/2), rounded up to two decimals.
pub const K_CAL: f64 = 1.37;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionCurvature {
    /// `λ_max(P Q Pᵀ)`.
    pub l_p: f64,
    pub beta_sec: f64,
    pub delta: f64,
    /// Extreme eigenvalues of `A = P M Pᵀ`.
    pub a_spectrum: (f64, f64),
}

/// `λ_max(P Q Pᵀ)`.
pub fn section_curvature(q: &Matrix, frame: &StiefelFrame) -> Result<f64> {
    Ok(sym_extremes(&frame.compress(q)?).1)
}

/// `λ_min(A) / (2 sqrt(δ λ_max(A)))`.
pub fn beta_sec(a: &Matrix, delta: f64) -> Result<f64> {
    let (lo, hi) = sym_extremes(a);
    beta_sec_from_extremes(lo, hi, delta)
}

pub fn beta_sec_from_extremes(lambda_min: f64, lambda_max: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(RsfwError::InvalidParameter(format!("section level must be positive, got {delta:e}")));
    }
    if !(lambda_min > 0.0) {
        return Err(RsfwError::InvalidParameter("section matrix must be positive definite".into()));
    }
    Ok(lambda_min / (2.0 * (delta * lambda_max).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedStep {
    pub alpha: f64,
    pub curvature: SectionCurvature,
    pub section: SectionResult,
}

impl CompressedStep {
    /// `α < 1` with a nonzero move.
    pub fn is_short_branch(&self) -> bool {
        self.alpha > 0.0 && self.alpha < 1.0
    }

    /// Guaranteed decrease `(β_sec / (2 L_P)) |Pg| gap`.
    pub fn predicted_decrease(&self) -> f64 {
        self.curvature.beta_sec / (2.0 * self.curvature.l_p) * self.section.pg_norm * self.section.gap
    }
}

/// Ellipsoid section step with `α = min{1, gap / (L_P |d|²)}`.
pub fn compressed_short_step(
    q: &Matrix,
    m: &Ellipsoid,
    x: &Vector,
    frame: &StiefelFrame,
    g: &Vector,
) -> Result<CompressedStep> {
    let section = section_lmo_ellipsoid(m, x, frame, g)?;
    let parts = ellipsoid_section_parts(m, x, frame)?;
    let l_p = section_curvature(q, frame)?;
    let a_spectrum = (parts.factor.lambda_min, parts.factor.lambda_max);
    let beta = if parts.delta > 0.0 {
        beta_sec_from_extremes(a_spectrum.0, a_spectrum.1, parts.delta)?
    } else {
        0.0
    };
    let norm2 = section.direction(x).norm_squared();
    let alpha = if norm2 == 0.0 {
        0.0
    } else if l_p <= 0.0 {
        if section.gap > 0.0 { 1.0 } else { 0.0 }
    } else {
        short_step_alpha(section.gap, l_p, norm2)?
    };
    Ok(CompressedStep {
        alpha,
        curvature: SectionCurvature { l_p, beta_sec: beta, delta: parts.delta, a_spectrum },
        section,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentRecord {
    pub k: usize,
    pub alpha: f64,
    pub short_branch: bool,
    pub f_before: f64,
    pub f_after: f64,
    pub predicted_decrease: f64,
    pub l_p: f64,
    pub beta_sec: f64,
    /// `f_after - (f_before - predicted_decrease)`; nonpositive when the bound holds.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedRun {
    pub records: Vec<DescentRecord>,
    pub final_x: Vector,
}

impl CompressedRun {
    /// Largest descent excess over short-branch iterations.
    pub fn max_short_branch_excess(&self) -> f64 {
        self.records.iter().filter(|r| r.short_branch).map(|r| r.excess).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn short_branch_count(&self) -> usize {
        self.records.iter().filter(|r| r.short_branch).count()
    }
}

/// RSFW with compressed short steps on a quadratic over `{xᵀMx ≤ 1}`.
///
/// Frames follow the solver's seed derivation, so the iterates coincide with
/// `rsfw_run` under `StepRule::CompressedShortStep`. With `strict`, the first
/// short-branch iteration violating the descent bound by more than
/// [`DESCENT_TOL`] aborts the run.
pub fn compressed_run(
    f: &Quadratic,
    m: &Ellipsoid,
    iterations: usize,
    d: usize,
    seed: u64,
    strict: bool,
) -> Result<CompressedRun> {
    let n = m.dim();
    let mut x = m.initial_point();
    let q = f.q();
    let mut records = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let frame = StiefelFrame::sample(n, d, derive_seed(seed, &[0, k as u64]))?;
        let f_before = f.value(&x);
        let g = f.gradient(&x);
        let step = compressed_short_step(q, m, &x, &frame, &g)?;
        if step.alpha > 0.0 {
            x += (&step.section.s - &x) * step.alpha;
        }
        let f_after = f.value(&x);
        let predicted = step.predicted_decrease();
        let rec = DescentRecord {
            k,
            alpha: step.alpha,
            short_branch: step.is_short_branch(),
            f_before,
            f_after,
            predicted_decrease: predicted,
            l_p: step.curvature.l_p,
            beta_sec: step.curvature.beta_sec,
            excess: f_after - (f_before - predicted),
        };
        if strict && rec.short_branch && rec.excess > DESCENT_TOL {
            return Err(RsfwError::OracleFailure(format!(
                "descent bound violated at k={k} by {:e}",
                rec.excess
            )));
        }
        records.push(rec);
    }
    Ok(CompressedRun { records, final_x: x })
}

/// `C (|H_c|_F / n sqrt(d + log(2/η)) + |H_c|₂ / n (d + log(2/η)))` with `H_c = H - (tr H / n) I`.
pub fn haar_compression_error(h: &Matrix, d: usize, eta: f64, c: f64) -> Result<f64> {
    let (fro, op) = centered_norms(h)?;
    compression_error_from_norms(fro, op, h.nrows(), d, eta, c)
}

fn centered_norms(h: &Matrix) -> Result<(f64, f64)> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(RsfwError::InvalidDimension("H must be square and nonempty".into()));
    }
    let mut hc = h.clone();
    let mean = h.trace() / n as f64;
    for i in 0..n {
        hc[(i, i)] -= mean;
    }
    Ok((hc.norm(), sym_operator_norm(&hc)))
}

fn compression_error_from_norms(fro: f64, op: f64, n: usize, d: usize, eta: f64, c: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(RsfwError::InvalidParameter(format!("eta must lie in (0,1), got {eta}")));
    }
    if !(c > 0.0) {
        return Err(RsfwError::InvalidParameter(format!("constant must be positive, got {c}")));
    }
    if d == 0 || d > n {
        return Err(RsfwError::InvalidDimension(format!("need 1 <= d <= n, got d={d}, n={n}")));
    }
    let t = d as f64 + (2.0 / eta).ln();
    let n = n as f64;
    Ok(c * (fro / n * t.sqrt() + op / n * t))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    pub trials: usize,
    pub k_cal: f64,
    /// `tr H / n`.
    pub lambda_bar: f64,
    /// `err_H(d, η; C = 1)`.
    pub err_bound: f64,
    /// `|P H Pᵀ - λ̄ I|₂` per trial.
    pub deviations: Vec<f64>,
    pub median_deviation: f64,
    pub max_deviation: f64,
    /// Fraction of trials with deviation at most `k_cal · err_bound`.
    pub coverage: f64,
    /// Smallest and largest eigenvalue of `P H Pᵀ` over all trials.
    pub eigen_range: (f64, f64),
    /// `[λ̄ - max deviation, λ̄ + max deviation]`.
    pub sandwich: (f64, f64),
}

impl SandwichReport {
    pub fn coverage_at(&self, k_cal: f64) -> f64 {
        let bound = k_cal * self.err_bound + rounding_slack(self.lambda_bar);
        self.deviations.iter().filter(|&&v| v <= bound).count() as f64 / self.trials as f64
    }

    /// Ratios `deviation / err_bound`, sorted.
    pub fn sorted_ratios(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.deviations.iter().map(|v| v / self.err_bound).collect();
        r.sort_by(f64::total_cmp);
        r
    }
}

/// Compresses `H` by `trials` independent Haar frames (trial `t` uses seed
/// `derive_seed(seed, [t])`) and records the deviation from `λ̄ I`.
pub fn spectral_sandwich_check(
    h: &Matrix,
    d: usize,
    eta: f64,
    trials: usize,
    seed: u64,
    k_cal: f64,
) -> Result<SandwichReport> {
    let n = h.nrows();
    if trials < 100 {
        return Err(RsfwError::InvalidParameter(format!("need at least 100 trials, got {trials}")));
    }
    if !(k_cal > 0.0) {
        return Err(RsfwError::InvalidParameter(format!("K_cal must be positive, got {k_cal}")));
    }
    let err_bound = haar_compression_error(h, d, eta, 1.0)?;
    let lambda_bar = h.trace() / n as f64;
    let per_trial: Vec<Result<(f64, f64, f64)>> = par_map_indexed(trials, |t| {
        let frame = StiefelFrame::sample(n, d, derive_seed(seed, &[t as u64]))?;
        let mut c = frame.compress(h)?;
        let (lo, hi) = sym_extremes(&c);
        for i in 0..d {
            c[(i, i)] -= lambda_bar;
        }
        Ok((sym_operator_norm(&c), lo, hi))
    });
    let mut deviations = Vec::with_capacity(trials);
    let mut eigen_range = (f64::INFINITY, f64::NEG_INFINITY);
    for r in per_trial {
        let (dev, lo, hi) = r?;
        deviations.push(dev);
        eigen_range = (eigen_range.0.min(lo), eigen_range.1.max(hi));
    }
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    let bound = k_cal * err_bound + rounding_slack(lambda_bar);
    let covered = deviations.iter().filter(|&&v| v <= bound).count();
    Ok(SandwichReport {
        n,
        d,
        eta,
        trials,
        k_cal,
        lambda_bar,
        err_bound,
        median_deviation: median(&deviations),
        max_deviation,
        coverage: covered as f64 / trials as f64,
        eigen_range,
        sandwich: (lambda_bar - max_deviation, lambda_bar + max_deviation),
        deviations,
    })
}

/// Eigenvalue rounding absorbed into every coverage comparison.
fn rounding_slack(lambda_bar: f64) -> f64 {
    1e-12 * lambda_bar.abs().max(1.0)
}

/// Empirical quantile of `deviation / err_H(d, η; 1)` at `level`, rounded up to two decimals.
pub fn calibrate_k_cal(h: &Matrix, d: usize, eta: f64, trials: usize, seed: u64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(RsfwError::InvalidParameter(format!("level must lie in (0,1), got {level}")));
    }
    let report = spectral_sandwich_check(h, d, eta, trials, seed, 1.0)?;
    let ratios = report.sorted_ratios();
    let idx = ((level * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    Ok((ratios[idx] * 100.0).ceil() / 100.0)
}

/// `diag(lo, ..., hi)` with `n` equally spaced entries.
pub fn linear_spectrum(n: usize, lo: f64, hi: f64) -> Matrix {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    Matrix::from_diagonal(&Vector::from_fn(n, |i, _| lo + step * i as f64))
}

/// The calibration fixture: spectrum `1, ..., 2` on `n = 200`.
pub fn calibration_matrix() -> Matrix {
    linear_spectrum(200, 1.0, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImprovementFactor {
    pub value: f64,
    /// `λ_max(Q) / λ̄`.
    pub anisotropy: f64,
    /// `sqrt(μ̄ λ_max(M)) / (λ_min(M) sqrt(δ))`.
    pub geometry: f64,
    pub r_m: f64,
    pub r_q: f64,
}

/// Lower bound on the ratio of section to ambient curvature coefficients:
/// `(λ_max(Q)/λ̄) (sqrt(μ̄ λ_max(M)) / (λ_min(M) sqrt δ)) (1 - r_M) / ((1 + r_Q) sqrt(1 + r_M))`
/// with `r_M = err_M(d, η/2) / μ̄` and `r_Q = err_Q(d, η/2) / λ̄`.
pub fn improvement_factor(m: &Matrix, q: &Matrix, delta: f64, d: usize, eta: f64, c: f64) -> Result<ImprovementFactor> {
    let n = m.nrows();
    if q.nrows() != n {
        return Err(RsfwError::DimensionMismatch { expected: n, got: q.nrows() });
    }
    if !(delta > 0.0) {
        return Err(RsfwError::InvalidParameter(format!("section level must be positive, got {delta:e}")));
    }
    let lambda_bar = q.trace() / n as f64;
    let mu_bar = m.trace() / n as f64;
    if !(lambda_bar > 0.0) {
        return Err(RsfwError::InvalidParameter("tr(Q) must be positive".into()));
    }
    let (m_min, m_max) = sym_extremes(m);
    if !(m_min > 0.0) {
        return Err(RsfwError::InvalidParameter("M must be positive definite".into()));
    }
    let q_max = sym_extremes(q).1;
    let r_m = haar_compression_error(m, d, eta / 2.0, c)? / mu_bar;
    let r_q = haar_compression_error(q, d, eta / 2.0, c)? / lambda_bar;
    improvement_from_parts(q_max / lambda_bar, (mu_bar * m_max).sqrt() / (m_min * delta.sqrt()), r_m, r_q)
}

pub fn improvement_from_parts(anisotropy: f64, geometry: f64, r_m: f64, r_q: f64) -> Result<ImprovementFactor> {
    if r_m >= 1.0 {
        return Err(RsfwError::Unsupported(format!("bound inapplicable: r_M = {r_m} >= 1")));
    }
    let value = anisotropy * geometry * (1.0 - r_m) / ((1.0 + r_q) * (1.0 + r_m).sqrt());
    Ok(ImprovementFactor { value, anisotropy, geometry, r_m, r_q })
}

/// `1.5 λ_max((K S)ᵀ(K S) / (4n) + λ Sᵀ K S)` for a section basis `S = Pᵀ`.
pub fn logistic_section_smoothness(problem: &RandomFeatureLogistic, frame: &StiefelFrame) -> Result<f64> {
    let s = frame.rows().transpose();
    let ks = problem.kernel_apply_block(&s);
    let n = problem.dim() as f64;
    let mut m = ks.transpose() * &ks / (4.0 * n) + s.transpose() * &ks * problem.lambda();
    m = crate::linalg::symmetrize(&m);
    Ok(1.5 * sym_extremes(&m).1)
}
