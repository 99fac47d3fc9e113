//! Random-subspace Frank-Wolfe, full Frank-Wolfe, and finite-sum stochastic RSFW.
//!
//! Iteration `k` samples a frame from seed `derive_seed(seed, [0, k])`, so a
//! run is a pure function of its configuration. Stochastic gradient draws use
//! a separate stream and never perturb the frame sequence.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsfwError};
use crate::linalg::{sym_extremes, Vector};
use crate::oracles::{SectionOracle, NEGATIVE_GAP_TOL};
use crate::problem::{FiniteSum, Objective};
use crate::rng::{derive_seed, stream};
use crate::stats::{par_map_indexed, Summary};
use crate::stiefel::StiefelFrame;

/// Step-size rule. Every rule's output is clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    /// `α_k = 2/(β₀ k + 2)`.
    OpenLoop { beta0: f64 },
    /// `α = min{1, gap/(L |d|²)}`.
    ShortStep { l: f64 },
    /// Short step with `L_P = λ_max(P Q Pᵀ)` from the objective's Hessian.
    CompressedShortStep,
    /// Exact line minimizer for objectives with constant Hessian.
    ExactDirectional,
}

impl StepRule {
    pub fn name(&self) -> &'static str {
        match self {
            StepRule::OpenLoop { .. } => "open_loop",
            StepRule::ShortStep { .. } => "short_step",
            StepRule::CompressedShortStep => "compressed_short_step",
            StepRule::ExactDirectional => "exact_directional",
        }
    }

    /// Rules whose accepted steps never increase `f`.
    pub fn is_monotone(&self) -> bool {
        !matches!(self, StepRule::OpenLoop { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepRule::OpenLoop { beta0 } if !(beta0 > 0.0 && beta0 <= 1.0) => {
                Err(RsfwError::InvalidParameter(format!("beta0 must lie in (0,1], got {beta0}")))
            }
            StepRule::ShortStep { l } if !(l > 0.0 && l.is_finite()) => {
                Err(RsfwError::InvalidParameter(format!("L must be positive, got {l}")))
            }
            _ => Ok(()),
        }
    }
}

pub fn open_loop_alpha(k: usize, beta0: f64) -> Result<f64> {
    if !(beta0 > 0.0 && beta0 <= 1.0) {
        return Err(RsfwError::InvalidParameter(format!("beta0 must lie in (0,1], got {beta0}")));
    }
    Ok(2.0 / (beta0 * k as f64 + 2.0))
}

pub fn short_step_alpha(gap: f64, l: f64, step_norm2: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(RsfwError::InvalidParameter(format!("L must be positive, got {l}")));
    }
    if gap < -NEGATIVE_GAP_TOL {
        return Err(RsfwError::NegativeGap(gap));
    }
    if step_norm2 == 0.0 {
        return Ok(0.0);
    }
    Ok((gap.max(0.0) / (l * step_norm2)).min(1.0))
}

/// Minimizer over `[0, 1]` of `f(x + α d)` when `f` has constant Hessian:
/// `α = gap / (dᵀ∇²f d)` clipped. A flat direction with positive gap gives 1.
pub fn exact_directional_alpha<O: Objective + ?Sized>(problem: &O, x: &Vector, s: &Vector) -> Result<f64> {
    let d = s - x;
    let curv = problem
        .hessian_quadratic(&d)
        .ok_or_else(|| RsfwError::Unsupported("exact directional step needs a constant Hessian".into()))?;
    let gap = problem.gradient(x).dot(&(x - s));
    if gap <= 0.0 {
        return Ok(0.0);
    }
    if curv <= 0.0 {
        return Ok(1.0);
    }
    Ok((gap / curv).min(1.0))
}

/// `b_k = ⌈(k + 2/β₀)² / A_mb⌉`, before capping.
pub fn batch_size(k: usize, beta0: f64, a_mb: f64) -> usize {
    let t = k as f64 + 2.0 / beta0;
    (t * t / a_mb).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticConfig {
    pub a_mb: f64,
    pub beta0: f64,
}

/// How section frames are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrameSource {
    #[default]
    Haar,
    /// The first `d` coordinate axes every iteration.
    Coordinate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub iterations: usize,
    pub d: usize,
    pub seed: u64,
    pub rule: StepRule,
    pub x0: Option<Vector>,
    pub frames: FrameSource,
    pub stochastic: Option<StochasticConfig>,
    /// Record wall-clock columns; when off they are written as zero.
    pub timing: bool,
    /// Keep `x_k` every this many iterations (and at the end) for offline diagnostics.
    pub snapshot_every: Option<usize>,
}

impl SolverConfig {
    pub fn new(iterations: usize, d: usize, seed: u64, rule: StepRule) -> Self {
        Self {
            iterations,
            d,
            seed,
            rule,
            x0: None,
            frames: FrameSource::Haar,
            stochastic: None,
            timing: false,
            snapshot_every: None,
        }
    }

    fn validate(&self, n: usize, uses_frames: bool) -> Result<()> {
        if self.iterations == 0 {
            return Err(RsfwError::InvalidParameter("iterations must be at least 1".into()));
        }
        if uses_frames && (self.d == 0 || self.d > n) {
            return Err(RsfwError::InvalidDimension(format!("need 1 <= d <= n, got d={}, n={n}", self.d)));
        }
        self.rule.validate()
    }
}

/// One iteration: `f` and the gap are evaluated at `x_k`, and `step_norm` is `|x_{k+1} - x_k|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f: f64,
    pub gap_section: f64,
    pub alpha: f64,
    pub step_norm: f64,
    pub batch: Option<usize>,
    pub elapsed_ns: u64,
    pub oracle_ns: u64,
    pub gap_full: Option<f64>,
    #[serde(skip)]
    pub grad_norm: f64,
    #[serde(skip)]
    pub pg_norm: f64,
    #[serde(skip)]
    pub direction_norm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub rule: StepRule,
    pub iterations: usize,
    pub final_f: f64,
    pub f_star: Option<f64>,
    pub wall_ns: u64,
    /// Smallest gradient norm seen along the run.
    pub min_grad_norm: f64,
    /// Iterations at which the requested batch exceeded the component count.
    pub batch_cap_hits: usize,
    pub first_capped_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub summary: RunSummary,
    pub final_x: Vector,
    pub snapshots: Vec<(usize, Vector)>,
}

/// A run aborted by an oracle or configuration error, with the iterations completed so far.
#[derive(Debug, Clone)]
pub struct RunError {
    pub partial: Box<RunTrace>,
    pub cause: RsfwError,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} iterations: {}", self.partial.records.len(), self.cause)
    }
}

impl std::error::Error for RunError {}

impl From<RunError> for RsfwError {
    fn from(e: RunError) -> Self {
        e.cause
    }
}

pub type RunResult = std::result::Result<RunTrace, RunError>;

pub const CSV_HEADER: &str = "k,f,gap_section,alpha,step_norm,batch,elapsed_ns,oracle_ns";

impl RunTrace {
    /// `f(x_0), ..., f(x_K)`.
    pub fn objective_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.records.iter().map(|r| r.f).collect();
        v.push(self.summary.final_f);
        v
    }

    /// `f(x_k) - f*` for `k = 0..=K`.
    pub fn suboptimality(&self) -> Option<Vec<f64>> {
        let fs = self.summary.f_star?;
        Some(self.objective_values().into_iter().map(|f| f - fs).collect())
    }

    pub fn to_csv(&self) -> String {
        let with_full = self.records.iter().any(|r| r.gap_full.is_some());
        let mut out = String::from(CSV_HEADER);
        if with_full {
            out.push_str(",gap_full");
        }
        out.push('\n');
        for r in &self.records {
            let batch = r.batch.map(|b| b.to_string()).unwrap_or_default();
            write!(
                out,
                "{},{:e},{:e},{:e},{:e},{},{},{}",
                r.k, r.f, r.gap_section, r.alpha, r.step_norm, batch, r.elapsed_ns, r.oracle_ns
            )
            .unwrap();
            if with_full {
                out.push(',');
                if let Some(g) = r.gap_full {
                    write!(out, "{g:e}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// Fills `gap_full` on snapshot iterations, after the timed loop.
    pub fn attach_full_gap<O, S>(&mut self, problem: &O, set: &S) -> Result<()>
    where
        O: Objective + ?Sized,
        S: SectionOracle + ?Sized,
    {
        for (k, x) in &self.snapshots {
            if let Some(r) = self.records.get_mut(*k) {
                r.gap_full = Some(fw_gap_full(problem, set, x)?);
            }
        }
        Ok(())
    }
}

/// `Δ(x) = max_{y ∈ C} ⟨∇f(x), x - y⟩`.
pub fn fw_gap_full<O, S>(problem: &O, set: &S, x: &Vector) -> Result<f64>
where
    O: Objective + ?Sized,
    S: SectionOracle + ?Sized,
{
    let g = problem.gradient(x);
    match set.full_lmo(&g) {
        Ok(s) => Ok(g.dot(&(x - s)).max(0.0)),
        Err(RsfwError::ZeroGradient) => Ok(0.0),
        Err(e) => Err(e),
    }
}

enum Oracle {
    Section { d: usize, frames: FrameSource },
    Full,
}

struct StepInfo {
    s: Vector,
    gap: f64,
    pg_norm: f64,
    frame: Option<StiefelFrame>,
}

fn frame_for(n: usize, d: usize, frames: FrameSource, seed: u64, k: usize) -> Result<StiefelFrame> {
    match frames {
        FrameSource::Haar => StiefelFrame::sample(n, d, derive_seed(seed, &[0, k as u64])),
        FrameSource::Coordinate => StiefelFrame::coordinate(n, d),
    }
}

fn choose_alpha<O: Objective + ?Sized>(
    rule: &StepRule,
    problem: &O,
    k: usize,
    x: &Vector,
    info: &StepInfo,
    step_norm2: f64,
) -> Result<f64> {
    let alpha = match *rule {
        StepRule::OpenLoop { beta0 } => open_loop_alpha(k, beta0)?,
        StepRule::ShortStep { l } => short_step_alpha(info.gap, l, step_norm2)?,
        StepRule::CompressedShortStep => {
            let q = problem
                .hessian_matrix()
                .ok_or_else(|| RsfwError::Unsupported("compressed short step needs a constant Hessian".into()))?;
            let l_p = match &info.frame {
                Some(frame) => sym_extremes(&frame.compress(&q)?).1,
                None => sym_extremes(&q).1,
            };
            if l_p <= 0.0 {
                if info.gap > 0.0 { 1.0 } else { 0.0 }
            } else {
                short_step_alpha(info.gap, l_p, step_norm2)?
            }
        }
        StepRule::ExactDirectional => {
            if step_norm2 == 0.0 {
                0.0
            } else {
                exact_directional_alpha(problem, x, &info.s)?
            }
        }
    };
    Ok(alpha.clamp(0.0, 1.0))
}

fn method_name(oracle: &Oracle, stochastic: bool) -> &'static str {
    match (oracle, stochastic) {
        (Oracle::Full, _) => "full_fw",
        (Oracle::Section { .. }, false) => "rsfw",
        (Oracle::Section { .. }, true) => "stochastic_rsfw",
    }
}

/// Shared driver. `grad` returns the (possibly sampled) gradient and batch size used.
fn drive<O, S, G>(problem: &O, set: &S, config: &SolverConfig, oracle: Oracle, mut grad: G) -> RunResult
where
    O: Objective + ?Sized,
    S: SectionOracle + ?Sized,
    G: FnMut(usize, &Vector) -> (Vector, Option<(usize, usize)>),
{
    let n = set.dim();
    let stochastic = config.stochastic.is_some();
    let mut summary = RunSummary {
        method: method_name(&oracle, stochastic).to_string(),
        seed: config.seed,
        n,
        d: match oracle {
            Oracle::Section { d, .. } => d,
            Oracle::Full => n,
        },
        rule: config.rule,
        iterations: config.iterations,
        final_f: f64::NAN,
        f_star: problem.f_star(),
        wall_ns: 0,
        min_grad_norm: f64::INFINITY,
        batch_cap_hits: 0,
        first_capped_k: None,
    };
    let x0 = config.x0.clone().unwrap_or_else(|| set.initial_point());
    let mut trace = RunTrace { records: Vec::new(), summary: summary.clone(), final_x: x0.clone(), snapshots: Vec::new() };
    let fail = |mut trace: RunTrace, cause: RsfwError| -> RunResult {
        trace.summary.final_f = f64::NAN;
        Err(RunError { partial: Box::new(trace), cause })
    };
    if let Err(e) = config.validate(n, matches!(oracle, Oracle::Section { .. })) {
        return fail(trace, e);
    }
    if problem.dim() != n || x0.len() != n {
        return fail(trace, RsfwError::DimensionMismatch { expected: n, got: x0.len().min(problem.dim()) });
    }
    match set.contains(&x0) {
        Ok(true) => {}
        Ok(false) => return fail(trace, RsfwError::Infeasible("initial point is not feasible".into())),
        Err(e) => return fail(trace, e),
    }
    let start = Instant::now();
    let mut x = x0;
    for k in 0..config.iterations {
        if config.snapshot_every.is_some_and(|s| s > 0 && k % s == 0) {
            trace.snapshots.push((k, x.clone()));
        }
        let f = problem.value(&x);
        let (g, batch) = grad(k, &x);
        let grad_norm = g.norm();
        summary.min_grad_norm = summary.min_grad_norm.min(grad_norm);
        if let Some((requested, used)) = batch {
            if requested > used {
                summary.batch_cap_hits += 1;
                summary.first_capped_k.get_or_insert(k);
            }
        }
        let oracle_start = Instant::now();
        let info = match &oracle {
            Oracle::Section { d, frames } => {
                let frame = match frame_for(n, *d, *frames, config.seed, k) {
                    Ok(f) => f,
                    Err(e) => return fail(trace, e),
                };
                match set.section_lmo(&x, &frame, &g) {
                    Ok(r) => StepInfo { s: r.s, gap: r.gap, pg_norm: r.pg_norm, frame: Some(frame) },
                    Err(e) => {
                        trace.summary = summary;
                        return fail(trace, e);
                    }
                }
            }
            Oracle::Full => match set.full_lmo(&g) {
                Ok(s) => {
                    let gap = g.dot(&(&x - &s));
                    if gap < -NEGATIVE_GAP_TOL * (1.0 + grad_norm * (&x - &s).norm()) {
                        trace.summary = summary;
                        return fail(trace, RsfwError::NegativeGap(gap));
                    }
                    StepInfo { s, gap: gap.max(0.0), pg_norm: grad_norm, frame: None }
                }
                Err(RsfwError::ZeroGradient) => StepInfo { s: x.clone(), gap: 0.0, pg_norm: 0.0, frame: None },
                Err(e) => {
                    trace.summary = summary;
                    return fail(trace, e);
                }
            },
        };
        let oracle_ns = oracle_start.elapsed().as_nanos() as u64;
        let dir = &info.s - &x;
        let step_norm2 = dir.norm_squared();
        let alpha = if step_norm2 == 0.0 {
            0.0
        } else {
            match choose_alpha(&config.rule, problem, k, &x, &info, step_norm2) {
                Ok(a) => a,
                Err(e) => {
                    trace.summary = summary;
                    return fail(trace, e);
                }
            }
        };
        if alpha > 0.0 {
            x.axpy(alpha, &dir, 1.0);
        }
        match set.contains(&x) {
            Ok(true) => {}
            Ok(false) => {
                trace.summary = summary;
                return fail(trace, RsfwError::OracleFailure(format!("iterate {} left the feasible set", k + 1)));
            }
            Err(e) => return fail(trace, e),
        }
        let elapsed_ns = start.elapsed().as_nanos() as u64;
        trace.records.push(IterationRecord {
            k,
            f,
            gap_section: info.gap,
            alpha,
            step_norm: alpha * step_norm2.sqrt(),
            batch: batch.map(|b| b.1),
            elapsed_ns: if config.timing { elapsed_ns } else { 0 },
            oracle_ns: if config.timing { oracle_ns } else { 0 },
            gap_full: None,
            grad_norm,
            pg_norm: info.pg_norm,
            direction_norm2: step_norm2,
        });
    }
    if config.snapshot_every.is_some_and(|s| s > 0) {
        trace.snapshots.push((config.iterations, x.clone()));
    }
    summary.final_f = problem.value(&x);
    summary.wall_ns = if config.timing { start.elapsed().as_nanos() as u64 } else { 0 };
    trace.summary = summary;
    trace.final_x = x;
    Ok(trace)
}

/// Algorithm: sample a frame, call the section LMO on `∇f(x_k)`, step by the rule.
pub fn rsfw_run<O, S>(problem: &O, set: &S, config: &SolverConfig) -> RunResult
where
    O: Objective + ?Sized,
    S: SectionOracle + ?Sized,
{
    let oracle = Oracle::Section { d: config.d, frames: config.frames };
    drive(problem, set, config, oracle, |_, x| (problem.gradient(x), None))
}

/// Frank-Wolfe with the set's full LMO; `config.d` is ignored.
pub fn full_fw_run<O, S>(problem: &O, set: &S, config: &SolverConfig) -> RunResult
where
    O: Objective + ?Sized,
    S: SectionOracle + ?Sized,
{
    drive(problem, set, config, Oracle::Full, |_, x| (problem.gradient(x), None))
}

/// Samples `b` component indices uniformly with replacement and returns
/// `(index, multiplicity)` pairs in index order.
pub fn sample_batch<R: Rng + ?Sized>(components: usize, b: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..b {
        *counts.entry(rng.random_range(0..components)).or_insert(0usize) += 1;
    }
    counts.into_iter().collect()
}

/// Finite-sum RSFW: mini-batch `b_k = ⌈(k + 2/β₀)²/A_mb⌉` capped at `N`, open-loop steps.
///
/// `config.rule` is replaced by the open-loop rule with the stochastic `β₀`.
pub fn stochastic_rsfw_run<O, S>(problem: &O, set: &S, config: &SolverConfig) -> RunResult
where
    O: FiniteSum + ?Sized,
    S: SectionOracle + ?Sized,
{
    let Some(st) = config.stochastic else {
        let e = RsfwError::InvalidParameter("stochastic run needs a stochastic block".into());
        return Err(RunError { partial: Box::new(empty_trace(problem.dim(), config)), cause: e });
    };
    let mut cfg = config.clone();
    cfg.rule = StepRule::OpenLoop { beta0: st.beta0 };
    if !(st.a_mb > 0.0) {
        let e = RsfwError::InvalidParameter(format!("A_mb must be positive, got {}", st.a_mb));
        return Err(RunError { partial: Box::new(empty_trace(problem.dim(), &cfg)), cause: e });
    }
    let n_comp = problem.components();
    let mut rng = stream(config.seed, &[1]);
    let oracle = Oracle::Section { d: cfg.d, frames: cfg.frames };
    drive(problem, set, &cfg, oracle, move |k, x| {
        let requested = batch_size(k, st.beta0, st.a_mb);
        let used = requested.min(n_comp);
        let counts = sample_batch(n_comp, used, &mut rng);
        (problem.batch_gradient(&counts, x), Some((requested, used)))
    })
}

fn empty_trace(n: usize, config: &SolverConfig) -> RunTrace {
    RunTrace {
        records: Vec::new(),
        summary: RunSummary {
            method: "stochastic_rsfw".into(),
            seed: config.seed,
            n,
            d: config.d,
            rule: config.rule,
            iterations: config.iterations,
            final_f: f64::NAN,
            f_star: None,
            wall_ns: 0,
            min_grad_norm: f64::NAN,
            batch_cap_hits: 0,
            first_capped_k: None,
        },
        final_x: Vector::zeros(n),
        snapshots: Vec::new(),
    }
}

/// Runs one trace per seed in parallel; output order follows `seeds`.
pub fn run_replicates<F>(seeds: &[u64], run: F) -> Vec<RunResult>
where
    F: Fn(u64) -> RunResult + Sync + Send,
{
    par_map_indexed(seeds.len(), |i| run(seeds[i]))
}

/// Per-iteration mean and standard deviation of `f(x_k)` across traces of equal length.
pub fn aggregate_objective(traces: &[RunTrace]) -> Vec<(usize, f64, f64)> {
    if traces.is_empty() {
        return Vec::new();
    }
    let len = traces.iter().map(|t| t.records.len() + 1).min().unwrap();
    let values: Vec<Vec<f64>> = traces.iter().map(|t| t.objective_values()).collect();
    (0..len)
        .map(|k| {
            let col: Vec<f64> = values.iter().map(|v| v[k]).collect();
            let s = Summary::of(&col);
            (k, s.mean, s.std)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, Ellipsoid};
    use crate::linalg::{random_unit, Matrix};
    use crate::problem::{FiniteSumQuadratic, LabeledQuadratic, Quadratic, SingleComponent};
    use crate::rng::rng_from_seed;

    fn e1(n: usize, scale: f64) -> Vector {
        Vector::from_fn(n, |i, _| if i == 0 { scale } else { 0.0 })
    }

    #[test]
    fn open_loop_examples() {
        for b in [0.01, 0.5, 1.0] {
            assert_eq!(open_loop_alpha(0, b).unwrap(), 1.0);
        }
        assert_eq!(open_loop_alpha(2, 1.0).unwrap(), 0.5);
        assert!((open_loop_alpha(8, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(open_loop_alpha(1, 0.0).is_err());
        assert!(open_loop_alpha(1, 1.5).is_err());
    }

    #[test]
    fn short_step_examples() {
        assert_eq!(short_step_alpha(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(short_step_alpha(2.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(short_step_alpha(0.5, 1.0, 1.0).unwrap(), 0.5);
        assert!(matches!(short_step_alpha(-1e-6, 1.0, 1.0), Err(RsfwError::NegativeGap(_))));
        assert_eq!(short_step_alpha(-1e-14, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn exact_directional_examples() {
        let lq = LabeledQuadratic::new(4, vec![0, 1], vec![1.0, -1.0]).unwrap();
        let x = Vector::zeros(4);
        // Direction off the labeled set: no curvature and no gap.
        let s = Vector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(exact_directional_alpha(&lq, &x, &s).unwrap(), 0.0);
        // Free descent: gap > 0 with zero curvature cannot happen for a
        // labeled quadratic, so use a linear objective.
        let lin = Quadratic::new(Matrix::zeros(2, 2), Vector::from_vec(vec![1.0, 0.0]), 0.0).unwrap();
        let a = exact_directional_alpha(&lin, &Vector::zeros(2), &Vector::from_vec(vec![-1.0, 0.0])).unwrap();
        assert_eq!(a, 1.0);
        // Numerator equals denominator.
        let s = Vector::from_vec(vec![2.0, -2.0, 0.0, 0.0]);
        assert_eq!(exact_directional_alpha(&lq, &x, &s).unwrap(), 0.5);
        let s = Vector::from_vec(vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!(exact_directional_alpha(&lq, &x, &s).unwrap(), 1.0);
        // Probe optimality.
        let mut rng = rng_from_seed(1);
        let x = random_unit(4, &mut rng);
        let s = random_unit(4, &mut rng) * 3.0;
        let a = exact_directional_alpha(&lq, &x, &s).unwrap();
        let at = |t: f64| lq.value(&(&x + (&s - &x) * t));
        for i in 0..=100 {
            assert!(at(a) <= at(i as f64 / 100.0) + 1e-14);
        }
    }

    #[test]
    fn batch_rule() {
        assert_eq!(batch_size(0, 1.0, 4.0), 1);
        assert_eq!(batch_size(2, 1.0, 4.0), 4);
        assert_eq!(batch_size(0, 0.5, 4.0), 4);
    }

    #[test]
    fn interior_optimum_is_reached() {
        let a = Vector::from_vec(vec![0.3, -0.2, 0.1, 0.0, 0.2]);
        let f = Quadratic::distance_to(&a).with_f_star(0.0);
        let ball = Ball::unit(5);
        let cfg = SolverConfig::new(100, 5, 1, StepRule::ShortStep { l: 1.0 });
        let t = rsfw_run(&f, &ball, &cfg).unwrap();
        assert!(t.summary.final_f <= 1e-10);
    }

    #[test]
    fn identity_frames_match_full_fw() {
        let a = e1(6, 3.0) + Vector::from_element(6, 0.4);
        let f = Quadratic::distance_to(&a);
        let el = Ellipsoid::diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut cfg = SolverConfig::new(50, 6, 3, StepRule::ShortStep { l: 1.0 });
        cfg.frames = FrameSource::Coordinate;
        let r = rsfw_run(&f, &el, &cfg).unwrap();
        let fw = full_fw_run(&f, &el, &cfg).unwrap();
        for (a, b) in r.objective_values().iter().zip(fw.objective_values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let dx = (&r.final_x - &fw.final_x).norm();
        assert!(dx < 1e-7, "{dx}");
    }

    #[test]
    fn short_step_runs_are_monotone_and_feasible() {
        let f = Quadratic::distance_to(&e1(20, 3.0));
        let ball = Ball::unit(20);
        for seed in 0..5 {
            let mut cfg = SolverConfig::new(200, 4, seed, StepRule::ShortStep { l: 1.0 });
            cfg.snapshot_every = Some(50);
            let mut t = rsfw_run(&f, &ball, &cfg).unwrap();
            let vals = t.objective_values();
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            t.attach_full_gap(&f, &ball).unwrap();
            let csv = t.to_csv();
            assert!(csv.starts_with("k,f,gap_section,alpha,step_norm,batch,elapsed_ns,oracle_ns,gap_full\n"));
            assert_eq!(csv.lines().count(), 201);
            for (k, _) in &t.snapshots {
                if *k < 200 {
                    let r = &t.records[*k];
                    assert!(r.gap_full.unwrap() >= r.f - 2.0 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn smoothness_bound_per_step() {
        let mut rng = rng_from_seed(4);
        let g = crate::linalg::gaussian_matrix(10, 10, &mut rng);
        let q = Quadratic::new(&g * g.transpose(), random_unit(10, &mut rng) * 20.0, 0.0).unwrap();
        let l = q.lambda_max();
        let el = Ellipsoid::diagonal(&[1.0; 10]).unwrap();
        let t = rsfw_run(&q, &el, &SolverConfig::new(100, 3, 9, StepRule::OpenLoop { beta0: 0.2 })).unwrap();
        let vals = t.objective_values();
        for (k, r) in t.records.iter().enumerate() {
            // ⟨g, d⟩ = -gap for the section direction.
            let bound = vals[k] - r.alpha * r.gap_section + 0.5 * l * r.alpha * r.alpha * r.direction_norm2;
            assert!(vals[k + 1] <= bound + 1e-9);
        }
    }

    #[test]
    fn determinism() {
        let f = Quadratic::distance_to(&e1(15, 2.0));
        let ball = Ball::unit(15);
        let cfg = SolverConfig::new(60, 3, 42, StepRule::OpenLoop { beta0: 0.1 });
        let a = rsfw_run(&f, &ball, &cfg).unwrap();
        let b = rsfw_run(&f, &ball, &cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.summary_json(), b.summary_json());
        let reps = run_replicates(&[42, 42], |s| rsfw_run(&f, &ball, &SolverConfig { seed: s, ..cfg.clone() }));
        assert_eq!(reps[0].as_ref().unwrap().to_csv(), a.to_csv());
        assert_eq!(reps[1].as_ref().unwrap().to_csv(), a.to_csv());
    }

    #[test]
    fn single_component_stochastic_equals_deterministic() {
        let f = Quadratic::distance_to(&e1(12, 2.0));
        let ball = Ball::unit(12);
        let mut cfg = SolverConfig::new(40, 3, 5, StepRule::OpenLoop { beta0: 0.3 });
        let det = rsfw_run(&f, &ball, &cfg).unwrap();
        cfg.stochastic = Some(StochasticConfig { a_mb: 4.0, beta0: 0.3 });
        let st = stochastic_rsfw_run(&SingleComponent(f.clone()), &ball, &cfg).unwrap();
        assert_eq!(det.objective_values(), st.objective_values());
        let fs = FiniteSumQuadratic::new(Matrix::identity(12, 12), vec![-e1(12, 2.0)]).unwrap();
        let st2 = stochastic_rsfw_run(&fs, &ball, &cfg).unwrap();
        // Same iterates; the finite-sum form omits the constant ½|a|².
        assert!((&det.final_x - &st2.final_x).norm() < 1e-14);
        for (a, b) in det.objective_values().iter().zip(st2.objective_values()) {
            assert!((a - b - 2.0).abs() < 1e-12);
        }
        assert!(st.records.iter().all(|r| r.batch == Some(1)));
        assert_eq!(st.summary.first_capped_k, Some(0));
    }

    #[test]
    fn stochastic_batches_follow_rule() {
        let mut rng = rng_from_seed(6);
        let rs: Vec<Vector> = (0..50).map(|_| random_unit(8, &mut rng)).collect();
        let fs = FiniteSumQuadratic::new(Matrix::identity(8, 8), rs).unwrap();
        let ball = Ball::unit(8);
        let mut cfg = SolverConfig::new(30, 2, 1, StepRule::ShortStep { l: 1.0 });
        cfg.stochastic = Some(StochasticConfig { a_mb: 4.0, beta0: 1.0 });
        let t = stochastic_rsfw_run(&fs, &ball, &cfg).unwrap();
        for r in &t.records {
            assert_eq!(r.batch, Some(batch_size(r.k, 1.0, 4.0).min(50)));
            assert_eq!(r.alpha, 2.0 / (r.k as f64 + 2.0));
        }
        assert_eq!(t.summary.first_capped_k, Some(13));
        cfg.stochastic = None;
        assert!(stochastic_rsfw_run(&fs, &ball, &cfg).is_err());
    }

    #[test]
    fn gradient_estimator_is_unbiased() {
        let mut rng = rng_from_seed(7);
        let rs: Vec<Vector> = (0..30).map(|_| random_unit(4, &mut rng)).collect();
        let fs = FiniteSumQuadratic::new(Matrix::identity(4, 4), rs).unwrap();
        let x = random_unit(4, &mut rng) * 0.5;
        let samples: Vec<Vector> = (0..10_000).map(|_| fs.batch_gradient(&sample_batch(30, 3, &mut rng), &x)).collect();
        let full = fs.gradient(&x);
        for i in 0..4 {
            let col: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            let s = Summary::of(&col);
            assert!((s.mean - full[i]).abs() <= 4.0 * s.stderr);
        }
    }

    #[test]
    fn infeasible_start_and_bad_config() {
        let f = Quadratic::distance_to(&e1(3, 1.0));
        let ball = Ball::unit(3);
        let mut cfg = SolverConfig::new(10, 2, 0, StepRule::ShortStep { l: 1.0 });
        cfg.x0 = Some(e1(3, 2.0));
        let err = rsfw_run(&f, &ball, &cfg).unwrap_err();
        assert!(matches!(err.cause, RsfwError::Infeasible(_)));
        let cfg = SolverConfig::new(10, 4, 0, StepRule::ShortStep { l: 1.0 });
        assert!(matches!(rsfw_run(&f, &ball, &cfg).unwrap_err().cause, RsfwError::InvalidDimension(_)));
        let cfg = SolverConfig::new(0, 2, 0, StepRule::ShortStep { l: 1.0 });
        assert!(rsfw_run(&f, &ball, &cfg).is_err());
    }

    #[test]
    fn fw_gap_closed_form() {
        let a = e1(5, 3.0) + Vector::from_element(5, 0.2);
        let f = Quadratic::distance_to(&a);
        let c = Vector::from_element(5, 0.1);
        let ball = Ball::new(c.clone(), 0.8).unwrap();
        let mut rng = rng_from_seed(8);
        for _ in 0..20 {
            let x = &c + random_unit(5, &mut rng) * 0.5;
            let g = f.gradient(&x);
            let v = (&c - &x) / 0.8;
            let want = 0.8 * (g.norm() - g.dot(&v)) + g.dot(&(&x - &c)) - g.dot(&(&x - &c));
            assert!((fw_gap_full(&f, &ball, &x).unwrap() - want).abs() < 1e-10);
        }
        let xs = ball.center() + (&a - &c).normalize() * 0.8;
        assert!(fw_gap_full(&f, &ball, &xs).unwrap() < 1e-8);
    }
}
