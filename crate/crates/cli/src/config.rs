//! Experiment configuration documents.
//!
//! One JSON document describes one experiment. Every random quantity is
//! derived from the master `seed` and explicit replicate indices, so a
//! config plus its seed fully determines the data files.

use std::path::{Path, PathBuf};

use rsfw::experiments::GraphSslSpec;
use rsfw::solver::FrameSource;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; `--seed` and `RSFW_SEED` override it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: FormatFlags,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatFlags {
    /// Emit SVG plots next to the aggregate CSVs.
    #[serde(default)]
    pub svg: bool,
    /// Add a `gap_full` column evaluated after the runs from snapshots.
    #[serde(default)]
    pub offline_full_gap: bool,
    /// Record wall-clock columns. Off by default so reruns are byte-identical.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Ratios(RatiosBlock),
    Solve(SolveBlock),
    Curvature(CurvatureBlock),
    Failure(FailureBlock),
    Stoch(StochBlock),
    Graph(GraphBlock),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Ratios(_) => "ratios",
            Experiment::Solve(_) => "solve",
            Experiment::Curvature(_) => "curvature",
            Experiment::Failure(_) => "failure",
            Experiment::Stoch(_) => "stoch",
            Experiment::Graph(_) => "graph",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub n: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatiosBlock {
    pub grid: Vec<GridPoint>,
    pub rho: Vec<f64>,
    pub samples: usize,
}

/// Step rule with optional parameters filled in from the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    /// `β₀` defaults to the geometry value for each `d`.
    OpenLoop {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta0: Option<f64>,
    },
    /// `l` defaults to the objective's smoothness constant. With `l_grid`,
    /// the smallest grid value giving a monotone trace on the first
    /// replicate is used for every replicate of that (method, d) pair.
    ShortStep {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l_grid: Option<Vec<f64>>,
    },
    CompressedShortStep,
    ExactDirectional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rsfw,
    FullFw,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rsfw => "rsfw",
            Method::FullFw => "full_fw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub methods: Vec<Method>,
    pub rule: RuleSpec,
    pub iterations: usize,
    /// Section dimensions; ignored by full FW.
    pub d: Vec<usize>,
    /// Replicate indices. Run seeds are derived from the master seed and these.
    pub replicates: Vec<u64>,
    #[serde(default)]
    pub frames: FrameSource,
    /// Snapshot spacing for the offline full gap.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
}

fn default_snapshot_every() -> usize {
    10
}

/// Problem generators. Each produces both the objective and its feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemBlock {
    /// Rotated quadratic with spectrum in `[1, cond]` over a diagonal ellipsoid.
    QuadraticEllipsoid { n: usize, cond: f64 },
    /// `½|x - t e₁|²` over the unit ball.
    BallDistance { n: usize, target: f64 },
    /// Random-feature logistic regression over a feature-form ellipsoid.
    /// Real data is read from headerless CSVs when both paths are given.
    LogisticRf {
        n: usize,
        m: usize,
        rho_k: f64,
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
        /// Full-FW iterations for the reference value; 0 skips it.
        #[serde(default)]
        reference_iterations: usize,
    },
    /// A saved instance document.
    Instance { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveBlock {
    pub problem: ProblemBlock,
    pub solver: SolverBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureBlock {
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    pub trials: usize,
    /// Linearly spaced spectrum endpoints of `H`.
    pub spectrum: [f64; 2],
    pub k_cal_grid: Vec<f64>,
    /// Extra sizes for the median-deviation comparison.
    #[serde(default)]
    pub compare_n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descent: Option<DescentBlock>,
}

/// Compressed short-step run on `Q = diag(1, ..., 1, q_max)` over an
/// ellipsoid with linearly spaced spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentBlock {
    pub n: usize,
    pub d: usize,
    pub iterations: usize,
    pub q_max: f64,
    pub m_spectrum: [f64; 2],
    /// `M`-norm of the unconstrained minimizer.
    pub outside: f64,
    /// Frames used for the median `L_P` statistic.
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureBlock {
    pub n: usize,
    pub d: usize,
    /// Start at `(delta/n) 1`.
    pub delta: f64,
    pub iterations: usize,
    pub l: f64,
    pub replicates: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochBlock {
    pub components: usize,
    pub n: usize,
    pub d: usize,
    pub a_mb: f64,
    pub iterations: usize,
    pub replicates: Vec<u64>,
    /// Defaults to the unit-ball geometry value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBlock {
    pub graph: GraphSslSpec,
    pub solver: SolverBlock,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match &self.experiment {
            Experiment::Ratios(b) => {
                require(!b.grid.is_empty(), "ratios.grid is empty")?;
                require(!b.rho.is_empty(), "ratios.rho is empty")?;
                require(b.samples >= 2, "ratios.samples must be at least 2")?;
                for g in &b.grid {
                    require(g.d >= 1 && g.d <= g.n, &format!("grid point needs 1 <= d <= n, got n={}, d={}", g.n, g.d))?;
                }
                for &r in &b.rho {
                    require((-1.0..1.0).contains(&r), &format!("rho must lie in [-1, 1), got {r}"))?;
                }
            }
            Experiment::Solve(b) => {
                let n = match &b.problem {
                    ProblemBlock::QuadraticEllipsoid { n, cond } => {
                        require(*cond >= 1.0, "cond must be at least 1")?;
                        Some(*n)
                    }
                    ProblemBlock::BallDistance { n, .. } => Some(*n),
                    ProblemBlock::LogisticRf { n, m, features, labels, .. } => {
                        require(features.is_some() == labels.is_some(), "features and labels must be given together")?;
                        require(*m >= 1, "m must be at least 1")?;
                        Some(*n)
                    }
                    ProblemBlock::Instance { .. } => None,
                };
                if let Some(n) = n {
                    require(n >= 1, "n must be at least 1")?;
                }
                b.solver.validate(n)?;
            }
            Experiment::Curvature(b) => {
                require(b.d >= 1 && b.d <= b.n, "curvature needs 1 <= d <= n")?;
                require(b.eta > 0.0 && b.eta < 1.0, "eta must lie in (0, 1)")?;
                require(b.trials >= 100, "curvature.trials must be at least 100")?;
                require(b.spectrum[0] <= b.spectrum[1], "spectrum must be increasing")?;
                require(b.k_cal_grid.iter().all(|k| *k > 0.0), "k_cal_grid entries must be positive")?;
                require(b.compare_n.iter().all(|&n| n >= b.d), "compare_n entries must be at least d")?;
                if let Some(ds) = &b.descent {
                    require(ds.d >= 1 && ds.d <= ds.n, "descent needs 1 <= d <= n")?;
                    require(ds.iterations >= 1, "descent.iterations must be at least 1")?;
                    require(ds.outside > 1.0, "descent.outside must exceed 1")?;
                    require(ds.m_spectrum[0] > 0.0 && ds.m_spectrum[0] <= ds.m_spectrum[1], "descent.m_spectrum invalid")?;
                }
            }
            Experiment::Failure(b) => {
                require(b.n >= 2 && b.d >= 1 && b.d <= b.n, "failure needs n >= 2 and 1 <= d <= n")?;
                require(b.iterations >= 1, "failure.iterations must be at least 1")?;
                require(b.l > 0.0, "failure.l must be positive")?;
                require(!b.replicates.is_empty(), "failure.replicates is empty")?;
            }
            Experiment::Stoch(b) => {
                require(b.components >= 1 && b.n >= 2, "stoch needs components >= 1 and n >= 2")?;
                require(b.d >= 2 && b.d <= b.n, "stoch needs 2 <= d <= n")?;
                require(b.a_mb > 0.0, "a_mb must be positive")?;
                require(b.iterations >= 1, "stoch.iterations must be at least 1")?;
                require(!b.replicates.is_empty(), "stoch.replicates is empty")?;
                if let Some(beta0) = b.beta0 {
                    require(beta0 > 0.0 && beta0 <= 1.0, "beta0 must lie in (0, 1]")?;
                }
            }
            Experiment::Graph(b) => {
                require(b.graph.m_nodes >= 5, "graph.m_nodes must be at least 5")?;
                require(b.graph.k_nn >= 1 && b.graph.k_nn < b.graph.m_nodes, "graph.k_nn must lie in [1, m_nodes)")?;
                b.solver.validate(Some(b.graph.m_nodes))?;
            }
        }
        Ok(())
    }
}

impl SolverBlock {
    fn validate(&self, n: Option<usize>) -> Result<(), CliError> {
        require(!self.methods.is_empty(), "solver.methods is empty")?;
        require(self.iterations >= 1, "solver.iterations must be at least 1")?;
        require(!self.replicates.is_empty(), "solver.replicates is empty")?;
        require(self.snapshot_every >= 1, "solver.snapshot_every must be at least 1")?;
        if self.methods.contains(&Method::Rsfw) {
            require(!self.d.is_empty(), "solver.d is empty")?;
            for &d in &self.d {
                require(d >= 1 && n.is_none_or(|n| d <= n), &format!("section dimension {d} out of range"))?;
            }
        }
        let mut seen = self.replicates.clone();
        seen.sort_unstable();
        seen.dedup();
        require(seen.len() == self.replicates.len(), "solver.replicates has duplicates")?;
        match &self.rule {
            RuleSpec::OpenLoop { beta0: Some(b) } => require(*b > 0.0 && *b <= 1.0, "beta0 must lie in (0, 1]"),
            RuleSpec::ShortStep { l, l_grid } => {
                require(l.is_none() || l_grid.is_none(), "give either l or l_grid, not both")?;
                require(l.is_none_or(|l| l > 0.0), "l must be positive")?;
                if let Some(g) = l_grid {
                    require(!g.is_empty() && g.iter().all(|l| *l > 0.0), "l_grid must be nonempty and positive")?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn require(ok: bool, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg.to_string()))
    }
}
