//! Replicated solver runs shared by `solve`, `failure` and `graph`.

use rsfw::experiments::smallest_monotone_l;
use rsfw::geometry::GeometryConstants;
use rsfw::rng::derive_seed;
use rsfw::solver::{full_fw_run, rsfw_run, run_replicates, RunResult, RunSummary, RunTrace, SolverConfig, StepRule};
use rsfw::{Objective, SectionOracle, Vector};
use serde::Serialize;

use crate::config::{Method, RuleSpec, SolverBlock};
use crate::error::CliError;
use crate::output::{num, Aggregate};
use crate::plot::{self, Series};
use crate::Context;

/// Seed of replicate `rep` under master seed `master`.
pub fn replicate_seed(master: u64, rep: u64) -> u64 {
    derive_seed(master, &[1, rep])
}

pub struct Instance<'a, O: ?Sized, S: ?Sized> {
    pub problem: &'a O,
    pub set: &'a S,
    /// Used for the default open-loop `β₀`.
    pub geometry: Option<GeometryConstants>,
    pub x0: Option<&'a Vector>,
}

/// Traces of one (method, d) pair.
pub struct Group {
    pub label: String,
    pub method: Method,
    pub d: usize,
    pub rule: StepRule,
    pub replicates: Vec<u64>,
    pub traces: Vec<RunTrace>,
    pub failures: Vec<String>,
}

#[derive(Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub method: &'static str,
    pub d: Option<usize>,
    pub rule: StepRule,
    pub iterations: usize,
    pub completed_runs: usize,
    pub failed_runs: usize,
    pub mean_final_f: Option<f64>,
    pub std_final_f: Option<f64>,
    pub f_star: Option<f64>,
    pub runs: Vec<RunSummary>,
    pub failures: Vec<String>,
}

impl Group {
    pub fn final_values(&self) -> Vec<f64> {
        self.traces.iter().filter(|t| t.records.len() == self.iterations()).map(|t| t.summary.final_f).collect()
    }

    fn iterations(&self) -> usize {
        self.traces.iter().map(|t| t.summary.iterations).max().unwrap_or(0)
    }

    pub fn summary(&self, f_star: Option<f64>) -> GroupSummary {
        let finals = self.final_values();
        let stats = (!finals.is_empty()).then(|| rsfw::stats::Summary::of(&finals));
        GroupSummary {
            label: self.label.clone(),
            method: self.method.name(),
            d: (self.method == Method::Rsfw).then_some(self.d),
            rule: self.rule.clone(),
            iterations: self.iterations(),
            completed_runs: finals.len(),
            failed_runs: self.failures.len(),
            mean_final_f: stats.map(|s| s.mean),
            std_final_f: stats.map(|s| s.std),
            f_star,
            runs: self.traces.iter().map(|t| t.summary.clone()).collect(),
            failures: self.failures.clone(),
        }
    }
}

fn resolve_rule<O, S>(
    spec: &RuleSpec,
    inst: &Instance<O, S>,
    n: usize,
    d: usize,
) -> Result<Option<StepRule>, CliError>
where
    O: Objective + ?Sized,
    S: SectionOracle + ?Sized,
{
    Ok(Some(match spec {
        RuleSpec::OpenLoop { beta0: Some(b) } => StepRule::OpenLoop { beta0: *b },
        RuleSpec::OpenLoop { beta0: None } => {
            let geo = inst.geometry.ok_or_else(|| {
                CliError::Config("this set has no closed-form geometry; give rule.beta0 explicitly".into())
            })?;
            let beta0 = geo.with_beta0(n, d)?.beta0.expect("set by with_beta0");
            StepRule::OpenLoop { beta0 }
        }
        RuleSpec::ShortStep { l: Some(l), .. } => StepRule::ShortStep { l: *l },
        RuleSpec::ShortStep { l: None, l_grid: None } => StepRule::ShortStep { l: inst.problem.smoothness() },
        RuleSpec::ShortStep { l: None, l_grid: Some(_) } => return Ok(None),
        RuleSpec::CompressedShortStep => StepRule::CompressedShortStep,
        RuleSpec::ExactDirectional => StepRule::ExactDirectional,
    }))
}

fn run_one<O, S>(inst: &Instance<O, S>, method: Method, cfg: &SolverConfig) -> RunResult
where
    O: Objective + ?Sized,
    S: SectionOracle + Sync + ?Sized,
{
    match method {
        Method::Rsfw => rsfw_run(inst.problem, inst.set, cfg),
        Method::FullFw => full_fw_run(inst.problem, inst.set, cfg),
    }
}

/// Runs every (method, d) pair of the block over all replicates.
pub fn run_block<O, S>(ctx: &Context, inst: &Instance<O, S>, block: &SolverBlock) -> Result<Vec<Group>, CliError>
where
    O: Objective + ?Sized,
    S: SectionOracle + Sync + ?Sized,
{
    let n = inst.problem.dim();
    if n != inst.set.dim() {
        return Err(CliError::Config(format!("objective has dimension {n} but the set has {}", inst.set.dim())));
    }
    let mut pairs = Vec::new();
    for &m in &block.methods {
        match m {
            Method::Rsfw => {
                for &d in &block.d {
                    if d > n {
                        return Err(CliError::Config(format!("section dimension {d} exceeds n = {n}")));
                    }
                    pairs.push((m, d, format!("rsfw_d{d}")));
                }
            }
            Method::FullFw => pairs.push((m, n, "full_fw".to_string())),
        }
    }
    let base = |d: usize, seed: u64, rule: StepRule| {
        let mut cfg = SolverConfig::new(block.iterations, d, seed, rule);
        cfg.frames = block.frames;
        cfg.timing = ctx.format.timing;
        cfg.x0 = inst.x0.cloned();
        cfg.snapshot_every = ctx.format.offline_full_gap.then_some(block.snapshot_every);
        cfg
    };
    let seeds: Vec<u64> = block.replicates.iter().map(|&r| replicate_seed(ctx.seed, r)).collect();

    let mut groups = Vec::new();
    for (method, d, label) in pairs {
        let rule = match resolve_rule(&block.rule, inst, n, d)? {
            Some(rule) => rule,
            None => {
                let RuleSpec::ShortStep { l_grid: Some(grid), .. } = &block.rule else { unreachable!() };
                let mut sorted = grid.clone();
                sorted.sort_by(f64::total_cmp);
                let found = smallest_monotone_l(&sorted, |l| {
                    run_one(inst, method, &base(d, seeds[0], StepRule::ShortStep { l })).map_err(rsfw::RsfwError::from)
                })?;
                let (l, _) = found.ok_or_else(|| {
                    CliError::Runtime(format!("{label}: no L in l_grid gives a monotone trace"))
                })?;
                StepRule::ShortStep { l }
            }
        };
        let results = run_replicates(&seeds, |s| run_one(inst, method, &base(d, s, rule.clone())));
        let mut traces = Vec::new();
        let mut failures = Vec::new();
        for (rep, r) in block.replicates.iter().zip(results) {
            match r {
                Ok(t) => traces.push(t),
                Err(e) => {
                    failures.push(format!("replicate {rep}: {}", e));
                    traces.push(*e.partial);
                }
            }
        }
        if ctx.format.offline_full_gap {
            for t in &mut traces {
                t.attach_full_gap(inst.problem, inst.set)?;
            }
        }
        groups.push(Group { label, method, d, rule, replicates: block.replicates.clone(), traces, failures });
    }
    Ok(groups)
}

/// Writes per-replicate traces, aggregates, optional plots, and returns the
/// group summaries. Partial traces of failed runs are written too.
pub fn write_groups(
    ctx: &mut Context,
    groups: &[Group],
    f_star: Option<f64>,
    title: &str,
) -> Result<Vec<GroupSummary>, CliError> {
    let mut aggregates = Vec::new();
    for g in groups {
        for (rep, t) in g.replicates.iter().zip(&g.traces) {
            ctx.out.write(&format!("trace_{}_rep{rep}.csv", g.label), &t.to_csv())?;
        }
        let complete: Vec<RunTrace> =
            g.traces.iter().filter(|t| t.records.len() == t.summary.iterations).cloned().collect();
        let agg = Aggregate::of(&complete, ctx.format.timing);
        ctx.out.write(&format!("aggregate_{}.csv", g.label), &agg.to_csv())?;
        aggregates.push(agg);
    }
    if ctx.format.svg {
        let offset = f_star.unwrap_or(0.0);
        let ks: Vec<Vec<f64>> = aggregates.iter().map(|a| a.k.iter().map(|&k| k as f64).collect()).collect();
        let series: Vec<Series> = groups
            .iter()
            .zip(&aggregates)
            .zip(&ks)
            .filter(|((_, a), _)| !a.k.is_empty())
            .map(|((g, a), k)| Series { label: &g.label, x: k, mean: &a.mean_f, std: &a.std_f })
            .collect();
        ctx.out.write("plot_iterations.svg", &plot::render(title, "iteration k", &series, offset))?;
        if ctx.format.timing {
            let series: Vec<Series> = groups
                .iter()
                .zip(&aggregates)
                .filter_map(|(g, a)| {
                    a.mean_elapsed_s.as_ref().map(|t| Series { label: &g.label, x: t, mean: &a.mean_f, std: &a.std_f })
                })
                .collect();
            ctx.out.write("plot_wall_time.svg", &plot::render(title, "mean wall time (s)", &series, offset))?;
        }
    }
    Ok(groups.iter().map(|g| g.summary(f_star)).collect())
}

/// Error describing every failed replicate, if any.
pub fn failures(groups: &[Group]) -> Option<CliError> {
    let msgs: Vec<String> =
        groups.iter().flat_map(|g| g.failures.iter().map(move |f| format!("{} {f}", g.label))).collect();
    (!msgs.is_empty()).then(|| CliError::Runtime(format!("{} run(s) failed: {}", msgs.len(), msgs.join("; "))))
}

/// Mean of `f_K - f*` over the completed traces of a group.
pub fn mean_final_gap(group: &Group, f_star: f64) -> Option<f64> {
    let finals = group.final_values();
    (!finals.is_empty()).then(|| finals.iter().map(|f| f - f_star).sum::<f64>() / finals.len() as f64)
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "n/a".into())
}
