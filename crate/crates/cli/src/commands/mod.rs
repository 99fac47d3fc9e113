mod curvature;
mod ratios;
pub mod runner;
mod stoch;

use rsfw::experiments::{
    gen_failure_instance, gen_graph_ssl, gen_logistic_rf_with, gen_quadratic_ellipsoid, load_instance, logistic_from_raw,
    read_feature_csv, read_label_csv, reference_by_full_fw, Instance as Loaded, LogisticSpec, FAILURE_TARGET,
};
use rsfw::geometry::{ball_geometry, ellipsoid_geometry, Ball};
use rsfw::problem::Quadratic;
use rsfw::rng::derive_seed;
use rsfw::{Objective, SectionOracle, Vector};
use serde::Serialize;

use crate::config::{Experiment, FailureBlock, GraphBlock, Method, ProblemBlock, SolveBlock, SolverBlock};
use crate::error::CliError;
use crate::Context;
use runner::{failures, fmt_opt, mean_final_gap, run_block, write_groups, GroupSummary, Instance};

pub use curvature::curvature;
pub use ratios::ratios;
pub use stoch::stoch;

/// Seed of the generated problem instance.
pub fn instance_seed(master: u64) -> u64 {
    derive_seed(master, &[0])
}

pub fn dispatch(ctx: &mut Context, experiment: &Experiment) -> Result<String, CliError> {
    match experiment {
        Experiment::Ratios(b) => ratios(ctx, b),
        Experiment::Solve(b) => solve(ctx, b),
        Experiment::Curvature(b) => curvature(ctx, b),
        Experiment::Failure(b) => failure(ctx, b),
        Experiment::Stoch(b) => stoch(ctx, b),
        Experiment::Graph(b) => graph(ctx, b),
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    experiment: &'static str,
    problem: &'a str,
    n: usize,
    f_star: Option<f64>,
    /// Full FW gap at the reference point, when one was computed.
    reference_certificate: Option<f64>,
    groups: Vec<GroupSummary>,
}

fn solve_generic<O, S>(
    ctx: &mut Context,
    inst: Instance<O, S>,
    block: &SolverBlock,
    problem: &str,
    certificate: Option<f64>,
) -> Result<String, CliError>
where
    O: Objective + ?Sized,
    S: SectionOracle + Sync + ?Sized,
{
    let groups = run_block(ctx, &inst, block)?;
    let f_star = inst.problem.f_star();
    let summaries = write_groups(ctx, &groups, f_star, &format!("{problem}: mean ± 1 std"))?;
    let line = summaries
        .iter()
        .map(|g| format!("{} mean f_K {}", g.label, fmt_opt(g.mean_final_f)))
        .collect::<Vec<_>>()
        .join(", ");
    ctx.out.write_json(
        "solve_summary.json",
        &SolveSummary {
            experiment: "solve",
            problem,
            n: inst.problem.dim(),
            f_star,
            reference_certificate: certificate,
            groups: summaries,
        },
    )?;
    match failures(&groups) {
        Some(e) => Err(e),
        None => Ok(format!("{problem}: {line}")),
    }
}

fn solve(ctx: &mut Context, b: &SolveBlock) -> Result<String, CliError> {
    let seed = instance_seed(ctx.seed);
    match &b.problem {
        ProblemBlock::QuadraticEllipsoid { n, cond } => {
            let q = gen_quadratic_ellipsoid(*n, *cond, seed)?;
            let geometry = Some(ellipsoid_geometry(&q.set));
            let inst = Instance { problem: &q.problem, set: &q.set, geometry, x0: None };
            solve_generic(ctx, inst, &b.solver, "quadratic_ellipsoid", Some(q.certificate))
        }
        ProblemBlock::BallDistance { n, target } => {
            let mut a = Vector::zeros(*n);
            a[0] = *target;
            // Projection of t e₁ onto the unit ball is e₁ when |t| > 1.
            let f_star = 0.5 * (target.abs() - 1.0).max(0.0).powi(2);
            let problem = Quadratic::distance_to(&a).with_f_star(f_star);
            let set = Ball::unit(*n);
            let inst = Instance { problem: &problem, set: &set, geometry: Some(ball_geometry(1.0)?), x0: None };
            solve_generic(ctx, inst, &b.solver, "ball_distance", None)
        }
        ProblemBlock::LogisticRf { n, m, rho_k, lambda, features, labels, reference_iterations } => {
            let spec = LogisticSpec::new(*n, *m, *rho_k, *lambda);
            let mut li = match (features, labels) {
                (Some(fx), Some(fy)) => logistic_from_raw(&read_feature_csv(fx)?, read_label_csv(fy)?, &spec, seed)?,
                _ => gen_logistic_rf_with(&spec, seed)?,
            };
            let mut certificate = None;
            if *reference_iterations > 0 {
                let r = reference_by_full_fw(&li.problem, &li.set, *reference_iterations)?;
                li.problem = li.problem.with_f_star(r.f_ref);
                certificate = Some(r.certificate);
            }
            let geometry = Some(ellipsoid_geometry(&li.set));
            let inst = Instance { problem: &li.problem, set: &li.set, geometry, x0: None };
            solve_generic(ctx, inst, &b.solver, "logistic_rf", certificate)
        }
        ProblemBlock::Instance { path } => match load_instance(path)?.build()? {
            Loaded::QuadraticEllipsoid(q) => {
                let inst = Instance { problem: &q.problem, set: &q.set, geometry: Some(ellipsoid_geometry(&q.set)), x0: None };
                solve_generic(ctx, inst, &b.solver, "quadratic_ellipsoid", Some(q.certificate))
            }
            Loaded::LogisticRf(l) => {
                let inst = Instance { problem: &l.problem, set: &l.set, geometry: Some(ellipsoid_geometry(&l.set)), x0: None };
                solve_generic(ctx, inst, &b.solver, "logistic_rf", None)
            }
            Loaded::GraphSsl(g) => {
                let problem = match g.zero_loss_point() {
                    Some(_) => g.problem.clone().with_f_star(0.0),
                    None => g.problem.clone(),
                };
                let inst = Instance { problem: &problem, set: &g.set, geometry: None, x0: None };
                solve_generic(ctx, inst, &b.solver, "graph_ssl", None)
            }
            Loaded::Failure(f) => {
                let inst = Instance { problem: &f.problem, set: &f.set, geometry: None, x0: Some(&f.x0) };
                solve_generic(ctx, inst, &b.solver, "failure", None)
            }
        },
    }
}

#[derive(Serialize)]
struct FailureSummary {
    experiment: &'static str,
    n: usize,
    d: usize,
    iterations: usize,
    f_star: f64,
    rsfw_mean_final_gap: Option<f64>,
    full_fw_final_gap: Option<f64>,
    /// RSFW gap at least 10x the full-FW gap and at least 0.05.
    stagnates: bool,
    groups: Vec<GroupSummary>,
}

fn failure(ctx: &mut Context, b: &FailureBlock) -> Result<String, CliError> {
    let inst = gen_failure_instance(b.n, b.d, b.delta)?;
    let f_star = inst.problem.f_star().unwrap_or(0.5 * (FAILURE_TARGET - 1.0).powi(2));
    let solver = SolverBlock {
        methods: vec![Method::Rsfw, Method::FullFw],
        rule: crate::config::RuleSpec::ShortStep { l: Some(b.l), l_grid: None },
        iterations: b.iterations,
        d: vec![b.d],
        replicates: b.replicates.clone(),
        frames: Default::default(),
        snapshot_every: 10,
    };
    let runner_inst = Instance { problem: &inst.problem, set: &inst.set, geometry: None, x0: Some(&inst.x0) };
    let groups = run_block(ctx, &runner_inst, &solver)?;
    let summaries = write_groups(ctx, &groups, Some(f_star), "polytope failure mode: mean ± 1 std")?;
    let rsfw = mean_final_gap(&groups[0], f_star);
    let full = mean_final_gap(&groups[1], f_star);
    let stagnates = matches!((rsfw, full), (Some(r), Some(f)) if r >= 10.0 * f && r >= 0.05);
    ctx.out.write_json(
        "failure_summary.json",
        &FailureSummary {
            experiment: "failure",
            n: b.n,
            d: b.d,
            iterations: b.iterations,
            f_star,
            rsfw_mean_final_gap: rsfw,
            full_fw_final_gap: full,
            stagnates,
            groups: summaries,
        },
    )?;
    if let Some(e) = failures(&groups) {
        return Err(e);
    }
    Ok(format!(
        "RSFW mean final gap {}, full FW final gap {}, stagnates: {stagnates}",
        fmt_opt(rsfw),
        fmt_opt(full)
    ))
}

#[derive(Serialize)]
struct GraphSummary {
    experiment: &'static str,
    nodes: usize,
    labeled: usize,
    /// Zero when the labeled targets are feasible.
    f_star: Option<f64>,
    groups: Vec<GroupSummary>,
}

fn graph(ctx: &mut Context, b: &GraphBlock) -> Result<String, CliError> {
    let g = gen_graph_ssl(&b.graph, instance_seed(ctx.seed))?;
    let problem = match g.zero_loss_point() {
        Some(_) => g.problem.clone().with_f_star(0.0),
        None => g.problem.clone(),
    };
    let inst = Instance { problem: &problem, set: &g.set, geometry: None, x0: None };
    let groups = run_block(ctx, &inst, &b.solver)?;
    let f_star = problem.f_star();
    let summaries = write_groups(ctx, &groups, f_star, "graph SSL: mean ± 1 std")?;
    let line = summaries
        .iter()
        .map(|s| format!("{} mean f_K {}", s.label, fmt_opt(s.mean_final_f)))
        .collect::<Vec<_>>()
        .join(", ");
    ctx.out.write_json(
        "graph_summary.json",
        &GraphSummary {
            experiment: "graph",
            nodes: g.points.len(),
            labeled: g.problem.labeled().len(),
            f_star,
            groups: summaries,
        },
    )?;
    match failures(&groups) {
        Some(e) => Err(e),
        None => Ok(format!("graph: {line}")),
    }
}
