use rsfw::experiments::gen_finite_sum_quadratic;
use rsfw::geometry::ball_geometry;
use rsfw::solver::{batch_size, run_replicates, stochastic_rsfw_run, SolverConfig, StepRule, StochasticConfig};
use rsfw::Objective;
use serde::Serialize;

use crate::config::StochBlock;
use crate::error::CliError;
use crate::output::{num, Aggregate};
use crate::plot::{self, Series};
use crate::Context;

use super::instance_seed;
use super::runner::replicate_seed;

#[derive(Serialize)]
struct StochSummary {
    experiment: &'static str,
    components: usize,
    n: usize,
    d: usize,
    a_mb: f64,
    beta0: f64,
    f_star: f64,
    /// Logged batch sizes that differ from `min(⌈(k + 2/β₀)²/A_mb⌉, N)`.
    batch_rule_violations: usize,
    /// Iterations, summed over replicates, where the batch was capped at `N`.
    cap_hits: usize,
    first_capped_k: Option<usize>,
    /// Seed-mean `f - f*` at `k = K/10` and at `k = K`.
    mean_gap_early: f64,
    mean_gap_final: f64,
    failures: Vec<String>,
}

pub fn stoch(ctx: &mut Context, b: &StochBlock) -> Result<String, CliError> {
    let inst = gen_finite_sum_quadratic(b.components, b.n, instance_seed(ctx.seed))?;
    let beta0 = match b.beta0 {
        Some(v) => v,
        None => ball_geometry(1.0)?.with_beta0(b.n, b.d)?.beta0.expect("set by with_beta0"),
    };
    let f_star = inst.problem.f_star().expect("generator sets f*");
    let seeds: Vec<u64> = b.replicates.iter().map(|&r| replicate_seed(ctx.seed, r)).collect();
    let results = run_replicates(&seeds, |s| {
        let mut cfg = SolverConfig::new(b.iterations, b.d, s, StepRule::OpenLoop { beta0 });
        cfg.stochastic = Some(StochasticConfig { a_mb: b.a_mb, beta0 });
        cfg.timing = ctx.format.timing;
        stochastic_rsfw_run(&inst.problem, &inst.set, &cfg)
    });

    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for (rep, r) in b.replicates.iter().zip(results) {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => {
                failures.push(format!("replicate {rep}: {e}"));
                traces.push(*e.partial);
            }
        }
    }
    let mut violations = 0;
    let mut cap_hits = 0;
    let mut first_capped: Option<usize> = None;
    for (rep, t) in b.replicates.iter().zip(&traces) {
        ctx.out.write(&format!("trace_stoch_d{}_rep{rep}.csv", b.d), &t.to_csv())?;
        for r in &t.records {
            if r.batch != Some(batch_size(r.k, beta0, b.a_mb).min(b.components)) {
                violations += 1;
            }
        }
        cap_hits += t.summary.batch_cap_hits;
        first_capped = match (first_capped, t.summary.first_capped_k) {
            (Some(a), Some(c)) => Some(a.min(c)),
            (a, c) => a.or(c),
        };
    }
    let complete: Vec<_> = traces.iter().filter(|t| t.records.len() == b.iterations).cloned().collect();
    let agg = Aggregate::of(&complete, ctx.format.timing);
    ctx.out.write(&format!("aggregate_stoch_d{}.csv", b.d), &agg.to_csv())?;
    if ctx.format.svg && !agg.k.is_empty() {
        let k: Vec<f64> = agg.k.iter().map(|&k| k as f64).collect();
        let label = format!("stochastic rsfw d={}", b.d);
        let series = [Series { label: &label, x: &k, mean: &agg.mean_f, std: &agg.std_f }];
        ctx.out.write("plot_iterations.svg", &plot::render("finite-sum stochastic RSFW", "iteration k", &series, f_star))?;
    }
    let gap_at = |k: usize| agg.mean_f.get(k).map_or(f64::NAN, |m| m - f_star);
    let (early, last) = (gap_at(b.iterations / 10), gap_at(b.iterations));
    ctx.out.write_json(
        "stoch_summary.json",
        &StochSummary {
            experiment: "stoch",
            components: b.components,
            n: b.n,
            d: b.d,
            a_mb: b.a_mb,
            beta0,
            f_star,
            batch_rule_violations: violations,
            cap_hits,
            first_capped_k: first_capped,
            mean_gap_early: early,
            mean_gap_final: last,
            failures: failures.clone(),
        },
    )?;
    if !failures.is_empty() {
        return Err(CliError::Runtime(format!("{} run(s) failed: {}", failures.len(), failures.join("; "))));
    }
    if violations > 0 {
        return Err(CliError::Runtime(format!("{violations} logged batch sizes do not follow the schedule")));
    }
    Ok(format!(
        "beta0 {}, batches follow the schedule ({cap_hits} capped iterations), mean gap {} at k={} -> {} at k={}",
        num(beta0),
        num(early),
        b.iterations / 10,
        num(last),
        b.iterations
    ))
}
