use rsfw::curvature::{compressed_run, linear_spectrum, section_curvature, spectral_sandwich_check, DESCENT_TOL, K_CAL};
use rsfw::geometry::Ellipsoid;
use rsfw::linalg::random_unit;
use rsfw::problem::Quadratic;
use rsfw::rng::{derive_seed, rng_from_seed};
use rsfw::stats::{median, par_map_indexed};
use rsfw::{Matrix, StiefelFrame, Vector};
use serde::Serialize;

use crate::config::{CurvatureBlock, DescentBlock};
use crate::error::CliError;
use crate::output::{csv_table, num};
use crate::Context;

#[derive(Serialize)]
struct Comparison {
    n: usize,
    median_deviation: f64,
    err_bound: f64,
}

#[derive(Serialize)]
struct DescentSummary {
    iterations: usize,
    short_branch_steps: usize,
    /// Largest `f_after - (f_before - predicted)` over short-branch steps.
    max_short_branch_excess: f64,
    tolerance: f64,
    holds: bool,
    median_l_p: f64,
    lambda_max_q: f64,
}

#[derive(Serialize)]
struct CurvatureSummary {
    experiment: &'static str,
    n: usize,
    d: usize,
    eta: f64,
    trials: usize,
    k_cal: f64,
    coverage: f64,
    target_coverage: f64,
    lambda_bar: f64,
    err_bound: f64,
    median_deviation: f64,
    max_deviation: f64,
    eigen_range: (f64, f64),
    sandwich: (f64, f64),
    comparisons: Vec<Comparison>,
    descent: Option<DescentSummary>,
}

pub fn curvature(ctx: &mut Context, b: &CurvatureBlock) -> Result<String, CliError> {
    let [lo, hi] = b.spectrum;
    let h = linear_spectrum(b.n, lo, hi);
    let report = spectral_sandwich_check(&h, b.d, b.eta, b.trials, derive_seed(ctx.seed, &[2]), K_CAL)?;

    let mut grid = b.k_cal_grid.clone();
    grid.push(K_CAL);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    ctx.out.write(
        "coverage.csv",
        &csv_table("k_cal,coverage", grid.iter().map(|&k| vec![num(k), num(report.coverage_at(k))])),
    )?;
    ctx.out.write(
        "deviations.csv",
        &csv_table(
            "trial,deviation,ratio",
            report
                .deviations
                .iter()
                .enumerate()
                .map(|(t, v)| vec![t.to_string(), num(*v), num(v / report.err_bound)]),
        ),
    )?;

    let mut comparisons = Vec::new();
    for &n in &b.compare_n {
        let r = spectral_sandwich_check(&linear_spectrum(n, lo, hi), b.d, b.eta, b.trials, derive_seed(ctx.seed, &[3, n as u64]), K_CAL)?;
        comparisons.push(Comparison { n, median_deviation: r.median_deviation, err_bound: r.err_bound });
    }
    if !comparisons.is_empty() {
        ctx.out.write(
            "median_deviation.csv",
            &csv_table(
                "n,median_deviation,err_bound",
                comparisons.iter().map(|c| vec![c.n.to_string(), num(c.median_deviation), num(c.err_bound)]),
            ),
        )?;
    }

    let descent = match &b.descent {
        Some(ds) => Some(descent(ctx, ds)?),
        None => None,
    };
    let coverage = report.coverage;
    let mut msg = format!("coverage {coverage:.3} at K_cal = {K_CAL} (target {:.3})", 1.0 - b.eta);
    if let Some(ds) = &descent {
        msg.push_str(&format!(
            "; descent bound holds on {} short-branch steps: {}",
            ds.short_branch_steps, ds.holds
        ));
    }
    ctx.out.write_json(
        "curvature_summary.json",
        &CurvatureSummary {
            experiment: "curvature",
            n: b.n,
            d: b.d,
            eta: b.eta,
            trials: b.trials,
            k_cal: K_CAL,
            coverage,
            target_coverage: 1.0 - b.eta,
            lambda_bar: report.lambda_bar,
            err_bound: report.err_bound,
            median_deviation: report.median_deviation,
            max_deviation: report.max_deviation,
            eigen_range: report.eigen_range,
            sandwich: report.sandwich,
            comparisons,
            descent,
        },
    )?;
    Ok(msg)
}

fn descent(ctx: &mut Context, b: &DescentBlock) -> Result<DescentSummary, CliError> {
    let n = b.n;
    let mut qd = Vector::from_element(n, 1.0);
    qd[n - 1] = b.q_max;
    let q = Matrix::from_diagonal(&qd);
    let el = Ellipsoid::new(linear_spectrum(n, b.m_spectrum[0], b.m_spectrum[1]))?;
    let mut rng = rng_from_seed(derive_seed(ctx.seed, &[4]));
    let dir = random_unit(n, &mut rng);
    let x_u = &dir * (b.outside / el.quad(&dir).sqrt());
    let f = Quadratic::new(q.clone(), -(&q * &x_u), 0.5 * x_u.dot(&(&q * &x_u)))?;
    let run = compressed_run(&f, &el, b.iterations, b.d, derive_seed(ctx.seed, &[5]), false)?;
    ctx.out.write(
        "descent.csv",
        &csv_table(
            "k,alpha,short_branch,f_before,f_after,predicted_decrease,l_p,beta_sec,excess",
            run.records.iter().map(|r| {
                vec![
                    r.k.to_string(),
                    num(r.alpha),
                    r.short_branch.to_string(),
                    num(r.f_before),
                    num(r.f_after),
                    num(r.predicted_decrease),
                    num(r.l_p),
                    num(r.beta_sec),
                    num(r.excess),
                ]
            }),
        ),
    )?;
    let frame_seed = derive_seed(ctx.seed, &[6]);
    let l_ps: Vec<f64> = par_map_indexed(b.frames.max(1), |i| {
        StiefelFrame::sample(n, b.d, derive_seed(frame_seed, &[i as u64])).and_then(|p| section_curvature(&q, &p))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let excess = run.max_short_branch_excess();
    Ok(DescentSummary {
        iterations: b.iterations,
        short_branch_steps: run.short_branch_count(),
        max_short_branch_excess: if excess.is_finite() { excess } else { 0.0 },
        tolerance: DESCENT_TOL,
        holds: !(excess > DESCENT_TOL),
        median_l_p: median(&l_ps),
        lambda_max_q: qd.max(),
    })
}
