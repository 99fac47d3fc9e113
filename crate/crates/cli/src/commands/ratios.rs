use rsfw::ratios::{expected_gamma_bounds, mc_estimate_gamma, secondary_gamma_bound};
use rsfw::rng::derive_seed;
use serde::Serialize;

use crate::config::RatiosBlock;
use crate::error::CliError;
use crate::output::{csv_table, num};
use crate::Context;

/// Interval half-width in standard errors.
const Z: f64 = 3.0;

#[derive(Serialize)]
struct Row {
    n: usize,
    d: usize,
    rho: f64,
    samples: usize,
    mean: f64,
    stderr: f64,
    lower: f64,
    upper: f64,
    in_interval: bool,
}

#[derive(Serialize)]
struct RatiosSummary {
    experiment: &'static str,
    cells: usize,
    all_in_interval: bool,
    /// Smallest distance to the widened interval, in standard errors (infinite when stderr is 0).
    min_margin_stderr: f64,
    rows: Vec<Row>,
}

/// Theoretical bounds on `E Γ`: the sharp sandwich for `d >= 3`, the
/// determinant bound below that.
fn bounds(n: usize, d: usize) -> Result<(f64, f64), CliError> {
    if d >= 3 || d == n {
        return Ok(expected_gamma_bounds(n, d)?);
    }
    let lower = if d >= 2 { secondary_gamma_bound(n, d)? } else { 0.0 };
    Ok((lower, d as f64 / n as f64))
}

pub fn ratios(ctx: &mut Context, b: &RatiosBlock) -> Result<String, CliError> {
    let mut rows = Vec::new();
    let mut margin = f64::INFINITY;
    for g in &b.grid {
        let (lower, upper) = bounds(g.n, g.d)?;
        for (i, &rho) in b.rho.iter().enumerate() {
            let seed = derive_seed(ctx.seed, &[2, g.n as u64, g.d as u64, i as u64]);
            let est = mc_estimate_gamma(g.n, g.d, rho, b.samples, seed)?;
            let (lo, hi) = (lower - Z * est.stderr, upper + Z * est.stderr);
            let in_interval = est.mean >= lo && est.mean <= hi;
            if est.stderr > 0.0 {
                margin = margin.min((est.mean - lo).min(hi - est.mean) / est.stderr);
            } else if !in_interval {
                margin = f64::NEG_INFINITY;
            }
            rows.push(Row {
                n: g.n,
                d: g.d,
                rho,
                samples: b.samples,
                mean: est.mean,
                stderr: est.stderr,
                lower,
                upper,
                in_interval,
            });
        }
    }
    let csv = csv_table(
        "n,d,rho,samples,mean,stderr,lower,upper,in_interval",
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.d.to_string(),
                num(r.rho),
                r.samples.to_string(),
                num(r.mean),
                num(r.stderr),
                num(r.lower),
                num(r.upper),
                r.in_interval.to_string(),
            ]
        }),
    );
    ctx.out.write("ratios.csv", &csv)?;
    let all = rows.iter().all(|r| r.in_interval);
    let cells = rows.len();
    let outside = rows.iter().filter(|r| !r.in_interval).count();
    ctx.out.write_json(
        "ratios_summary.json",
        &RatiosSummary {
            experiment: "ratios",
            cells,
            all_in_interval: all,
            // JSON has no infinity.
            min_margin_stderr: if margin.is_finite() { margin } else { f64::MAX.copysign(margin) },
            rows,
        },
    )?;
    if all {
        Ok(format!("{cells} cells, all means inside the widened sandwich"))
    } else {
        Err(CliError::Runtime(format!("{outside} of {cells} cells fall outside the widened sandwich")))
    }
}
