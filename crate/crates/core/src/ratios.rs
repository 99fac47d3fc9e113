//! Section-efficiency ratios `Γ`, `γ` and Monte Carlo estimators of their
//! moments under Haar frames.
//!
//! For unit `u`, `v` with `ρ = <u,v> < 1`,
//!
//! ```text
//! Γ(P;u,v) = (|Pu| |Pv| - <Pu,Pv>) / (1 - ρ)
//! γ(P;u,v) = (|Pu| sqrt(1 - |v|² + |Pv|²) - <Pu,Pv>) / (1 - ρ)
//! ```
//!
//! `γ` is the exact fraction of Frank-Wolfe progress kept by a section of a
//! ball through an interior point; `Γ` is its boundary version.

use rand::Rng;

use crate::error::{Result, RsfwError};
use crate::linalg::{random_unit, Vector};
use crate::rng::{derive_seed, stream};
use crate::stats::{covariance, par_map_indexed, z_score, Summary};
use crate::stiefel::StiefelFrame;

const UNIT_TOL: f64 = 1e-10;
const DEGENERATE_RHO: f64 = 1.0 - 1e-12;

/// `δ₀ = 1 - cos(1/10)`, the angular margin in the high-probability bound.
pub fn delta0() -> f64 {
    1.0 - (0.1f64).cos()
}

/// Monte Carlo estimate of a ratio mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub n: usize,
    pub d: usize,
    pub rho: f64,
}

/// Empirical vs closed-form moment.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub name: String,
    pub empirical: f64,
    pub theoretical: f64,
    pub stderr: f64,
    pub z_score: f64,
}

impl MomentReport {
    fn new(name: &str, empirical: f64, theoretical: f64, stderr: f64) -> Self {
        Self {
            name: name.to_string(),
            empirical,
            theoretical,
            stderr,
            z_score: z_score(empirical, theoretical, stderr),
        }
    }
}

/// Universal constants of the concentration bounds. They are unspecified
/// numerically and only enter reported quantities, never pass/fail decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationConstants {
    pub c_gamma: f64,
    pub big_c_gamma: f64,
    pub c_jl: f64,
    pub big_c_jl: f64,
}

impl Default for ConcentrationConstants {
    fn default() -> Self {
        Self { c_gamma: 1.0, big_c_gamma: 1.0, c_jl: 1.0, big_c_jl: 1.0 }
    }
}

impl ConcentrationConstants {
    /// `p_hp = [1 - C_hp exp(-c_hp ε² d)]_+`.
    pub fn p_hp(&self, eps: f64, d: usize) -> f64 {
        let c = self.c_gamma.min(self.c_jl);
        let big_c = self.big_c_gamma + self.big_c_jl;
        (1.0 - big_c * (-c * eps * eps * d as f64).exp()).max(0.0)
    }
}

/// Whether `eps` satisfies the admissibility constraint `ε < min{1/8, δ₀/8}`.
pub fn eps_is_admissible(eps: f64) -> bool {
    eps > 0.0 && eps < (0.125f64).min(delta0() / 8.0)
}

fn check_unit(name: &str, v: &Vector) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(RsfwError::InvalidParameter(format!("{name} must be a unit vector (norm {norm})")));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if rho >= DEGENERATE_RHO {
        return Err(RsfwError::DegeneratePair(rho));
    }
    Ok(())
}

#[inline]
fn boundary_ratio(pu: &Vector, pv: &Vector, rho: f64) -> f64 {
    (pu.norm() * pv.norm() - pu.dot(pv)) / (1.0 - rho)
}

#[inline]
fn interior_ratio(pu: &Vector, pv: &Vector, v_norm2: f64, rho: f64) -> f64 {
    let radius = (1.0 - v_norm2 + pv.norm_squared()).max(0.0).sqrt();
    (pu.norm() * radius - pu.dot(pv)) / (1.0 - rho)
}

/// Boundary-ball ratio `Γ(P;u,v)`. Always nonnegative.
pub fn gamma_boundary(frame: &StiefelFrame, u: &Vector, v: &Vector) -> Result<f64> {
    check_unit("u", u)?;
    check_unit("v", v)?;
    let rho = u.dot(v);
    check_rho(rho)?;
    let pu = frame.project(u)?;
    let pv = frame.project(v)?;
    Ok(boundary_ratio(&pu, &pv, rho).max(0.0))
}

/// The `Γ` expression for a non-unit `v` with `|v| <= 1`; it is the
/// comparison value in `γ(P;u,v) >= Γ(P;u,v)`.
pub fn boundary_expression(frame: &StiefelFrame, u: &Vector, v: &Vector) -> Result<f64> {
    check_unit("u", u)?;
    let rho = u.dot(v);
    check_rho(rho)?;
    let pu = frame.project(u)?;
    let pv = frame.project(v)?;
    Ok(boundary_ratio(&pu, &pv, rho))
}

/// Interior-ball ratio `γ(P;u,v)` for `|v| <= 1`.
pub fn gamma_interior(frame: &StiefelFrame, u: &Vector, v: &Vector) -> Result<f64> {
    check_unit("u", u)?;
    let v_norm2 = v.norm_squared();
    if v_norm2.sqrt() > 1.0 + 1e-12 {
        return Err(RsfwError::InvalidParameter(format!("|v| = {} exceeds 1", v_norm2.sqrt())));
    }
    let rho = u.dot(v);
    check_rho(rho)?;
    let pu = frame.project(u)?;
    let pv = frame.project(v)?;
    Ok(interior_ratio(&pu, &pv, v_norm2.min(1.0), rho))
}

/// Sandwich `d/n - 4(n-d)/(n(n-1)) <= E Γ <= d/n`, valid for `d >= 3`.
/// The lower end may be negative.
pub fn expected_gamma_bounds(n: usize, d: usize) -> Result<(f64, f64)> {
    if d > n {
        return Err(RsfwError::InvalidDimension(format!("d={d} > n={n}")));
    }
    if d < 3 {
        return Err(RsfwError::UnsupportedDimension(format!("expectation sandwich needs d >= 3, got {d}")));
    }
    let (nf, df) = (n as f64, d as f64);
    if n == d {
        return Ok((1.0, 1.0));
    }
    Ok((df / nf - 4.0 * (nf - df) / (nf * (nf - 1.0)), df / nf))
}

/// Angle-uniform determinant-based lower bound `(d-1)/(96(n-1))` on `E Γ`.
pub fn secondary_gamma_bound(n: usize, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(RsfwError::InvalidDimension(format!("determinant bound needs d >= 2, got {d}")));
    }
    if n < d {
        return Err(RsfwError::InvalidDimension(format!("d={d} > n={n}")));
    }
    Ok((d as f64 - 1.0) / (96.0 * (n as f64 - 1.0)))
}

/// Unit pair with `<u,v> = rho`: `u` uniform on the sphere and
/// `v = rho u + sqrt(1 - rho²) w` with `w` uniform on the sphere of `u^⊥`.
pub fn unit_pair_with_rho<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Result<(Vector, Vector)> {
    if n < 2 {
        return Err(RsfwError::InvalidDimension("a pair with prescribed angle needs n >= 2".into()));
    }
    if !(rho.abs() < 1.0) {
        return Err(RsfwError::InvalidParameter(format!("|rho| must be < 1, got {rho}")));
    }
    let u = random_unit(n, rng);
    let w = loop {
        let z = random_unit(n, rng);
        let perp = &z - &u * u.dot(&z);
        let norm = perp.norm();
        if norm > 1e-8 {
            break perp / norm;
        }
    };
    let v = &u * rho + w * (1.0 - rho * rho).sqrt();
    Ok((u, v))
}

fn check_mc(n: usize, d: usize, rho: f64, samples: usize) -> Result<()> {
    if d == 0 || d > n {
        return Err(RsfwError::InvalidDimension(format!("need 1 <= d <= n, got d={d}, n={n}")));
    }
    if !(rho.abs() < 1.0) {
        return Err(RsfwError::InvalidParameter(format!("|rho| must be < 1, got {rho}")));
    }
    if samples < 100 {
        return Err(RsfwError::InvalidParameter(format!("need at least 100 samples, got {samples}")));
    }
    Ok(())
}

const PAIR_STREAM: u64 = 0;
const FRAME_STREAM: u64 = 1;

/// Draw `samples` frames and apply `f(Pu, Pv)` to each. The pair is fixed
/// for the whole run.
fn sample_pair_statistic<T, F>(n: usize, d: usize, rho: f64, samples: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Vector, &Vector) -> T + Sync + Send,
{
    let (u, v) = unit_pair_with_rho(n, rho, &mut stream(seed, &[PAIR_STREAM]))?;
    let frames_seed = derive_seed(seed, &[FRAME_STREAM]);
    let values = par_map_indexed(samples, |i| {
        let frame = StiefelFrame::sample(n, d, derive_seed(frames_seed, &[i as u64]))
            .expect("dimensions validated");
        let pu = frame.rows() * &u;
        let pv = frame.rows() * &v;
        f(&pu, &pv)
    });
    Ok(values)
}

/// Mean of `Γ(P;u,v)` over independent Haar frames for a fixed pair with
/// `<u,v> = rho`. When `d = n`, `Γ ≡ 1` and no sampling is done.
pub fn mc_estimate_gamma(n: usize, d: usize, rho: f64, samples: usize, seed: u64) -> Result<RatioEstimate> {
    check_mc(n, d, rho, samples)?;
    if d == n {
        return Ok(RatioEstimate { mean: 1.0, stderr: 0.0, samples, n, d, rho });
    }
    let values = sample_pair_statistic(n, d, rho, samples, seed, |pu, pv| {
        boundary_ratio(pu, pv, rho).max(0.0)
    })?;
    let s = Summary::of(&values);
    Ok(RatioEstimate { mean: s.mean, stderr: s.stderr, samples, n, d, rho })
}

/// Fraction of frames with `Γ >= d/(2n)`.
pub fn mc_gamma_tail_frequency(n: usize, d: usize, rho: f64, samples: usize, seed: u64) -> Result<f64> {
    check_mc(n, d, rho, samples)?;
    if d == n {
        return Ok(1.0);
    }
    let threshold = d as f64 / (2.0 * n as f64);
    let hits = sample_pair_statistic(n, d, rho, samples, seed, |pu, pv| {
        if boundary_ratio(pu, pv, rho) >= threshold {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(hits.iter().sum::<f64>() / samples as f64)
}

/// Estimate of `E[R^a Γ]` with `R = |Pu|²`, plus the factor means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedMomentEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub mean_r_pow_a: f64,
    pub mean_gamma: f64,
    /// `p_hp (1-ε)^a (d/n)^a d/(2n)`, when `(ε, p_hp)` were supplied.
    pub direct_lower: Option<f64>,
    /// `ϑ_a E[R^a] E[Γ]` with `ϑ_a = (1-ε)^a p_hp / 2`, when supplied.
    pub product_lower: Option<f64>,
}

/// Caller-supplied constants for the mixed-moment lower bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedMomentBound {
    pub eps: f64,
    pub p_hp: f64,
}

pub fn mc_mixed_moment(
    n: usize,
    d: usize,
    rho: f64,
    a: f64,
    samples: usize,
    seed: u64,
    bound: Option<MixedMomentBound>,
) -> Result<MixedMomentEstimate> {
    check_mc(n, d, rho, samples)?;
    if !(a > 0.0 && a <= 1.0) {
        return Err(RsfwError::InvalidParameter(format!("exponent a must lie in (0,1], got {a}")));
    }
    let (estimate, stderr, mean_r_pow_a, mean_gamma) = if d == n {
        (1.0, 0.0, 1.0, 1.0)
    } else {
        let pairs = sample_pair_statistic(n, d, rho, samples, seed, |pu, pv| {
            (pu.norm_squared().powf(a), boundary_ratio(pu, pv, rho).max(0.0))
        })?;
        let ra: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let gam: Vec<f64> = pairs.iter().map(|p| p.0 * p.1).collect();
        let g_only: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mixed = Summary::of(&gam);
        (mixed.mean, mixed.stderr, Summary::of(&ra).mean, Summary::of(&g_only).mean)
    };
    let (direct_lower, product_lower) = match bound {
        Some(b) => {
            let ratio = d as f64 / n as f64;
            let shrink = (1.0 - b.eps).powf(a);
            (
                Some(b.p_hp * shrink * ratio.powf(a) * ratio / 2.0),
                Some(0.5 * shrink * b.p_hp * mean_r_pow_a * mean_gamma),
            )
        }
        None => (None, None),
    };
    Ok(MixedMomentEstimate { estimate, stderr, mean_r_pow_a, mean_gamma, direct_lower, product_lower })
}

/// Closed-form `E[D²]/E[D]²` for the projected Gram determinant.
pub fn gram_det_ratio(n: usize, d: usize) -> f64 {
    let (nf, df) = (n as f64, d as f64);
    (df + 2.0) * (df + 1.0) / (df * (df - 1.0)) * nf * (nf - 1.0) / ((nf + 2.0) * (nf + 1.0))
}

/// Empirical checks of the projected-Gram identities for `E = (e₁ e₂)`:
/// `E|Pe₁|² = d/n`, `E<Pe₁,Pe₂> = 0`, `E det M = d(d-1)/(n(n-1))`, and the
/// second-moment ratio of `D = det M`.
pub fn bartlett_moment_checks(n: usize, d: usize, samples: usize, seed: u64) -> Result<Vec<MomentReport>> {
    if d < 2 || d > n {
        return Err(RsfwError::InvalidDimension(format!("need 2 <= d <= n, got d={d}, n={n}")));
    }
    if samples < 1000 {
        return Err(RsfwError::InvalidParameter(format!("need at least 1000 samples, got {samples}")));
    }
    if d == n {
        return Ok(vec![
            MomentReport::new("norm2_e1", 1.0, 1.0, 0.0),
            MomentReport::new("cross_e1_e2", 0.0, 0.0, 0.0),
            MomentReport::new("det", 1.0, 1.0, 0.0),
            MomentReport::new("det_ratio", 1.0, 1.0, 0.0),
        ]);
    }
    let frames_seed = derive_seed(seed, &[FRAME_STREAM]);
    let rows = par_map_indexed(samples, |i| {
        let frame = StiefelFrame::sample(n, d, derive_seed(frames_seed, &[i as u64]))
            .expect("dimensions validated");
        let p1 = frame.rows().column(0);
        let p2 = frame.rows().column(1);
        let r = p1.norm_squared();
        let cross = p1.dot(&p2);
        let det = r * p2.norm_squared() - cross * cross;
        [r, cross, det]
    });
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let (r, cross, det) = (col(0), col(1), col(2));
    let det2: Vec<f64> = det.iter().map(|x| x * x).collect();
    let (nf, df) = (n as f64, d as f64);
    let sr = Summary::of(&r);
    let sc = Summary::of(&cross);
    let sd = Summary::of(&det);
    let sd2 = Summary::of(&det2);

    // Delta method for m2 / m1².
    let (m1, m2) = (sd.mean, sd2.mean);
    let ratio = m2 / (m1 * m1);
    let (g1, g2) = (-2.0 * m2 / m1.powi(3), 1.0 / (m1 * m1));
    let cnt = samples as f64;
    let var = g1 * g1 * sd.std.powi(2) + g2 * g2 * sd2.std.powi(2) + 2.0 * g1 * g2 * covariance(&det, &det2);
    let ratio_stderr = (var.max(0.0) / cnt).sqrt();

    Ok(vec![
        MomentReport::new("norm2_e1", sr.mean, df / nf, sr.stderr),
        MomentReport::new("cross_e1_e2", sc.mean, 0.0, sc.stderr),
        MomentReport::new("det", sd.mean, df * (df - 1.0) / (nf * (nf - 1.0)), sd.stderr),
        MomentReport::new("det_ratio", ratio, gram_det_ratio(n, d), ratio_stderr),
    ])
}

/// Frequencies of the event `||Pz|² - d/n| <= ε d/n` for each `ε` in `eps_grid`,
/// evaluated on the same frames so the output is nondecreasing in `ε`.
pub fn jl_event_frequencies(n: usize, d: usize, eps_grid: &[f64], trials: usize, seed: u64) -> Result<Vec<f64>> {
    if d == 0 || d > n {
        return Err(RsfwError::InvalidDimension(format!("need 1 <= d <= n, got d={d}, n={n}")));
    }
    if let Some(bad) = eps_grid.iter().find(|e| !(**e > 0.0 && **e < 0.5)) {
        return Err(RsfwError::InvalidParameter(format!("eps must lie in (0, 1/2), got {bad}")));
    }
    if trials == 0 {
        return Err(RsfwError::InvalidParameter("need at least one trial".into()));
    }
    if d == n {
        return Ok(vec![1.0; eps_grid.len()]);
    }
    let z = random_unit(n, &mut stream(seed, &[PAIR_STREAM]));
    let frames_seed = derive_seed(seed, &[FRAME_STREAM]);
    let ratio = d as f64 / n as f64;
    let devs = par_map_indexed(trials, |i| {
        let frame = StiefelFrame::sample(n, d, derive_seed(frames_seed, &[i as u64]))
            .expect("dimensions validated");
        ((frame.rows() * &z).norm_squared() - ratio).abs()
    });
    Ok(eps_grid
        .iter()
        .map(|eps| devs.iter().filter(|&&dev| dev <= eps * ratio).count() as f64 / trials as f64)
        .collect())
}

pub fn jl_event_frequency(n: usize, d: usize, eps: f64, trials: usize, seed: u64) -> Result<f64> {
    Ok(jl_event_frequencies(n, d, &[eps], trials, seed)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::stiefel::sample_stiefel;
    use proptest::prelude::*;

    fn e(n: usize, i: usize) -> Vector {
        Vector::from_fn(n, |j, _| if j == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn full_dimension_ratio_is_one() {
        let f = sample_stiefel(6, 6, 3).unwrap();
        let (u, v) = unit_pair_with_rho(6, 0.3, &mut rng_from_seed(1)).unwrap();
        assert!((gamma_boundary(&f, &u, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_to_row_span_gives_zero() {
        let f = sample_stiefel(10, 3, 8).unwrap();
        let u = f.lift(&Vector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        let mut rng = rng_from_seed(2);
        let z = random_unit(10, &mut rng);
        let mut v = &z - f.lift(&f.project(&z).unwrap()).unwrap();
        v /= v.norm();
        assert!(gamma_boundary(&f, &u, &v).unwrap().abs() < 1e-12);
    }

    #[test]
    fn coordinate_frame_orthogonal_pair() {
        let f = StiefelFrame::coordinate(5, 2).unwrap();
        assert!((gamma_boundary(&f, &e(5, 0), &e(5, 1)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_pair_rejected() {
        let f = sample_stiefel(5, 2, 1).unwrap();
        let u = e(5, 0);
        assert!(matches!(gamma_boundary(&f, &u, &u), Err(RsfwError::DegeneratePair(_))));
        assert!(matches!(gamma_interior(&f, &u, &u), Err(RsfwError::DegeneratePair(_))));
        assert!(gamma_boundary(&f, &(&u * 2.0), &e(5, 1)).is_err());
    }

    #[test]
    fn interior_ratio_special_cases() {
        let f = sample_stiefel(12, 4, 5).unwrap();
        let mut rng = rng_from_seed(9);
        let (u, v) = unit_pair_with_rho(12, -0.2, &mut rng).unwrap();
        let pu_norm = f.project(&u).unwrap().norm();
        assert!((gamma_interior(&f, &u, &Vector::zeros(12)).unwrap() - pu_norm).abs() < 1e-14);
        let g_int = gamma_interior(&f, &u, &v).unwrap();
        let g_bd = gamma_boundary(&f, &u, &v).unwrap();
        assert!((g_int - g_bd).abs() < 1e-12);
        let half = &v * 0.5;
        let lhs = gamma_interior(&f, &u, &half).unwrap();
        assert!(lhs >= pu_norm.min(g_bd) - 1e-12);
    }

    #[test]
    fn expectation_sandwich_values() {
        assert_eq!(expected_gamma_bounds(7, 7).unwrap(), (1.0, 1.0));
        let (lo, hi) = expected_gamma_bounds(50, 10).unwrap();
        assert!((lo - (0.2 - 160.0 / 2450.0)).abs() < 1e-15);
        assert!((lo - 0.1346939).abs() < 1e-7);
        assert_eq!(hi, 0.2);
        let (lo, _) = expected_gamma_bounds(100, 20).unwrap();
        assert!((lo - 0.1676768).abs() < 1e-7);
        assert!(matches!(expected_gamma_bounds(10, 2), Err(RsfwError::UnsupportedDimension(_))));
    }

    #[test]
    fn determinant_bound_values() {
        assert!((secondary_gamma_bound(2, 2).unwrap() - 1.0 / 96.0).abs() < 1e-18);
        assert!((secondary_gamma_bound(97, 2).unwrap() - 1.0 / 9216.0).abs() < 1e-18);
        assert!((secondary_gamma_bound(9, 9).unwrap() - 1.0 / 96.0).abs() < 1e-18);
        assert!(secondary_gamma_bound(10, 1).is_err());
    }

    #[test]
    fn pair_has_requested_inner_product() {
        let mut rng = rng_from_seed(4);
        for rho in [-0.9, 0.0, 0.5, 0.99] {
            let (u, v) = unit_pair_with_rho(30, rho, &mut rng).unwrap();
            assert!((u.norm() - 1.0).abs() < 1e-14 && (v.norm() - 1.0).abs() < 1e-14);
            assert!((u.dot(&v) - rho).abs() < 1e-14);
        }
    }

    #[test]
    fn mc_full_dimension_exact() {
        let est = mc_estimate_gamma(8, 8, 0.4, 100, 1).unwrap();
        assert_eq!((est.mean, est.stderr), (1.0, 0.0));
        assert_eq!(mc_gamma_tail_frequency(8, 8, 0.4, 100, 1).unwrap(), 1.0);
    }

    #[test]
    fn mc_mean_inside_sandwich() {
        let (lo, hi) = expected_gamma_bounds(50, 10).unwrap();
        for (rho, seed) in [(0.5, 10), (-0.9, 11)] {
            let est = mc_estimate_gamma(50, 10, rho, 100_000, seed).unwrap();
            assert!(est.mean >= lo - 3.0 * est.stderr && est.mean <= hi + 3.0 * est.stderr, "{est:?}");
            // The determinant bound never exceeds the mean.
            assert!(secondary_gamma_bound(50, 10).unwrap() <= est.mean + 3.0 * est.stderr);
        }
    }

    #[test]
    fn mc_rejects_bad_input() {
        assert!(mc_estimate_gamma(10, 3, 1.0, 1000, 1).is_err());
        assert!(mc_estimate_gamma(10, 3, 0.0, 10, 1).is_err());
        assert!(mc_estimate_gamma(10, 11, 0.0, 1000, 1).is_err());
    }

    #[test]
    fn tail_frequency_reference() {
        // Reference value 0.9953 from an independent QR-projector Monte Carlo run.
        let freq = mc_gamma_tail_frequency(50, 25, 0.0, 10_000, 21).unwrap();
        assert!(freq >= 0.95, "{freq}");
        let diag = mc_gamma_tail_frequency(1000, 10, 0.99, 500, 22).unwrap();
        assert!((0.0..=1.0).contains(&diag));
    }

    #[test]
    fn mixed_moment_cases() {
        let full = mc_mixed_moment(6, 6, 0.1, 1.0, 100, 1, None).unwrap();
        assert_eq!(full.estimate, 1.0);

        let m = mc_mixed_moment(40, 8, 0.0, 1.0, 20_000, 3, None).unwrap();
        assert!(m.estimate <= m.mean_gamma);

        let bound = MixedMomentBound { eps: 0.1, p_hp: 1.0 };
        let m = mc_mixed_moment(50, 10, 0.5, 0.5, 100_000, 4, Some(bound)).unwrap();
        assert!(m.estimate >= m.product_lower.unwrap());
        assert!(m.direct_lower.unwrap() > 0.0);
        assert!(mc_mixed_moment(50, 10, 0.5, 0.0, 1000, 4, None).is_err());
    }

    #[test]
    fn concentration_constants_report_only() {
        let c = ConcentrationConstants::default();
        // With unit constants the bound is vacuous at small d.
        assert_eq!(c.p_hp(0.1, 10), 0.0);
        assert!(c.p_hp(0.5, 1000) > 0.99);
        assert!((delta0() - 4.9958e-3).abs() < 1e-7);
        assert!(!eps_is_admissible(0.1));
        assert!(eps_is_admissible(6e-4));
    }

    #[test]
    fn gram_moments_match() {
        let reports = bartlett_moment_checks(20, 4, 100_000, 31).unwrap();
        for r in &reports {
            assert!(r.z_score.abs() <= 4.0, "{r:?}");
        }
        let det = reports.iter().find(|r| r.name == "det").unwrap();
        assert!((det.theoretical - 12.0 / 380.0).abs() < 1e-15);
        let ratio = reports.iter().find(|r| r.name == "det_ratio").unwrap();
        assert!((ratio.theoretical - 2.5 * 380.0 / 462.0).abs() < 1e-12);
        assert!(ratio.empirical <= 6.0);

        let exact = bartlett_moment_checks(5, 5, 1000, 1).unwrap();
        assert!(exact.iter().all(|r| r.z_score == 0.0 && r.empirical <= 6.0));
    }

    #[test]
    fn jl_frequencies() {
        assert_eq!(jl_event_frequency(9, 9, 0.1, 10, 1).unwrap(), 1.0);
        let grid = jl_event_frequencies(60, 12, &[0.05, 0.1, 0.2, 0.4], 4000, 5).unwrap();
        assert!(grid.windows(2).all(|w| w[0] <= w[1]), "{grid:?}");
        // Exact value from the Beta(25,25) law of |Pz|².
        let exact = 0.969_287_966_274_404_5;
        let freq = jl_event_frequency(100, 50, 0.3, 10_000, 6).unwrap();
        let se = (exact * (1.0 - exact) / 10_000.0f64).sqrt();
        assert!((freq - exact).abs() <= 4.0 * se, "{freq}");
        assert!(jl_event_frequency(10, 5, 0.5, 10, 1).is_err());
    }

    proptest! {
        #[test]
        fn ratios_pointwise(seed in any::<u64>(), rho in -0.95f64..0.95, t in 0.0f64..1.0) {
            let mut rng = rng_from_seed(seed);
            let f = StiefelFrame::sample_with(15, 4, &mut rng).unwrap();
            let (u, mu) = unit_pair_with_rho(15, rho, &mut rng).unwrap();
            let big = gamma_boundary(&f, &u, &mu).unwrap();
            prop_assert!(big >= 0.0);
            let v = &mu * t;
            let small = gamma_interior(&f, &u, &v).unwrap();
            prop_assert!(small >= boundary_expression(&f, &u, &v).unwrap() - 1e-10);
            prop_assert!(small >= f.project(&u).unwrap().norm().min(big) - 1e-10);
        }
    }
}
