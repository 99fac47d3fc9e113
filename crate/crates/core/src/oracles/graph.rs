//! Oracles for the graph quartic body `{h <= τ}`.
//!
//! Both oracles solve the optimality system `g + ζ ∇h(s) = 0`, `h(s) = τ`
//! by bisection on `t = 1/ζ`: for fixed `t` the point
//! `argmin h(s) + t⟨g, s⟩` is found by damped Newton, and `h` at that point
//! increases with `t`. The returned point sits on the feasible end of the
//! final bracket.

use nalgebra::Cholesky;

use super::{SectionResult, check_section_inputs, nonzero_gradient};
use crate::error::{check_len, Result, RsfwError};
use crate::geometry::{ConvexBody, GraphQuartic};
use crate::linalg::{conjugate_gradient, symmetrize, Matrix, Vector};
use crate::stiefel::StiefelFrame;

const MAX_BRACKET_STEPS: usize = 200;
const BISECTION_STEPS: usize = 80;
const MAX_NEWTON: usize = 100;

struct InnerSolution {
    z: Vector,
    h: f64,
}

/// Brackets `t` by doubling (or halving) from `t0`, then bisects.
fn multiplier_search<F>(t0: f64, tau: f64, dim: usize, mut solve: F) -> Result<(f64, InnerSolution)>
where
    F: FnMut(f64, &Vector) -> Result<InnerSolution>,
{
    let zero = Vector::zeros(dim);
    let first = solve(t0, &zero)?;
    let (mut lo, mut hi);
    let mut lo_sol;
    if first.h <= tau {
        lo = t0;
        lo_sol = first;
        hi = f64::NAN;
        for _ in 0..MAX_BRACKET_STEPS {
            let t = lo * 2.0;
            let sol = solve(t, &lo_sol.z)?;
            if sol.h > tau {
                hi = t;
                break;
            }
            lo = t;
            lo_sol = sol;
        }
        if hi.is_nan() {
            return Err(RsfwError::OracleFailure("multiplier bracket did not close (unbounded section?)".into()));
        }
    } else {
        hi = t0;
        lo = f64::NAN;
        lo_sol = first;
        let mut warm = lo_sol.z.clone();
        for _ in 0..MAX_BRACKET_STEPS {
            let t = hi * 0.5;
            let sol = solve(t, &warm)?;
            if sol.h <= tau {
                lo = t;
                lo_sol = sol;
                break;
            }
            hi = t;
            warm = sol.z;
        }
        if lo.is_nan() {
            // The section is numerically a single point.
            return Ok((0.0, InnerSolution { z: zero, h: f64::NAN }));
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let sol = solve(mid, &lo_sol.z)?;
        if sol.h <= tau {
            lo = mid;
            lo_sol = sol;
        } else {
            hi = mid;
        }
    }
    Ok((lo, lo_sol))
}

/// Reduced model of `h(u + Pᵀz)` on one section.
struct ReducedQuartic<'a> {
    set: &'a GraphQuartic,
    u: &'a Vector,
    /// `Pᵀ`, `n × d`.
    pt: Matrix,
    /// `P T Pᵀ`.
    t_red: Matrix,
    /// `P T u`.
    c_lin: Vector,
    pg: Vector,
}

impl ReducedQuartic<'_> {
    fn point(&self, z: &Vector) -> Vector {
        self.u + &self.pt * z
    }

    /// `φ_t(z) - h_quad(u)`: the reduced objective up to a constant.
    fn phi(&self, t: f64, z: &Vector, w: &Vector) -> f64 {
        let quartic: f64 = w.iter().map(|x| x.powi(4)).sum();
        0.5 * z.dot(&(&self.t_red * z)) + self.c_lin.dot(z) + 0.25 * self.set.beta4 * quartic + t * self.pg.dot(z)
    }

    fn newton(&self, t: f64, z0: &Vector) -> Result<InnerSolution> {
        let d = z0.len();
        let b4 = self.set.beta4;
        let mut z = z0.clone();
        let mut w = self.point(&z);
        let mut phi = self.phi(t, &z, &w);
        for iter in 0..MAX_NEWTON {
            let cube = w.map(|x| x * x * x);
            let quartic_grad = self.pt.transpose() * cube * b4;
            let tz = &self.t_red * &z;
            let scale = tz.norm() + self.c_lin.norm() + quartic_grad.norm() + t * self.pg.norm();
            let grad = tz + &self.c_lin + quartic_grad + &self.pg * t;
            let gnorm = grad.norm();
            if gnorm <= 1e-13 * scale {
                return Ok(InnerSolution { h: self.set.h(&w), z });
            }
            let mut hess = self.t_red.clone();
            if b4 != 0.0 {
                let mut scaled = self.pt.clone();
                for i in 0..scaled.nrows() {
                    let f = 3.0 * b4 * w[i] * w[i];
                    for j in 0..d {
                        scaled[(i, j)] *= f;
                    }
                }
                hess += self.pt.transpose() * scaled;
            }
            let hess = symmetrize(&hess);
            let chol = Cholesky::new(hess).ok_or_else(|| {
                RsfwError::OracleFailure(format!("reduced Hessian not positive definite at Newton iteration {iter}"))
            })?;
            let step = -chol.solve(&grad);
            let decrement = -grad.dot(&step);
            if decrement <= 1e-10 * (1.0 + phi.abs()) {
                // Function values no longer resolve the decrease; the full
                // Newton step is safe this close to the minimizer.
                z += step;
                w = self.point(&z);
                phi = self.phi(t, &z, &w);
                continue;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let zc = &z + &step * alpha;
                let wc = self.point(&zc);
                let pc = self.phi(t, &zc, &wc);
                if pc <= phi - 1e-4 * alpha * decrement {
                    z = zc;
                    w = wc;
                    phi = pc;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // No representable decrease left: converged to rounding level.
                if gnorm <= 1e-8 * scale {
                    return Ok(InnerSolution { h: self.set.h(&w), z });
                }
                return Err(RsfwError::OracleFailure(format!(
                    "damped Newton stalled (t={t:e}, |grad|={gnorm:e}, scale={scale:e})"
                )));
            }
        }
        Err(RsfwError::OracleFailure(format!("damped Newton did not converge in {MAX_NEWTON} iterations (t={t:e})")))
    }
}

/// Section LMO over the graph body with the graph part compressed to
/// `P T Pᵀ` and `P T u`, and the quartic term evaluated through `u + Pᵀz`.
pub fn section_lmo_graph(set: &GraphQuartic, u: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<SectionResult> {
    check_section_inputs(set, u, frame, g)?;
    let pg = frame.project(g)?;
    let pg_norm = pg.norm();
    if pg_norm == 0.0 {
        return Ok(SectionResult::stationary(u, frame.d(), None, 0.0));
    }
    let pt = frame.rows().transpose();
    let mut tpt = pt.clone() * set.mu;
    if set.gamma_g != 0.0 {
        tpt += set.laplacian().mul_matrix(&pt) * set.gamma_g;
    }
    let t_red = symmetrize(&(frame.rows() * &tpt));
    let c_lin = tpt.transpose() * u;
    let model = ReducedQuartic { set, u, pt, t_red, c_lin, pg };
    let grad_u = frame.project(&set.grad_h(u))?;
    let t0 = (grad_u.norm() + set.mu) / pg_norm;
    let (t, sol) = multiplier_search(t0, set.tau, frame.d(), |t, z0| model.newton(t, z0))?;
    if t == 0.0 {
        return Ok(SectionResult::stationary(u, frame.d(), None, pg_norm));
    }
    SectionResult::from_z(u, frame, &model.pg, sol.z, None)
}

/// Full LMO over the graph body by multiplier bisection with Newton-CG inner solves.
pub fn full_lmo_graph(set: &GraphQuartic, g: &Vector) -> Result<Vector> {
    check_len(set.dim(), g.len())?;
    let g_norm = nonzero_gradient(g)?;
    let value = |t: f64, s: &Vector| set.h(s) + t * g.dot(s);
    let newton = |t: f64, s0: &Vector| -> Result<InnerSolution> {
        let mut s = s0.clone();
        let mut val = value(t, &s);
        let target = 1e-10 * t * g_norm;
        for _ in 0..MAX_NEWTON {
            let grad = set.grad_h(&s) + g * t;
            let gnorm = grad.norm();
            if gnorm <= target {
                return Ok(InnerSolution { h: set.h(&s), z: s });
            }
            let step = conjugate_gradient(|v| set.hess_apply(&s, v), &(-&grad), None, 1e-12, 10 * s.len() + 50);
            let slope = grad.dot(&step);
            if !(slope < 0.0) {
                return Err(RsfwError::OracleFailure(format!("Newton-CG produced a non-descent step (|grad|={gnorm:e})")));
            }
            if -slope <= 1e-10 * (1.0 + val.abs()) {
                s += step;
                val = value(t, &s);
                continue;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let sc = &s + &step * alpha;
                let vc = value(t, &sc);
                if vc <= val + 1e-4 * alpha * slope {
                    s = sc;
                    val = vc;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                if gnorm <= 1e-6 * t * g_norm {
                    return Ok(InnerSolution { h: set.h(&s), z: s });
                }
                return Err(RsfwError::OracleFailure(format!(
                    "Newton-CG line search failed (t={t:e}, |grad|={gnorm:e})"
                )));
            }
        }
        let grad = set.grad_h(&s) + g * t;
        if grad.norm() <= 1e-6 * t * g_norm {
            return Ok(InnerSolution { h: set.h(&s), z: s });
        }
        Err(RsfwError::OracleFailure(format!(
            "Newton-CG did not converge (t={t:e}, residual={:e})",
            grad.norm()
        )))
    };
    let t0 = set.mu / g_norm;
    let (t, sol) = multiplier_search(t0, set.tau, set.dim(), newton)?;
    if t == 0.0 {
        return Err(RsfwError::OracleFailure("graph LMO multiplier collapsed to zero".into()));
    }
    Ok(sol.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_knn_laplacian, Ball, Ellipsoid};
    use crate::linalg::random_unit;
    use crate::oracles::{section_lmo_ball, section_lmo_ellipsoid, SectionOracle};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn body(m: usize, beta4: f64, gamma: f64, seed: u64) -> GraphQuartic {
        let mut rng = rng_from_seed(seed);
        let pts: Vec<[f64; 2]> = (0..m).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let l = make_knn_laplacian(&pts, 3, true).unwrap();
        GraphQuartic::new(0.5, gamma, l, beta4, 2.0).unwrap()
    }

    fn interior(set: &GraphQuartic, seed: u64) -> Vector {
        let mut rng = rng_from_seed(seed);
        let w = random_unit(set.dim(), &mut rng);
        let t = set.radial_boundary(&w) * rng.random::<f64>();
        w * t
    }

    #[test]
    fn pure_ball_case() {
        let set = body(20, 0.0, 0.0, 1);
        let ball = Ball::new(Vector::zeros(20), (2.0 * set.tau / set.mu).sqrt()).unwrap();
        for seed in 0..10 {
            let frame = StiefelFrame::sample(20, 4, seed).unwrap();
            let u = interior(&set, seed + 100);
            let g = random_unit(20, &mut rng_from_seed(seed + 200));
            let a = set.section_lmo(&u, &frame, &g).unwrap();
            let b = section_lmo_ball(&ball, &u, &frame, &g).unwrap();
            assert!((&a.s - &b.s).norm() < 1e-8, "{}", (&a.s - &b.s).norm());
            let full = set.full_lmo(&g).unwrap();
            assert!((full + &g * ball.radius()).norm() < 1e-8);
        }
    }

    #[test]
    fn quadratic_case_matches_ellipsoid() {
        let set = body(25, 0.0, 0.8, 2);
        let t_dense = set.laplacian().to_dense() * set.gamma_g + Matrix::identity(25, 25) * set.mu;
        let e = Ellipsoid::from_hr(t_dense.clone(), (2.0 * set.tau).sqrt()).unwrap();
        for seed in 0..10 {
            let frame = StiefelFrame::sample(25, 3, seed).unwrap();
            let u = interior(&set, seed + 100);
            let g = random_unit(25, &mut rng_from_seed(seed + 200));
            let a = set.section_lmo(&u, &frame, &g).unwrap();
            let b = section_lmo_ellipsoid(&e, &u, &frame, &g).unwrap();
            assert!((&a.s - &b.s).norm() < 1e-8 * (1.0 + b.s.norm()));
            let full = set.full_lmo(&g).unwrap();
            let full_e = e.full_lmo(&g).unwrap();
            assert!((&full - &full_e).norm() < 1e-7 * full_e.norm());
        }
    }

    #[test]
    fn full_lmo_kkt_and_domination() {
        let set = body(50, 0.4, 0.5, 3);
        let mut rng = rng_from_seed(9);
        let g = random_unit(50, &mut rng);
        let s = set.full_lmo(&g).unwrap();
        assert!((set.h(&s) - set.tau).abs() <= 1e-8 * set.tau);
        let gh = set.grad_h(&s);
        let zeta = -g.dot(&gh) / gh.norm_squared();
        assert!((&g + &gh * zeta).norm() <= 1e-6 * g.norm());
        let best = g.dot(&s);
        for _ in 0..1000 {
            let probe = interior(&set, rng.random());
            assert!(best <= g.dot(&probe) + 1e-12);
        }
    }

    #[test]
    fn section_hits_boundary() {
        let set = body(30, 0.4, 0.5, 4);
        for seed in 0..10 {
            let frame = StiefelFrame::sample(30, 5, seed).unwrap();
            let u = interior(&set, seed + 7);
            let g = random_unit(30, &mut rng_from_seed(seed));
            let r = set.section_lmo(&u, &frame, &g).unwrap();
            let h = set.h(&r.s);
            assert!(h <= set.tau + 1e-10 && h >= set.tau - 1e-6, "h = {h}");
            assert!(r.gap > 0.0);
        }
    }

    #[test]
    fn zero_gradient() {
        let set = body(10, 0.1, 0.1, 5);
        assert!(matches!(set.full_lmo(&Vector::zeros(10)), Err(RsfwError::ZeroGradient)));
        let frame = StiefelFrame::sample(10, 2, 0).unwrap();
        let r = set.section_lmo(&Vector::zeros(10), &frame, &Vector::zeros(10)).unwrap();
        assert!(r.degenerate && r.gap == 0.0);
    }
}
