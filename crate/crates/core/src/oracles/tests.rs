use rand::Rng;

use super::*;
use crate::geometry::ellipsoid_geometry;
use crate::linalg::{gaussian_matrix, random_unit};
use crate::rng::rng_from_seed;

fn e(n: usize, i: usize) -> Vector {
    Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

/// Minimum of `⟨Pg, z⟩` over the boundary of a 2-D section, by radial roots of
/// a quadratic constraint `(x + t q)ᵀ M (x + t q) + 2 lᵀ(x + t q) + c0 <= 0`.
fn grid_min_quadratic<F>(frame: &StiefelFrame, g: &Vector, angles: usize, root: F) -> f64
where
    F: Fn(&Vector) -> f64,
{
    let pg = frame.project(g).unwrap();
    let mut best = f64::INFINITY;
    for k in 0..angles {
        let th = 2.0 * std::f64::consts::PI * k as f64 / angles as f64;
        let w = v(&[th.cos(), th.sin()]);
        let q = frame.lift(&w).unwrap();
        let t = root(&q);
        best = best.min(t * pg.dot(&w));
    }
    best
}

fn positive_root(a: f64, b: f64, c: f64) -> f64 {
    // a t² + b t + c = 0 with c <= 0 < a.
    (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a)
}

#[test]
fn full_ball_examples() {
    assert_eq!(full_lmo_ball(&Vector::zeros(3), 1.0, &e(3, 0)).unwrap(), -e(3, 0));
    let s = full_lmo_ball(&e(3, 1), 2.0, &e(3, 0)).unwrap();
    assert_eq!(s, e(3, 1) - e(3, 0) * 2.0);
    let mut rng = rng_from_seed(1);
    let c = random_unit(5, &mut rng);
    let s = full_lmo_ball(&c, 0.7, &random_unit(5, &mut rng)).unwrap();
    assert!(((s - &c).norm() - 0.7).abs() < 1e-12);
    assert!(matches!(full_lmo_ball(&c, 1.0, &Vector::zeros(5)), Err(RsfwError::ZeroGradient)));
}

#[test]
fn full_ellipsoid_examples() {
    let h = Matrix::identity(3, 3);
    assert!((full_lmo_ellipsoid(&h, 1.0, &e(3, 0)).unwrap() + e(3, 0)).norm() < 1e-15);
    let h = Matrix::from_diagonal(&v(&[1.0, 4.0]));
    let s = full_lmo_ellipsoid(&h, 1.0, &v(&[0.0, 1.0])).unwrap();
    assert!((s.clone() - v(&[0.0, -0.5])).norm() < 1e-15);
    assert!((s.dot(&(&h * &s)) - 1.0).abs() < 1e-12);
    let g = v(&[0.3, -0.2]);
    let a = full_lmo_ellipsoid(&h, 1.0, &g).unwrap();
    let b = full_lmo_ellipsoid(&h, 1.0, &(&g * 10.0)).unwrap();
    assert!((a - b).norm() < 1e-15);
    let singular = Matrix::from_diagonal(&v(&[1.0, 0.0]));
    assert!(full_lmo_ellipsoid(&singular, 1.0, &g).is_err());
    let el = Ellipsoid::from_hr(h.clone(), 2.0).unwrap();
    let s = el.full_lmo(&g).unwrap();
    assert!((s - full_lmo_ellipsoid(&h, 2.0, &g).unwrap()).norm() < 1e-14);
}

#[test]
fn ball_section_closed_forms() {
    let mut rng = rng_from_seed(2);
    let n = 12;
    let c = random_unit(n, &mut rng) * 0.3;
    let ball = Ball::new(c.clone(), 1.5).unwrap();
    let g = random_unit(n, &mut rng);
    let frame = StiefelFrame::sample(n, 4, 3).unwrap();
    let pg = frame.project(&g).unwrap();
    let at_center = section_lmo_ball(&ball, &c, &frame, &g).unwrap();
    assert!((at_center.gap - 1.5 * pg.norm()).abs() < 1e-12);
    let full = StiefelFrame::coordinate(n, n).unwrap();
    let x = &c + random_unit(n, &mut rng) * 0.9;
    let vv = (&c - &x) / 1.5;
    let r = section_lmo_ball(&ball, &x, &full, &g).unwrap();
    assert!((r.gap - 1.5 * (g.norm() - g.dot(&vv))).abs() < 1e-12);
    let frame = StiefelFrame::sample(n, 3, 4).unwrap();
    let r = section_lmo_ball(&ball, &x, &frame, &g).unwrap();
    let pv = frame.project(&vv).unwrap();
    let pg = frame.project(&g).unwrap();
    let want = 1.5 * (pg.norm() * (1.0 - vv.norm_squared() + pv.norm_squared()).sqrt() - pg.dot(&pv));
    assert!((r.gap - want).abs() <= 1e-10 * want);
    assert!(ball.constraint_excess(&r.s).unwrap().abs() < 1e-12);
}

#[test]
fn ball_section_matches_grid() {
    let mut rng = rng_from_seed(5);
    for trial in 0..5 {
        let n = 8;
        let c = random_unit(n, &mut rng) * 0.2;
        let ball = Ball::new(c.clone(), 1.0).unwrap();
        let x = &c + random_unit(n, &mut rng) * rng.random::<f64>();
        let g = random_unit(n, &mut rng);
        let frame = StiefelFrame::sample(n, 2, trial).unwrap();
        let r = section_lmo_ball(&ball, &x, &frame, &g).unwrap();
        let xc = &x - &c;
        let best = grid_min_quadratic(&frame, &g, 100_000, |q| positive_root(q.norm_squared(), 2.0 * xc.dot(q), xc.norm_squared() - 1.0));
        assert!((-r.gap - best).abs() <= 1e-6 * r.gap.abs(), "{} vs {}", -r.gap, best);
    }
}

#[test]
fn ellipsoid_section_reduces_to_ball() {
    let el = Ellipsoid::diagonal(&[1.0; 6]).unwrap();
    let mut rng = rng_from_seed(6);
    let g = random_unit(6, &mut rng);
    let frame = StiefelFrame::sample(6, 3, 1).unwrap();
    let r = el.section_lmo(&Vector::zeros(6), &frame, &g).unwrap();
    let pg = frame.project(&g).unwrap();
    assert!((r.s + frame.lift(&(&pg / pg.norm())).unwrap()).norm() < 1e-12);
    assert!((r.gap - pg.norm()).abs() < 1e-12);
}

fn random_spd(n: usize, lo: f64, hi: f64, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    let q = gaussian_matrix(n, n, &mut rng).qr().q();
    let vals = Vector::from_fn(n, |i, _| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64);
    let m = &q * Matrix::from_diagonal(&vals) * q.transpose();
    (&m + m.transpose()) * 0.5
}

#[test]
fn ellipsoid_section_postconditions() {
    for seed in 0..10 {
        let n = 10;
        let el = Ellipsoid::new(random_spd(n, 1.0, 20.0, seed)).unwrap();
        let mut rng = rng_from_seed(seed + 50);
        let dir = random_unit(n, &mut rng);
        let x = &dir / el.quad(&dir).sqrt() * rng.random::<f64>().sqrt();
        let g = random_unit(n, &mut rng);
        let frame = StiefelFrame::sample(n, 3, seed).unwrap();
        let r = el.section_lmo(&x, &frame, &g).unwrap();
        let parts = ellipsoid_section_parts(&el, &x, &frame).unwrap();
        let off = &r.z + &parts.center;
        let level = off.dot(&(&parts.a * &off));
        assert!((level - parts.delta).abs() <= 1e-8 * parts.delta);
        // A^{1/2}(z + A⁻¹b) antiparallel to A^{-1/2} Pg, i.e. A(z + A⁻¹b) antiparallel to Pg.
        let pg = frame.project(&g).unwrap();
        let a_off = &parts.a * &off;
        let cos = a_off.dot(&pg) / (a_off.norm() * pg.norm());
        assert!(cos < -1.0 + 1e-12);
        assert_eq!(r.delta, Some(parts.delta));
        let gc = ellipsoid_geometry(&el);
        let d = r.direction(&x);
        assert!(r.gap / d.norm_squared() >= gc.beta_c / 4.0 * pg.norm() - 1e-10);
    }
}

#[test]
fn ellipsoid_section_matches_grid() {
    let el = Ellipsoid::diagonal(&[1.0, 4.0, 9.0]).unwrap();
    let mut rng = rng_from_seed(8);
    for seed in 0..5 {
        let dir = random_unit(3, &mut rng);
        let x = &dir / el.quad(&dir).sqrt() * rng.random::<f64>();
        let g = random_unit(3, &mut rng);
        let frame = StiefelFrame::sample(3, 2, seed).unwrap();
        let r = el.section_lmo(&x, &frame, &g).unwrap();
        let mx = el.apply(&x);
        let best = grid_min_quadratic(&frame, &g, 100_000, |q| positive_root(el.quad(q), 2.0 * mx.dot(q), el.quad(&x) - 1.0));
        assert!((-r.gap - best).abs() <= 1e-6 * r.gap.abs());
    }
}

#[test]
fn ellipsoid_tangent_section_is_degenerate() {
    // x on the boundary, frame spanning directions tangent at x gives δ > 0;
    // a 1-D frame along the normal of a boundary point at a pole is a chord.
    let el = Ellipsoid::diagonal(&[1.0, 4.0]).unwrap();
    let x = v(&[1.0, 0.0]);
    let normal_frame = StiefelFrame::from_rows(Matrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
    let g = v(&[-1.0, 0.0]);
    // Moving along +e1 leaves the set, -e1 is the chord; minimizer of ⟨g, s⟩ is x itself.
    let r = el.section_lmo(&x, &normal_frame, &g).unwrap();
    assert!(r.gap.abs() < 1e-12);
    assert!((r.s.clone() - &x).norm() < 1e-12);
    // A frame tangent to the boundary at x: the section is the single point x.
    let tangent = StiefelFrame::from_rows(Matrix::from_row_slice(1, 2, &[0.0, 1.0])).unwrap();
    let parts = ellipsoid_section_parts(&el, &x, &tangent).unwrap();
    assert!(parts.delta.abs() <= DELTA_TOL);
    let r = el.section_lmo(&x, &tangent, &v(&[0.0, 1.0])).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.s, x);
    // Pg ∝ PMx on an oblique frame: δ > 0 and the step is nonzero.
    let el = Ellipsoid::diagonal(&[1.0, 4.0, 9.0]).unwrap();
    let x = v(&[0.6, 0.0, 0.0]) + v(&[0.0, 0.0, 0.8 / 3.0]);
    assert!((el.quad(&x) - 1.0).abs() < 1e-12);
    let frame = StiefelFrame::sample(3, 2, 4).unwrap();
    let g = el.apply(&x);
    let r = el.section_lmo(&x, &frame, &g).unwrap();
    assert!(r.delta.unwrap() > DELTA_TOL && (r.s.clone() - &x).norm() > 1e-6);
}

#[test]
fn infeasible_base_point_is_rejected() {
    let ball = Ball::unit(3);
    let frame = StiefelFrame::sample(3, 2, 0).unwrap();
    let x = v(&[2.0, 0.0, 0.0]);
    assert!(matches!(section_lmo_ball(&ball, &x, &frame, &e(3, 0)), Err(RsfwError::Infeasible(_))));
    let zero = section_lmo_ball(&ball, &Vector::zeros(3), &frame, &Vector::zeros(3)).unwrap();
    assert!(zero.degenerate && zero.gap == 0.0);
}

#[test]
fn scaling_invariance() {
    let el = Ellipsoid::new(random_spd(7, 1.0, 5.0, 2)).unwrap();
    let mut rng = rng_from_seed(3);
    let g = random_unit(7, &mut rng);
    let x = random_unit(7, &mut rng) * 0.1;
    let frame = StiefelFrame::sample(7, 3, 9).unwrap();
    let a = el.section_lmo(&x, &frame, &g).unwrap();
    let b = el.section_lmo(&x, &frame, &(&g * 3.5)).unwrap();
    assert!((&a.s - &b.s).norm() < 1e-13);
    assert!((b.gap - 3.5 * a.gap).abs() < 1e-12);
}

#[test]
fn polytope_full_space() {
    let p = SimplexPolytope::new(4).unwrap();
    let x = p.initial_point();
    let frame = StiefelFrame::coordinate(4, 4).unwrap();
    let r = p.section_lmo(&x, &frame, &(-e(4, 0))).unwrap();
    assert!((r.s.clone() - e(4, 0)).norm() < 1e-12);
    assert_eq!(p.full_lmo(&(-e(4, 0))).unwrap(), e(4, 0));
    assert_eq!(p.full_lmo(&e(4, 0)).unwrap(), Vector::zeros(4));
}

#[test]
fn polytope_segment_clip() {
    let n = 5;
    let p = SimplexPolytope::new(n).unwrap();
    let mut rng = rng_from_seed(10);
    for seed in 0..20 {
        let x = Vector::from_fn(n, |_, _| rng.random::<f64>()) / (n as f64);
        let frame = StiefelFrame::sample(n, 1, seed).unwrap();
        let u = frame.rows().row(0).transpose();
        let g = random_unit(n, &mut rng);
        // Interval of t with x + t u feasible.
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            if u[i] > 0.0 {
                lo = lo.max(-x[i] / u[i]);
            } else if u[i] < 0.0 {
                hi = hi.min(-x[i] / u[i]);
            }
        }
        let su = u.sum();
        let slack = 1.0 - x.sum();
        if su > 0.0 {
            hi = hi.min(slack / su);
        } else if su < 0.0 {
            lo = lo.max(slack / su);
        }
        let gu = g.dot(&u);
        let best = (lo * gu).min(hi * gu);
        let r = p.section_lmo(&x, &frame, &g).unwrap();
        assert!((-r.gap - best).abs() < 1e-12, "{} vs {}", -r.gap, best);
    }
}

#[test]
fn polytope_matches_vertex_enumeration() {
    let n = 6;
    let p = SimplexPolytope::new(n).unwrap();
    let mut rng = rng_from_seed(11);
    for seed in 0..20 {
        let x = Vector::from_fn(n, |_, _| rng.random::<f64>()) / (n as f64 * 1.2);
        let frame = StiefelFrame::sample(n, 2, seed).unwrap();
        let g = random_unit(n, &mut rng);
        let r = p.section_lmo(&x, &frame, &g).unwrap();
        let best = enumerate_section_vertices(&x, &frame, &g);
        assert!((-r.gap - best).abs() < 1e-9, "{} vs {}", -r.gap, best);
    }
}

/// Minimum over pairwise intersections of the section constraint lines.
fn enumerate_section_vertices(x: &Vector, frame: &StiefelFrame, g: &Vector) -> f64 {
    let n = x.len();
    let pt = frame.rows().transpose();
    let mut rows: Vec<([f64; 2], f64)> = (0..n).map(|i| ([-pt[(i, 0)], -pt[(i, 1)]], x[i])).collect();
    rows.push(([pt.column(0).sum(), pt.column(1).sum()], 1.0 - x.sum()));
    let pg = frame.project(g).unwrap();
    let mut best = f64::INFINITY;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (rows[i].0, rows[j].0);
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let z0 = (rows[i].1 * b[1] - a[1] * rows[j].1) / det;
            let z1 = (a[0] * rows[j].1 - rows[i].1 * b[0]) / det;
            if rows.iter().all(|(r, c)| r[0] * z0 + r[1] * z1 <= c + 1e-12) {
                best = best.min(pg[0] * z0 + pg[1] * z1);
            }
        }
    }
    best
}

#[test]
fn domination_checks() {
    let mut rng = rng_from_seed(12);
    let ball_set = FeasibleSet::Ball(Ball::unit(6));
    let x = random_unit(6, &mut rng) * 0.5;
    let g = random_unit(6, &mut rng);
    let frame = StiefelFrame::sample(6, 2, 1).unwrap();
    assert!(section_dominates_ball_check(&ball_set, &x, &frame, &g, &Ball::unit(6)).unwrap());
    let el = Ellipsoid::new(random_spd(6, 1.0, 6.0, 13)).unwrap();
    let geo = ellipsoid_geometry(&el);
    let set = FeasibleSet::Ellipsoid(el.clone());
    for seed in 0..200 {
        let dir = random_unit(6, &mut rng);
        let xb = &dir / el.quad(&dir).sqrt();
        let mu = el.inward_normal(&xb).unwrap();
        let ball = Ball::new(&xb + &mu * geo.r_min, geo.r_min).unwrap();
        let frame = StiefelFrame::sample(6, 2, seed).unwrap();
        let g = random_unit(6, &mut rng);
        assert!(section_dominates_ball_check(&set, &xb, &frame, &g, &ball).unwrap());
        let xi = &xb * 0.5;
        let ball = Ball::new(xi.clone(), el.boundary_distance(&xi).unwrap()).unwrap();
        assert!(section_dominates_ball_check(&set, &xi, &frame, &g, &ball).unwrap());
    }
    let too_big = Ball::new(Vector::zeros(6), 2.0).unwrap();
    assert!(section_dominates_ball_check(&set, &Vector::zeros(6), &frame, &g, &too_big).is_err());
}
