//! The benchmark workloads must be valid inputs, or the timings measure error paths.

use rsfw::experiments::gen_quadratic_ellipsoid;
use rsfw::oracles::{section_lmo_ball, section_lmo_ellipsoid};
use rsfw::{Ball, ConvexBody, StiefelFrame, Vector};

#[test]
fn bench_inputs_are_feasible_and_nondegenerate() {
    let n = 200;
    let inst = gen_quadratic_ellipsoid(n, 100.0, 3).unwrap();
    let ball = Ball::unit(n);
    let x = Vector::from_fn(n, |i, _| 0.3 / (1.0 + i as f64));
    let grad = Vector::from_fn(n, |i, _| ((i * 7 % 11) as f64 - 5.0) / 5.0);
    assert!(ball.contains(&x).unwrap());
    assert!(inst.set.contains(&x).unwrap());
    for d in [5, 20, 50] {
        let frame = StiefelFrame::sample(n, d, d as u64).unwrap();
        assert!(section_lmo_ball(&ball, &x, &frame, &grad).unwrap().gap > 0.0);
        assert!(section_lmo_ellipsoid(&inst.set, &x, &frame, &grad).unwrap().gap > 0.0);
    }
}
