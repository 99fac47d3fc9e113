//! Full-space and random-section linear minimization oracles.
//!
//! A section oracle minimizes `⟨g, s⟩` over `C ∩ (x + range(Pᵀ))` and reports
//! `s = x + Pᵀz` together with the section gap `⟨g, x - s⟩`.

mod graph;
pub mod lp;

pub use graph::{full_lmo_graph, section_lmo_graph};

use crate::error::{check_len, Result, RsfwError};
use crate::geometry::{Ball, ConvexBody, Ellipsoid, FeasibleSet, GraphQuartic, SimplexPolytope};
use crate::linalg::{Matrix, SpdFactor, Vector};
use crate::stiefel::StiefelFrame;

/// Sections with `δ` at or below this are treated as a single point.
pub const DELTA_TOL: f64 = 1e-12;
/// Negative gaps beyond this (relative) indicate an oracle bug.
pub const NEGATIVE_GAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SectionResult {
    pub s: Vector,
    pub z: Vector,
    pub gap: f64,
    /// Section size `δ`, ellipsoids only.
    pub delta: Option<f64>,
    pub degenerate: bool,
    /// `|P g|`.
    pub pg_norm: f64,
}

impl SectionResult {
    fn stationary(x: &Vector, d: usize, delta: Option<f64>, pg_norm: f64) -> Self {
        Self { s: x.clone(), z: Vector::zeros(d), gap: 0.0, delta, degenerate: true, pg_norm }
    }

    fn from_z(x: &Vector, frame: &StiefelFrame, pg: &Vector, z: Vector, delta: Option<f64>) -> Result<Self> {
        let raw = -pg.dot(&z);
        let gap = clamp_gap(raw, pg.norm() * z.norm())?;
        if gap == 0.0 {
            // No section point improves on x; return x itself rather than a roundoff-level step.
            return Ok(Self { s: x.clone(), z: Vector::zeros(z.len()), gap, delta, degenerate: false, pg_norm: pg.norm() });
        }
        let s = x + frame.lift(&z)?;
        Ok(Self { s, z, gap, delta, degenerate: false, pg_norm: pg.norm() })
    }

    /// `s - x`.
    pub fn direction(&self, x: &Vector) -> Vector {
        &self.s - x
    }
}

fn clamp_gap(raw: f64, scale: f64) -> Result<f64> {
    if raw < -NEGATIVE_GAP_TOL * scale.max(1.0) {
        return Err(RsfwError::NegativeGap(raw));
    }
    Ok(raw.max(0.0))
}

/// Linear minimization over a set and over its affine sections.
pub trait SectionOracle: ConvexBody {
    fn full_lmo(&self, g: &Vector) -> Result<Vector>;

    fn section_lmo(&self, x: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<SectionResult>;
}

fn check_section_inputs<S: ConvexBody + ?Sized>(set: &S, x: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<()> {
    check_len(set.dim(), x.len())?;
    check_len(set.dim(), g.len())?;
    check_len(set.dim(), frame.n())?;
    if !set.contains(x)? {
        return Err(RsfwError::Infeasible(format!(
            "base point violates the constraint by {:e}",
            set.constraint_excess(x)?
        )));
    }
    Ok(())
}

/// Postcondition audit used in debug and test builds.
fn audit<S: ConvexBody + ?Sized>(set: &S, x: &Vector, frame: &StiefelFrame, r: &SectionResult) -> Result<()> {
    if cfg!(debug_assertions) {
        let excess = set.constraint_excess(&r.s)?;
        if excess > 1e-10 {
            return Err(RsfwError::OracleFailure(format!("section point infeasible by {excess:e}")));
        }
        let d = &r.s - x;
        let p = frame.rows();
        let off = (&d - p.transpose() * (p * &d)).norm();
        if off > 1e-10 * (1.0 + d.norm()) {
            return Err(RsfwError::OracleFailure(format!("step leaves the section by {off:e}")));
        }
    }
    Ok(())
}

fn nonzero_gradient(g: &Vector) -> Result<f64> {
    let norm = g.norm();
    if norm == 0.0 {
        Err(RsfwError::ZeroGradient)
    } else {
        Ok(norm)
    }
}

/// `c - r g/|g|`.
pub fn full_lmo_ball(center: &Vector, radius: f64, g: &Vector) -> Result<Vector> {
    check_len(center.len(), g.len())?;
    let norm = nonzero_gradient(g)?;
    Ok(center - g * (radius / norm))
}

/// `-R H⁻¹g / sqrt(gᵀ H⁻¹ g)` over `{a : aᵀ H a <= R²}`.
pub fn full_lmo_ellipsoid(h: &Matrix, r: f64, g: &Vector) -> Result<Vector> {
    check_len(h.nrows(), g.len())?;
    nonzero_gradient(g)?;
    let f = SpdFactor::new(h)?;
    let w = f.solve(g);
    Ok(-&w * (r / g.dot(&w).sqrt()))
}

/// Exact ball section.
///
/// With `v = (c - x)/r` the minimizer is
/// `z = r P v - r sqrt(1 - |v|² + |Pv|²) Pg/|Pg|`.
pub fn section_lmo_ball(ball: &Ball, x: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<SectionResult> {
    check_section_inputs(ball, x, frame, g)?;
    let pg = frame.project(g)?;
    let pg_norm = pg.norm();
    if pg_norm == 0.0 {
        return Ok(SectionResult::stationary(x, frame.d(), None, 0.0));
    }
    let r = ball.radius();
    let v = (ball.center() - x) / r;
    let pv = frame.project(&v)?;
    let rad = (1.0 - v.norm_squared() + pv.norm_squared()).max(0.0).sqrt();
    let z = &pv * r - &pg * (r * rad / pg_norm);
    let res = SectionResult::from_z(x, frame, &pg, z, None)?;
    audit(ball, x, frame, &res)?;
    Ok(res)
}

/// Exact ellipsoid section via `A = P M Pᵀ`, `b = P M x`,
/// `δ = 1 - xᵀMx + bᵀA⁻¹b`, and
/// `z = -A⁻¹b - sqrt(δ) A⁻¹Pg / sqrt(Pgᵀ A⁻¹ Pg)`.
pub fn section_lmo_ellipsoid(e: &Ellipsoid, x: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<SectionResult> {
    check_section_inputs(e, x, frame, g)?;
    let parts = ellipsoid_section_parts(e, x, frame)?;
    let pg = frame.project(g)?;
    let pg_norm = pg.norm();
    if parts.delta <= DELTA_TOL || pg_norm == 0.0 {
        return Ok(SectionResult::stationary(x, frame.d(), Some(parts.delta), pg_norm));
    }
    let w = parts.factor.solve(&pg);
    let q = pg.dot(&w);
    let z = -&parts.center - w * (parts.delta.sqrt() / q.sqrt());
    let res = SectionResult::from_z(x, frame, &pg, z, Some(parts.delta))?;
    audit(e, x, frame, &res)?;
    Ok(res)
}

/// Reduced quantities of an ellipsoid section.
pub struct EllipsoidSection {
    pub a: Matrix,
    pub b: Vector,
    /// `A⁻¹ b`; the section center in `z` coordinates is `-A⁻¹ b`.
    pub center: Vector,
    pub delta: f64,
    pub factor: SpdFactor,
}

pub fn ellipsoid_section_parts(e: &Ellipsoid, x: &Vector, frame: &StiefelFrame) -> Result<EllipsoidSection> {
    let a = e.compress(frame)?;
    let mx = e.apply(x);
    let b = frame.project(&mx)?;
    let factor = SpdFactor::new(&a)?;
    let center = factor.solve(&b);
    let delta = 1.0 - x.dot(&mx) + b.dot(&center);
    Ok(EllipsoidSection { a, b, center, delta, factor })
}

/// Section LMO over `{x_i >= 0, Σ x_i <= 1}` as a `d`-variable linear program.
pub fn section_lmo_polytope(
    set: &SimplexPolytope,
    x: &Vector,
    frame: &StiefelFrame,
    g: &Vector,
) -> Result<SectionResult> {
    check_section_inputs(set, x, frame, g)?;
    let pg = frame.project(g)?;
    let pg_norm = pg.norm();
    if pg_norm == 0.0 {
        return Ok(SectionResult::stationary(x, frame.d(), None, 0.0));
    }
    let n = set.dim();
    let d = frame.d();
    let pt = frame.rows().transpose();
    // z = z⁺ - z⁻; rows: -(Pᵀz)_i <= x_i and 1ᵀPᵀz <= 1 - 1ᵀx.
    let mut a = Matrix::zeros(n + 1, 2 * d);
    let mut b = vec![0.0; n + 1];
    for i in 0..n {
        for j in 0..d {
            a[(i, j)] = -pt[(i, j)];
            a[(i, d + j)] = pt[(i, j)];
        }
        b[i] = x[i].max(0.0);
    }
    for j in 0..d {
        let col_sum: f64 = pt.column(j).sum();
        a[(n, j)] = col_sum;
        a[(n, d + j)] = -col_sum;
    }
    b[n] = (1.0 - x.sum()).max(0.0);
    let c: Vec<f64> = pg.iter().copied().chain(pg.iter().map(|v| -v)).collect();
    let sol = lp::minimize_leq(&c, &a, &b)?;
    let z = Vector::from_iterator(d, (0..d).map(|j| sol.y[j] - sol.y[d + j]));
    let res = SectionResult::from_z(x, frame, &pg, z, None)?;
    audit(set, x, frame, &res)?;
    Ok(res)
}

/// Checks that the section gap over `set` dominates the section gap over a
/// ball contained in it. Ball and Ellipsoid sets are supported.
pub fn section_dominates_ball_check(
    set: &FeasibleSet,
    x: &Vector,
    frame: &StiefelFrame,
    g: &Vector,
    ball: &Ball,
) -> Result<bool> {
    let contained = match set {
        FeasibleSet::Ball(outer) => ball.inside_ball(outer),
        FeasibleSet::Ellipsoid(e) => {
            let c = ball.center();
            e.contains(c)? && e.boundary_distance(c)? >= ball.radius() * (1.0 - 1e-9) - 1e-12
        }
        _ => return Err(RsfwError::Unsupported("ball containment is checked for balls and ellipsoids".into())),
    };
    if !contained {
        return Err(RsfwError::InvalidParameter("comparison ball is not contained in the set".into()));
    }
    if !ball.contains(x)? {
        return Err(RsfwError::Infeasible("base point is not in the comparison ball".into()));
    }
    let over_set = set.section_lmo(x, frame, g)?;
    let over_ball = section_lmo_ball(ball, x, frame, g)?;
    Ok(over_set.gap >= over_ball.gap - 1e-10)
}

impl SectionOracle for Ball {
    fn full_lmo(&self, g: &Vector) -> Result<Vector> {
        full_lmo_ball(self.center(), self.radius(), g)
    }

    fn section_lmo(&self, x: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<SectionResult> {
        section_lmo_ball(self, x, frame, g)
    }
}

impl SectionOracle for Ellipsoid {
    /// `-M⁻¹g / sqrt(gᵀ M⁻¹ g)`; the feature form uses a Woodbury solve.
    fn full_lmo(&self, g: &Vector) -> Result<Vector> {
        check_len(self.dim(), g.len())?;
        nonzero_gradient(g)?;
        let w = self.solve(g);
        Ok(-&w / g.dot(&w).sqrt())
    }

    fn section_lmo(&self, x: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<SectionResult> {
        section_lmo_ellipsoid(self, x, frame, g)
    }
}

impl SectionOracle for SimplexPolytope {
    /// Best vertex among `0, e_1, ..., e_n`.
    fn full_lmo(&self, g: &Vector) -> Result<Vector> {
        check_len(self.dim(), g.len())?;
        let mut s = Vector::zeros(self.dim());
        let (i, v) = g.argmin();
        if v < 0.0 {
            s[i] = 1.0;
        }
        Ok(s)
    }

    fn section_lmo(&self, x: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<SectionResult> {
        section_lmo_polytope(self, x, frame, g)
    }
}

impl SectionOracle for GraphQuartic {
    fn full_lmo(&self, g: &Vector) -> Result<Vector> {
        full_lmo_graph(self, g)
    }

    fn section_lmo(&self, x: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<SectionResult> {
        let res = section_lmo_graph(self, x, frame, g)?;
        audit(self, x, frame, &res)?;
        Ok(res)
    }
}

impl SectionOracle for FeasibleSet {
    fn full_lmo(&self, g: &Vector) -> Result<Vector> {
        match self {
            FeasibleSet::Ball(s) => s.full_lmo(g),
            FeasibleSet::Ellipsoid(s) => s.full_lmo(g),
            FeasibleSet::GraphQuartic(s) => s.full_lmo(g),
            FeasibleSet::SimplexPolytope(s) => s.full_lmo(g),
        }
    }

    fn section_lmo(&self, x: &Vector, frame: &StiefelFrame, g: &Vector) -> Result<SectionResult> {
        match self {
            FeasibleSet::Ball(s) => s.section_lmo(x, frame, g),
            FeasibleSet::Ellipsoid(s) => s.section_lmo(x, frame, g),
            FeasibleSet::GraphQuartic(s) => s.section_lmo(x, frame, g),
            FeasibleSet::SimplexPolytope(s) => s.section_lmo(x, frame, g),
        }
    }
}

#[cfg(test)]
mod tests;
