//! Feasible sets, membership, and the geometry constants that drive the
//! open-loop step size.
//!
//! Strong convexity follows the ball-inclusion convention: `C` is
//! `β_C`-strongly convex when for all `x, y ∈ C` and `λ ∈ [0,1]`
//! `B(λx + (1-λ)y, β_C λ(1-λ)|x-y|²) ⊂ C`. A ball of radius `r` has
//! `β_C = 1/(2r)`.

mod ellipsoid;
mod graph;
mod set;

pub use ellipsoid::{ellipsoid_geometry, Ellipsoid};
pub use graph::{make_knn_laplacian, read_triplets, write_triplets, EstimatedGeometry, GraphQuartic, SparseSym};
pub use set::{FeasibleSet, SetDocument};

use rand::Rng;

use crate::error::{check_len, Result, RsfwError};
use crate::linalg::{random_unit, Vector};
use crate::rng::rng_from_seed;

/// Slack on every membership test.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Slack used by the strong-convexity witness.
pub const WITNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Ball,
    Ellipsoid,
    GraphQuartic,
    SimplexPolytope,
}

/// A compact convex body in `R^n`.
pub trait ConvexBody: Send + Sync {
    fn dim(&self) -> usize;

    fn kind(&self) -> SetKind;

    /// Normalized excess of the defining inequality; `<= 0` inside.
    fn constraint_excess(&self, x: &Vector) -> Result<f64>;

    fn contains(&self, x: &Vector) -> Result<bool> {
        Ok(self.constraint_excess(x)? <= MEMBERSHIP_TOL)
    }

    /// Default starting point for solvers.
    fn initial_point(&self) -> Vector;

    /// Exact constants when available in closed form.
    fn geometry(&self) -> Option<GeometryConstants> {
        None
    }
}

/// `β_C`, `R_min`, diameter, and the comparison factors derived from them.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GeometryConstants {
    pub beta_c: f64,
    pub r_min: f64,
    pub diameter: f64,
    pub kappa_unif: f64,
    pub beta0: Option<f64>,
}

impl GeometryConstants {
    pub fn new(beta_c: f64, r_min: f64, diameter: f64) -> Result<Self> {
        Ok(Self { beta_c, r_min, diameter, kappa_unif: kappa_unif(beta_c, r_min, diameter)?, beta0: None })
    }

    /// `κ₀ = 2 β_C R_min`.
    pub fn kappa0(&self) -> f64 {
        2.0 * self.beta_c * self.r_min
    }

    /// Outer comparison radius `1/(2β_C)`.
    pub fn r_max(&self) -> f64 {
        0.5 / self.beta_c
    }

    pub fn with_beta0(mut self, n: usize, d: usize) -> Result<Self> {
        self.beta0 = Some(beta0_unif(self.kappa_unif, n, d)?);
        Ok(self)
    }
}

/// `κ_unif = min{2 β_C R_min, R_min / D}`.
pub fn kappa_unif(beta_c: f64, r_min: f64, diameter: f64) -> Result<f64> {
    if !(beta_c > 0.0 && r_min > 0.0 && diameter > 0.0) {
        return Err(RsfwError::InvalidParameter(format!(
            "geometry constants must be positive (beta_c={beta_c}, r_min={r_min}, D={diameter})"
        )));
    }
    Ok((2.0 * beta_c * r_min).min(r_min / diameter))
}

/// `β₀ = κ c_{n,d}` clamped to `(0, 1]`.
///
/// `c_{n,d} = d/n - 4(n-d)/(n(n-1))` when `d >= 3` and that value is
/// positive, otherwise the determinant bound `(d-1)/(96(n-1))`.
pub fn beta0_unif(kappa: f64, n: usize, d: usize) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(RsfwError::InvalidParameter(format!("kappa must lie in (0,1], got {kappa}")));
    }
    if d < 2 || d > n {
        return Err(RsfwError::InvalidDimension(format!("need 2 <= d <= n, got d={d}, n={n}")));
    }
    let c = if n == d {
        1.0
    } else {
        let sharp = if d >= 3 {
            let (nf, df) = (n as f64, d as f64);
            df / nf - 4.0 * (nf - df) / (nf * (nf - 1.0))
        } else {
            0.0
        };
        if sharp > 0.0 {
            sharp
        } else {
            (d as f64 - 1.0) / (96.0 * (n as f64 - 1.0))
        }
    };
    Ok((kappa * c).clamp(f64::MIN_POSITIVE, 1.0))
}

/// Strong-convexity modulus of the parallel body `C + εB₂`:
/// `β_C / (1 + 2 ε β_C)`.
pub fn regularized_beta(beta_c: f64, eps: f64) -> Result<f64> {
    if !(beta_c > 0.0) {
        return Err(RsfwError::InvalidParameter(format!("beta_c must be positive, got {beta_c}")));
    }
    if !(eps >= 0.0) {
        return Err(RsfwError::InvalidParameter(format!("eps must be nonnegative, got {eps}")));
    }
    Ok(beta_c / (1.0 + 2.0 * eps * beta_c))
}

/// Euclidean ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vector,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(RsfwError::InvalidSet(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn unit(n: usize) -> Self {
        Self { center: Vector::zeros(n), radius: 1.0 }
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Whether the ball lies inside `B(other_center, other_radius)`.
    pub fn inside_ball(&self, other: &Ball) -> bool {
        (&self.center - &other.center).norm() + self.radius <= other.radius + MEMBERSHIP_TOL
    }

    /// Membership in the parallel body `B + εB₂`.
    pub fn parallel_contains(&self, x: &Vector, eps: f64) -> Result<bool> {
        check_len(self.dim(), x.len())?;
        Ok((x - &self.center).norm() <= self.radius + eps + MEMBERSHIP_TOL)
    }
}

/// `β_C = 1/(2r)`, `R_min = r`, `D = 2r`.
pub fn ball_geometry(radius: f64) -> Result<GeometryConstants> {
    if !(radius > 0.0) {
        return Err(RsfwError::InvalidSet(format!("ball radius must be positive, got {radius}")));
    }
    GeometryConstants::new(0.5 / radius, radius, 2.0 * radius)
}

impl ConvexBody for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn kind(&self) -> SetKind {
        SetKind::Ball
    }

    fn constraint_excess(&self, x: &Vector) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        Ok((x - &self.center).norm_squared() / (self.radius * self.radius) - 1.0)
    }

    fn initial_point(&self) -> Vector {
        let origin = Vector::zeros(self.dim());
        if self.center.norm() <= self.radius {
            origin
        } else {
            self.center.clone()
        }
    }

    fn geometry(&self) -> Option<GeometryConstants> {
        ball_geometry(self.radius).ok()
    }
}

/// `{x : x_i >= 0, Σ x_i <= 1}`. Compact but not strongly convex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexPolytope {
    n: usize,
    interior_delta: f64,
}

impl SimplexPolytope {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(RsfwError::InvalidSet("simplex dimension must be positive".into()));
        }
        Ok(Self { n, interior_delta: 0.1 })
    }

    /// Starting point `(δ/n) 1` uses this `δ`.
    pub fn with_interior_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(RsfwError::InvalidParameter(format!("interior delta must lie in (0,1), got {delta}")));
        }
        self.interior_delta = delta;
        Ok(self)
    }

    pub fn interior_delta(&self) -> f64 {
        self.interior_delta
    }
}

impl ConvexBody for SimplexPolytope {
    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> SetKind {
        SetKind::SimplexPolytope
    }

    fn constraint_excess(&self, x: &Vector) -> Result<f64> {
        check_len(self.n, x.len())?;
        let neg = -x.min();
        Ok(neg.max(x.sum() - 1.0))
    }

    fn initial_point(&self) -> Vector {
        Vector::from_element(self.n, self.interior_delta / self.n as f64)
    }
}

/// Probe the inclusion `B(λx + (1-λ)y, β λ(1-λ)|x-y|²) ⊂ C`.
///
/// Probes lie on the boundary sphere of the test ball: `probe_count` uniform
/// directions plus the two directions along the center's position vector.
/// Returns `false` on any probe whose constraint excess exceeds `1e-9`.
pub fn strong_convexity_witness<S: ConvexBody + ?Sized>(
    set: &S,
    beta_c: f64,
    x: &Vector,
    y: &Vector,
    lambda: f64,
    probe_count: usize,
    seed: u64,
) -> Result<bool> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(RsfwError::InvalidParameter(format!("lambda must lie in [0,1], got {lambda}")));
    }
    if !set.contains(x)? || !set.contains(y)? {
        return Err(RsfwError::Infeasible("witness endpoints must lie in the set".into()));
    }
    let center = x * lambda + y * (1.0 - lambda);
    let radius = beta_c * lambda * (1.0 - lambda) * (x - y).norm_squared();
    if radius == 0.0 {
        return Ok(set.constraint_excess(&center)? <= WITNESS_TOL);
    }
    let mut rng = rng_from_seed(seed);
    let mut directions: Vec<Vector> = Vec::with_capacity(probe_count + 2);
    let c_norm = center.norm();
    if c_norm > 0.0 {
        directions.push(&center / c_norm);
        directions.push(-&center / c_norm);
    }
    directions.extend((0..probe_count).map(|_| random_unit(set.dim(), &mut rng)));
    for dir in directions {
        let probe = &center + dir * radius;
        if set.constraint_excess(&probe)? > WITNESS_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Uniform point inside the unit ball of `R^n`.
pub fn random_in_unit_ball<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    let dir = random_unit(n, rng);
    let r: f64 = rng.random::<f64>().powf(1.0 / n as f64);
    dir * r
}
