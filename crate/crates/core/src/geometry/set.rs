use std::path::Path;

use serde::{Deserialize, Serialize};

use super::graph::{read_triplets, SparseSym};
use super::{Ball, ConvexBody, Ellipsoid, GeometryConstants, GraphQuartic, SetKind, SimplexPolytope};
use crate::error::{Result, RsfwError};
use crate::linalg::{Matrix, Vector};

/// Any of the supported feasible sets.
#[derive(Debug, Clone)]
pub enum FeasibleSet {
    Ball(Ball),
    Ellipsoid(Ellipsoid),
    GraphQuartic(GraphQuartic),
    SimplexPolytope(SimplexPolytope),
}

/// JSON form of a set: `{"kind": "...", parameters...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetDocument {
    Ball {
        /// Either `center` or `n` (origin-centered).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        radius: f64,
    },
    Ellipsoid {
        /// Dense row-major `M`, or `diag` for a diagonal `M`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diag: Option<Vec<f64>>,
        /// When present the set is `{a : aᵀ H a <= R²}` with `H` given by `m`/`diag`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
    },
    GraphQuartic {
        mu: f64,
        gamma_g: f64,
        beta4: f64,
        tau: f64,
        /// Laplacian triplets inline, or a path to a triplet text file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        triplets: Option<Vec<(usize, usize, f64)>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        laplacian_path: Option<String>,
    },
    SimplexPolytope {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interior_delta: Option<f64>,
    },
}

impl SetDocument {
    /// Relative `laplacian_path` values resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<FeasibleSet> {
        Ok(match self {
            SetDocument::Ball { center, n, radius } => {
                let c = match (center, n) {
                    (Some(c), None) => Vector::from_vec(c.clone()),
                    (None, Some(n)) => Vector::zeros(*n),
                    (Some(c), Some(n)) if c.len() == *n => Vector::from_vec(c.clone()),
                    _ => return Err(RsfwError::InvalidSet("ball needs `center` or `n`".into())),
                };
                FeasibleSet::Ball(Ball::new(c, *radius)?)
            }
            SetDocument::Ellipsoid { m, diag, r } => {
                let mat = match (m, diag) {
                    (Some(rows), None) => {
                        let n = rows.len();
                        if rows.iter().any(|row| row.len() != n) {
                            return Err(RsfwError::InvalidSet("`m` must be square".into()));
                        }
                        Matrix::from_row_iterator(n, n, rows.iter().flatten().copied())
                    }
                    (None, Some(d)) => Matrix::from_diagonal(&Vector::from_vec(d.clone())),
                    _ => return Err(RsfwError::InvalidSet("ellipsoid needs exactly one of `m` or `diag`".into())),
                };
                FeasibleSet::Ellipsoid(match r {
                    Some(r) => Ellipsoid::from_hr(mat, *r)?,
                    None => Ellipsoid::new(mat)?,
                })
            }
            SetDocument::GraphQuartic { mu, gamma_g, beta4, tau, n, triplets, laplacian_path } => {
                let lap = match (triplets, laplacian_path) {
                    (Some(t), None) => {
                        let n = n.unwrap_or_else(|| t.iter().map(|x| x.0.max(x.1) + 1).max().unwrap_or(0));
                        SparseSym::from_triplets(n, t)?
                    }
                    (None, Some(p)) => {
                        let path = match base {
                            Some(b) if Path::new(p).is_relative() => b.join(p),
                            _ => Path::new(p).to_path_buf(),
                        };
                        read_triplets(&path)?
                    }
                    _ => {
                        return Err(RsfwError::InvalidSet(
                            "graph set needs exactly one of `triplets` or `laplacian_path`".into(),
                        ))
                    }
                };
                FeasibleSet::GraphQuartic(GraphQuartic::new(*mu, *gamma_g, lap, *beta4, *tau)?)
            }
            SetDocument::SimplexPolytope { n, interior_delta } => {
                let s = SimplexPolytope::new(*n)?;
                FeasibleSet::SimplexPolytope(match interior_delta {
                    Some(d) => s.with_interior_delta(*d)?,
                    None => s,
                })
            }
        })
    }
}

impl FeasibleSet {
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let doc: SetDocument = serde_json::from_str(text)?;
        doc.build(base)
    }

    /// Inline JSON document for this set.
    pub fn to_document(&self) -> SetDocument {
        match self {
            FeasibleSet::Ball(b) => {
                SetDocument::Ball { center: Some(b.center().iter().copied().collect()), n: None, radius: b.radius() }
            }
            FeasibleSet::Ellipsoid(e) => {
                let m = e.matrix();
                let rows = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
                SetDocument::Ellipsoid { m: Some(rows), diag: None, r: None }
            }
            FeasibleSet::GraphQuartic(g) => SetDocument::GraphQuartic {
                mu: g.mu,
                gamma_g: g.gamma_g,
                beta4: g.beta4,
                tau: g.tau,
                n: Some(g.dim()),
                triplets: Some(g.laplacian().triplets()),
                laplacian_path: None,
            },
            FeasibleSet::SimplexPolytope(s) => {
                SetDocument::SimplexPolytope { n: s.dim(), interior_delta: Some(s.interior_delta()) }
            }
        }
    }

    fn body(&self) -> &dyn ConvexBody {
        match self {
            FeasibleSet::Ball(s) => s,
            FeasibleSet::Ellipsoid(s) => s,
            FeasibleSet::GraphQuartic(s) => s,
            FeasibleSet::SimplexPolytope(s) => s,
        }
    }
}

impl ConvexBody for FeasibleSet {
    fn dim(&self) -> usize {
        self.body().dim()
    }

    fn kind(&self) -> SetKind {
        self.body().kind()
    }

    fn constraint_excess(&self, x: &Vector) -> Result<f64> {
        self.body().constraint_excess(x)
    }

    fn initial_point(&self) -> Vector {
        self.body().initial_point()
    }

    fn geometry(&self) -> Option<GeometryConstants> {
        self.body().geometry()
    }
}
