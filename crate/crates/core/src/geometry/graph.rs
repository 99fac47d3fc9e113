use std::fmt::Write as _;
use std::path::Path;

use super::{ConvexBody, SetKind};
use crate::error::{check_len, Result, RsfwError};
use crate::linalg::{random_unit, Matrix, Vector};
use crate::rng::rng_from_seed;

/// Symmetric sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets, summing duplicates. The
    /// pattern and values must be symmetric to `1e-12`.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(RsfwError::InvalidSet(format!("triplet ({i},{j}) out of range for n={n}")));
            }
            if !v.is_finite() {
                return Err(RsfwError::InvalidSet(format!("non-finite entry at ({i},{j})")));
            }
            sorted.push((i, j, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let s = Self { n, row_ptr, cols, vals };
        for i in 0..n {
            for (j, v) in s.row(i) {
                let vt = s.get(j, i);
                if (v - vt).abs() > 1e-12 * v.abs().max(1.0) {
                    return Err(RsfwError::InvalidSet(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(pos) => self.vals[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn mul(&self, v: &Vector) -> Vector {
        Vector::from_iterator(self.n, (0..self.n).map(|i| self.row(i).map(|(j, a)| a * v[j]).sum::<f64>()))
    }

    pub fn mul_matrix(&self, m: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.n, m.ncols());
        for c in 0..m.ncols() {
            let col = self.mul(&m.column(c).into_owned());
            out.set_column(c, &col);
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }
}

/// Writes `row col value` lines preceded by a `# n <n>` header.
pub fn write_triplets(path: &Path, m: &SparseSym) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# n {}", m.n()).unwrap();
    for (i, j, v) in m.triplets() {
        writeln!(out, "{i} {j} {v:e}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads the triplet format; without a header `n` is one past the largest index.
pub fn read_triplets(path: &Path) -> Result<SparseSym> {
    let text = std::fs::read_to_string(path)?;
    let mut n: Option<usize> = None;
    let mut trips = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            if parts.next() == Some("n") {
                let v = parts.next().and_then(|s| s.parse().ok());
                n = Some(v.ok_or_else(|| RsfwError::Parse(format!("line {}: bad size header", lineno + 1)))?);
            }
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || RsfwError::Parse(format!("line {}: expected `row col value`", lineno + 1));
        if parts.len() != 3 {
            return Err(bad());
        }
        let i: usize = parts[0].parse().map_err(|_| bad())?;
        let j: usize = parts[1].parse().map_err(|_| bad())?;
        let v: f64 = parts[2].parse().map_err(|_| bad())?;
        trips.push((i, j, v));
    }
    let n = n.unwrap_or_else(|| trips.iter().map(|t| t.0.max(t.1) + 1).max().unwrap_or(0));
    SparseSym::from_triplets(n, &trips)
}

/// Graph Laplacian of the union-symmetrized binary kNN graph on planar points.
///
/// Each point links to its `k` nearest others (ties broken by index); an edge
/// is kept when either endpoint selects the other. Exactly coincident points
/// are first separated by a deterministic jitter of `1e-9` times the cloud
/// scale so that neighbor order stays well defined. With `normalized` the
/// result is `I - D^{-1/2} W D^{-1/2}`, otherwise `D - W`.
pub fn make_knn_laplacian(points: &[[f64; 2]], k: usize, normalized: bool) -> Result<SparseSym> {
    let m = points.len();
    if k == 0 || m < k + 1 {
        return Err(RsfwError::InvalidParameter(format!("need k >= 1 and at least k+1 points, got k={k}, m={m}")));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(RsfwError::InvalidParameter("point coordinates must be finite".into()));
    }
    let pts = jitter_duplicates(points);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(m);
    for i in 0..m {
        order.clear();
        for j in 0..m {
            if j != i {
                let dx = pts[i][0] - pts[j][0];
                let dy = pts[i][1] - pts[j][1];
                order.push((dx * dx + dy * dy, j));
            }
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in order.iter().take(k) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<f64> = adj.iter().map(|l| l.len() as f64).collect();
    let mut trips = Vec::with_capacity(m + adj.iter().map(Vec::len).sum::<usize>());
    for i in 0..m {
        trips.push((i, i, if normalized { 1.0 } else { degree[i] }));
        for &j in &adj[i] {
            let w = if normalized { -1.0 / (degree[i] * degree[j]).sqrt() } else { -1.0 };
            trips.push((i, j, w));
        }
    }
    SparseSym::from_triplets(m, &trips)
}

fn jitter_duplicates(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    let scale = points.iter().map(|p| p[0].abs().max(p[1].abs())).fold(1.0f64, f64::max);
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(points[a][1].total_cmp(&points[b][1])).then(a.cmp(&b)));
    let mut run = 0usize;
    for w in 1..idx.len() {
        if points[idx[w]] == points[idx[w - 1]] {
            run += 1;
            let angle = run as f64 * 2.399_963_229_728_653;
            let r = 1e-9 * scale * run as f64;
            pts[idx[w]][0] += r * angle.cos();
            pts[idx[w]][1] += r * angle.sin();
        } else {
            run = 0;
        }
    }
    pts
}

/// `{u : h(u) <= τ}` with `h(u) = μ/2 |u|² + γ_G/2 uᵀ L u + β₄/4 Σ u_i⁴`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphQuartic {
    pub mu: f64,
    pub gamma_g: f64,
    pub beta4: f64,
    pub tau: f64,
    laplacian: SparseSym,
}

/// Sampled geometry constants for the graph body. These are estimates only.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EstimatedGeometry {
    /// `μ / (2 max |∇h|)` over sampled boundary points.
    pub beta_c_estimate: f64,
    pub max_boundary_grad: f64,
    /// Twice the largest sampled boundary radius.
    pub diameter_estimate: f64,
    pub samples: usize,
}

impl GraphQuartic {
    pub fn new(mu: f64, gamma_g: f64, laplacian: SparseSym, beta4: f64, tau: f64) -> Result<Self> {
        if !(mu > 0.0) || !(gamma_g >= 0.0) || !(beta4 >= 0.0) || !(tau > 0.0) {
            return Err(RsfwError::InvalidSet(format!(
                "need mu > 0, gamma_G >= 0, beta4 >= 0, tau > 0 (got {mu}, {gamma_g}, {beta4}, {tau})"
            )));
        }
        if laplacian.n() == 0 {
            return Err(RsfwError::InvalidSet("empty Laplacian".into()));
        }
        Ok(Self { mu, gamma_g, beta4, tau, laplacian })
    }

    pub fn laplacian(&self) -> &SparseSym {
        &self.laplacian
    }

    /// `T v = μ v + γ_G L v`.
    pub fn apply_t(&self, v: &Vector) -> Vector {
        let mut out = v * self.mu;
        if self.gamma_g != 0.0 {
            out.axpy(self.gamma_g, &self.laplacian.mul(v), 1.0);
        }
        out
    }

    pub fn h(&self, u: &Vector) -> f64 {
        let quartic: f64 = u.iter().map(|x| x.powi(4)).sum();
        0.5 * u.dot(&self.apply_t(u)) + 0.25 * self.beta4 * quartic
    }

    pub fn grad_h(&self, u: &Vector) -> Vector {
        let mut g = self.apply_t(u);
        if self.beta4 != 0.0 {
            for (gi, ui) in g.iter_mut().zip(u.iter()) {
                *gi += self.beta4 * ui * ui * ui;
            }
        }
        g
    }

    /// `∇²h(u) v`.
    pub fn hess_apply(&self, u: &Vector, v: &Vector) -> Vector {
        let mut out = self.apply_t(v);
        if self.beta4 != 0.0 {
            for i in 0..v.len() {
                out[i] += 3.0 * self.beta4 * u[i] * u[i] * v[i];
            }
        }
        out
    }

    /// Largest `t` with `h(t w) <= τ`.
    pub fn radial_boundary(&self, w: &Vector) -> f64 {
        let a = 0.5 * w.dot(&self.apply_t(w));
        let b = 0.25 * self.beta4 * w.iter().map(|x| x.powi(4)).sum::<f64>();
        radial_root(a, b, self.tau)
    }

    pub fn estimated_geometry(&self, samples: usize, seed: u64) -> EstimatedGeometry {
        let mut rng = rng_from_seed(seed);
        let n = self.dim();
        let mut max_grad: f64 = 0.0;
        let mut max_radius: f64 = 0.0;
        for _ in 0..samples.max(1) {
            let w = random_unit(n, &mut rng);
            let t = self.radial_boundary(&w);
            max_radius = max_radius.max(t);
            max_grad = max_grad.max(self.grad_h(&(w * t)).norm());
        }
        EstimatedGeometry {
            beta_c_estimate: self.mu / (2.0 * max_grad),
            max_boundary_grad: max_grad,
            diameter_estimate: 2.0 * max_radius,
            samples: samples.max(1),
        }
    }
}

/// Positive root `t` of `a t² + b t⁴ = τ`.
pub(crate) fn radial_root(a: f64, b: f64, tau: f64) -> f64 {
    let t2 = if b <= 0.0 {
        tau / a
    } else {
        // Stable form of (-a + sqrt(a² + 4bτ)) / (2b).
        2.0 * tau / (a + (a * a + 4.0 * b * tau).sqrt())
    };
    t2.sqrt()
}

impl ConvexBody for GraphQuartic {
    fn dim(&self) -> usize {
        self.laplacian.n()
    }

    fn kind(&self) -> SetKind {
        SetKind::GraphQuartic
    }

    fn constraint_excess(&self, x: &Vector) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        Ok((self.h(x) - self.tau) / self.tau)
    }

    fn initial_point(&self) -> Vector {
        Vector::zeros(self.dim())
    }
}
