//! Dense two-phase simplex for `min cᵀy` subject to `A y <= b`, `y >= 0`.
//!
//! Pivoting follows Bland's rule, which cannot cycle. Sized for the small
//! section programs of the polytope oracle.

use crate::error::{Result, RsfwError};
use crate::linalg::Matrix;

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    /// Reduced-cost row, same width; last entry is minus the objective.
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.cols + 1;
        let p = self.t[r][c];
        for j in 0..width {
            self.t[r][j] /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for j in 0..width {
                        row[j] -= f * pivot_row[j];
                    }
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for j in 0..width {
                self.obj[j] -= f * pivot_row[j];
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs Bland-rule pivots over columns `< allowed`. Returns `Ok(false)` on unboundedness.
    fn optimize(&mut self, allowed: usize) -> Result<bool> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(RsfwError::OracleFailure(format!("simplex exceeded {MAX_PIVOTS} pivots")));
            }
            let Some(enter) = (0..allowed).find(|&j| self.obj[j] < -PIVOT_TOL) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[enter];
                if a > PIVOT_TOL {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14 * lr.abs().max(1.0)
                                || (ratio <= lr + 1e-14 * lr.abs().max(1.0) && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }
}

pub fn minimize_leq(c: &[f64], a: &Matrix, b: &[f64]) -> Result<LpSolution> {
    let (m, k) = a.shape();
    if c.len() != k || b.len() != m {
        return Err(RsfwError::DimensionMismatch { expected: k, got: c.len() });
    }
    let negative: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let n_art = negative.len();
    let cols = k + m + n_art;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0usize; m];
    let mut art = 0;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..k {
            t[i][j] = sign * a[(i, j)];
        }
        t[i][k + i] = sign;
        t[i][cols] = sign * b[i];
        if b[i] < 0.0 {
            t[i][k + m + art] = 1.0;
            basis[i] = k + m + art;
            art += 1;
        } else {
            basis[i] = k + i;
        }
    }
    let mut tab = Tableau { t, obj: vec![0.0; cols + 1], basis, cols, pivots: 0 };

    if n_art > 0 {
        // Phase one: minimize the sum of artificials.
        for j in k + m..cols {
            tab.obj[j] = 1.0;
        }
        for &i in &negative {
            for j in 0..=cols {
                tab.obj[j] -= tab.t[i][j];
            }
        }
        tab.optimize(cols)?;
        if -tab.obj[cols] > 1e-9 {
            return Err(RsfwError::Infeasible("linear program has no feasible point".into()));
        }
        // Drive remaining artificials out of the basis.
        for r in 0..m {
            if tab.basis[r] >= k + m {
                if let Some(c) = (0..k + m).find(|&j| tab.t[r][j].abs() > PIVOT_TOL) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    tab.obj = vec![0.0; cols + 1];
    tab.obj[..k].copy_from_slice(c);
    for r in 0..m {
        let cb = if tab.basis[r] < k { c[tab.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=cols {
                tab.obj[j] -= cb * tab.t[r][j];
            }
        }
    }
    if !tab.optimize(k + m)? {
        return Err(RsfwError::OracleFailure("linear program is unbounded".into()));
    }
    let mut y = vec![0.0; k];
    for r in 0..m {
        if tab.basis[r] < k {
            y[tab.basis[r]] = tab.t[r][cols];
        }
    }
    let objective = c.iter().zip(&y).map(|(ci, yi)| ci * yi).sum();
    Ok(LpSolution { y, objective, pivots: tab.pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3y1 + 5y2 s.t. y1 <= 4, 2y2 <= 12, 3y1 + 2y2 <= 18.
        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 3.0, 2.0]);
        let sol = minimize_leq(&[-3.0, -5.0], &a, &[4.0, 12.0, 18.0]).unwrap();
        assert!((sol.objective + 36.0).abs() < 1e-12);
        assert!((sol.y[0] - 2.0).abs() < 1e-12 && (sol.y[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn phase_one_and_infeasible() {
        // y1 + y2 >= 2 written as -y1 - y2 <= -2, y1 <= 3; min y1 + 2 y2.
        let a = Matrix::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, 0.0]);
        let sol = minimize_leq(&[1.0, 2.0], &a, &[-2.0, 3.0]).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
        let a = Matrix::from_row_slice(2, 1, &[1.0, -1.0]);
        assert!(matches!(minimize_leq(&[1.0], &a, &[1.0, -2.0]), Err(RsfwError::Infeasible(_))));
    }

    #[test]
    fn unbounded_is_reported() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        assert!(matches!(minimize_leq(&[-1.0, 0.0], &a, &[1.0]), Err(RsfwError::OracleFailure(_))));
    }

    #[test]
    fn degenerate_vertex() {
        // Klee-Minty style degeneracy: several constraints tight at the origin.
        let a = Matrix::from_row_slice(3, 2, &[1.0, -1.0, -1.0, 1.0, 1.0, 1.0]);
        let sol = minimize_leq(&[-1.0, -1.0], &a, &[0.0, 0.0, 2.0]).unwrap();
        assert!((sol.objective + 2.0).abs() < 1e-12);
    }
}
