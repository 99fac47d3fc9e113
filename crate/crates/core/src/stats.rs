//! Sample statistics with order-deterministic reductions.

use rayon::prelude::*;

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let count = xs.len();
        assert!(count > 0, "summary of an empty sample");
        let mean = pairwise_sum(xs) / count as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if count > 1 { pairwise_sum(&dev) / (count - 1) as f64 } else { 0.0 };
        let std = var.sqrt();
        Self { mean, std, stderr: std / (count as f64).sqrt(), count }
    }
}

/// Sample covariance of two equally long samples.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mx = pairwise_sum(xs) / n as f64;
    let my = pairwise_sum(ys) / n as f64;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    pairwise_sum(&prods) / (n - 1) as f64
}

/// Evaluate `f(0..count)` in parallel, returning results in index order.
pub fn par_map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

pub fn z_score(empirical: f64, theoretical: f64, stderr: f64) -> f64 {
    let diff = empirical - theoretical;
    if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() <= 1e-12 * theoretical.abs().max(1.0) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Median of a sample (mean of the two middle values for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_matches_hand_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.stderr - s.std / 2.0).abs() < 1e-15);
    }

    #[test]
    fn z_score_zero_stderr() {
        assert_eq!(z_score(1.0, 1.0, 0.0), 0.0);
        assert!(z_score(2.0, 1.0, 0.0).is_infinite());
    }

    #[test]
    fn median_and_slope() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_long() {
        let xs = vec![0.1; 1000];
        assert!((pairwise_sum(&xs) - 100.0).abs() < 1e-12);
    }
}
