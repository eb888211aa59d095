//! Small statistical helpers: Wilson score intervals, least-squares lines,
//! empirical quantiles and batch-means errors.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the exact rate is always inside; clamp away rounding at the ends
    Interval {
        lo: (centre - half).max(0.0).min(p),
        hi: (centre + half).min(1.0).max(p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` when the response has zero variance.
    pub r_squared: Option<f64>,
    pub points: usize,
}

/// Ordinary least squares of `y` on `x`. Needs at least two distinct `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        let ss_res: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let e = b - (intercept + slope * a);
                e * e
            })
            .sum();
        Some(1.0 - ss_res / syy)
    } else {
        None
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
        points: n,
    })
}

/// Empirical quantile by the nearest-rank rule on a sorted copy.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Mean and standard error from `batches` contiguous batch means.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let m = mean(values);
    let b = batches.min(values.len()).max(2);
    let size = values.len() / b;
    if size == 0 {
        return (m, f64::NAN);
    }
    let means: Vec<f64> = (0..b)
        .map(|i| mean(&values[i * size..(i + 1) * size]))
        .collect();
    (m, (variance(&means) / b as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_rate() {
        for trials in [1u64, 5, 10, 200] {
            for k in 0..=trials {
                let iv = wilson_interval(k, trials, Z95);
                assert!(iv.contains(k as f64 / trials as f64));
                assert!(iv.lo >= 0.0 && iv.hi <= 1.0);
            }
        }
        // reference value: 10/100 -> [0.0552, 0.1744]
        let iv = wilson_interval(10, 100, Z95);
        assert!((iv.lo - 0.05523).abs() < 1e-4 && (iv.hi - 0.17437).abs() < 1e-4);
    }

    #[test]
    fn line_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = least_squares(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(least_squares(&x, &[2.0; 4]).unwrap().r_squared, None);
        assert!(least_squares(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn quantiles() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.9), 5.0);
    }
}
