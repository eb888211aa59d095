use rand::Rng;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use super::{sample_walk, PathSample, StopRule, WalkSpec};
use crate::error::{Error, Result};
use crate::seeds::{stream_rng, SimRng};
use crate::stats::{least_squares, wilson_interval, Z95};

/// `|[X1] ∩ [X2]|`.
pub fn range_intersection(p1: &PathSample, p2: &PathSample) -> Result<usize> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch(p1.dim(), p2.dim()));
    }
    let (small, large) = if p1.visited().len() <= p2.visited().len() {
        (p1.visited(), p2.visited())
    } else {
        (p2.visited(), p1.visited())
    };
    Ok(small.iter().filter(|v| large.contains(v)).count())
}

/// `1 + #{k >= 1 : X1_k = X2_k}` over the common horizon. For oriented walks
/// `|X_k|_1 = k`, so two paths can only meet at equal times and this counts
/// the shared range.
pub fn oriented_intersection_via_difference(p1: &PathSample, p2: &PathSample) -> Result<usize> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch(p1.dim(), p2.dim()));
    }
    for (name, p) in [("first", p1), ("second", p2)] {
        if !p.is_oriented() {
            return Err(Error::NotOriented(format!("{name} path has a non-positive step")));
        }
    }
    if p1.steps() != p2.steps() {
        return Err(Error::InvalidParameter(format!(
            "paths have different lengths: {} vs {}",
            p1.steps(),
            p2.steps()
        )));
    }
    let returns = p1
        .vertices()
        .iter()
        .zip(p2.vertices())
        .skip(1)
        .filter(|(a, b)| a == b)
        .count();
    Ok(1 + returns)
}

/// Shared range size when both paths are cut after `h` steps, for each `h`
/// in `cutoffs`.
pub fn intersection_at_cutoffs(p1: &PathSample, p2: &PathSample, cutoffs: &[usize]) -> Result<Vec<usize>> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch(p1.dim(), p2.dim()));
    }
    let mut first1: FxHashMap<_, usize> = FxHashMap::default();
    for (t, v) in p1.vertices().iter().enumerate() {
        first1.entry(*v).or_insert(t);
    }
    let mut seen2 = FxHashSet::default();
    let mut counts = vec![0usize; cutoffs.len()];
    for (t2, v) in p2.vertices().iter().enumerate() {
        if !seen2.insert(*v) {
            continue;
        }
        if let Some(&t1) = first1.get(v) {
            let t = t1.max(t2);
            for (c, &h) in counts.iter_mut().zip(cutoffs) {
                if t <= h {
                    *c += 1;
                }
            }
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    /// Empirical `P(|[X1] ∩ [X2]| > n)`.
    pub tail: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub available: bool,
    pub reason: Option<String>,
    /// Decay rate `C` in `tail(n) ≈ A e^{-C n}`.
    pub c_hat: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub window: (usize, usize),
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub horizon: usize,
    pub samples: usize,
    pub rows: Vec<TailRow>,
    pub fit: TailFit,
    /// Same estimator on paths cut at `horizon / 2`.
    pub half_horizon_rows: Vec<TailRow>,
    pub half_horizon_fit: TailFit,
}

impl TailReport {
    pub fn tail_at(&self, n: usize) -> f64 {
        self.rows.get(n).map_or(0.0, |r| r.tail)
    }

    /// CSV with columns `n,tail,ci_lo,ci_hi`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,tail,ci_lo,ci_hi\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.n, r.tail, r.ci_lo, r.ci_hi));
        }
        s
    }
}

fn tail_rows(counts: &[usize]) -> Vec<TailRow> {
    let samples = counts.len() as u64;
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; max + 1];
    for &c in counts {
        hist[c] += 1;
    }
    // exceed[n] = #{c > n}
    let mut above = samples;
    (0..=max)
        .map(|n| {
            above -= hist[n];
            let iv = wilson_interval(above, samples, Z95);
            TailRow {
                n,
                tail: above as f64 / samples as f64,
                ci_lo: iv.lo,
                ci_hi: iv.hi,
            }
        })
        .collect()
}

/// Least-squares fit of `ln tail(n)` on `n`. Without an explicit window the
/// fit uses every `n` whose tail is at least `10 / samples`.
pub fn fit_tail(rows: &[TailRow], samples: usize, window: Option<(usize, usize)>) -> TailFit {
    let floor = 10.0 / samples as f64;
    let (lo, hi) = window.unwrap_or_else(|| {
        let hi = rows.iter().take_while(|r| r.tail >= floor).count();
        (0, hi.saturating_sub(1))
    });
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n >= lo && r.n <= hi && r.tail > 0.0)
        .map(|r| (r.n as f64, r.tail.ln()))
        .collect();
    let unavailable = |reason: &str| TailFit {
        available: false,
        reason: Some(reason.to_string()),
        c_hat: None,
        intercept: None,
        r_squared: None,
        window: (lo, hi),
        points: pts.len(),
    };
    if pts.len() < 3 {
        return unavailable("fewer than 3 points in fit window");
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    match least_squares(&x, &y) {
        Some(f) if f.r_squared.is_some() => TailFit {
            available: true,
            reason: None,
            c_hat: Some(-f.slope),
            intercept: Some(f.intercept),
            r_squared: f.r_squared,
            window: (lo, hi),
            points: pts.len(),
        },
        // A flat tail decays at rate zero; R^2 is undefined there.
        Some(f) => TailFit {
            available: true,
            reason: Some("tail is constant over the fit window".into()),
            c_hat: Some(0.0),
            intercept: Some(f.intercept),
            r_squared: None,
            window: (lo, hi),
            points: pts.len(),
        },
        None => unavailable("degenerate fit window"),
    }
}

/// Tail tables at the full and half horizon from per-pair shared-range
/// counts.
pub fn tail_from_counts(
    full: &[usize],
    half: &[usize],
    horizon: usize,
    window: Option<(usize, usize)>,
) -> TailReport {
    let rows = tail_rows(full);
    let fit = fit_tail(&rows, full.len(), window);
    let half_horizon_rows = tail_rows(half);
    let half_horizon_fit = fit_tail(&half_horizon_rows, half.len(), window);
    TailReport {
        horizon,
        samples: full.len(),
        rows,
        fit,
        half_horizon_rows,
        half_horizon_fit,
    }
}

/// Runs `pair` once per sample on its own stream and tabulates the tails.
/// `pair` returns the shared range size at the full and half horizon.
pub fn estimate_tail_with<R, F>(
    samples: usize,
    horizon: usize,
    window: Option<(usize, usize)>,
    rng: &mut R,
    pair: F,
) -> Result<TailReport>
where
    R: Rng + ?Sized,
    F: Fn(&mut SimRng) -> Result<(usize, usize)> + Sync,
{
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 samples, got {samples}"
        )));
    }
    let base: u64 = rng.gen();
    let counts: Vec<(usize, usize)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| pair(&mut stream_rng(base, i)))
        .collect::<Result<_>>()?;
    let (full, half): (Vec<usize>, Vec<usize>) = counts.into_iter().unzip();
    Ok(tail_from_counts(&full, &half, horizon, window))
}

/// Empirical tail of `|[X1] ∩ [X2]|` for independent walks run `horizon`
/// steps, with an exponential fit and the same fit at `horizon / 2`.
pub fn estimate_intersection_tail<R: Rng + ?Sized>(
    spec: &WalkSpec,
    horizon: usize,
    samples: usize,
    window: Option<(usize, usize)>,
    rng: &mut R,
) -> Result<TailReport> {
    let stop = StopRule::FixedSteps { t: horizon as u64 };
    let half = horizon / 2;
    let oriented = spec.is_oriented();
    estimate_tail_with(samples, horizon, window, rng, |r| {
        let a = sample_walk(spec, stop, r)?;
        let b = sample_walk(spec, stop, r)?;
        if oriented {
            let meet: Vec<usize> = a
                .vertices()
                .iter()
                .zip(b.vertices())
                .enumerate()
                .filter(|(_, (x, y))| x == y)
                .map(|(t, _)| t)
                .collect();
            Ok((meet.len(), meet.iter().filter(|&&t| t <= half).count()))
        } else {
            let c = intersection_at_cutoffs(&a, &b, &[horizon, half])?;
            Ok((c[0], c[1]))
        }
    })
}
