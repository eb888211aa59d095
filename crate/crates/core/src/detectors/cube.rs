use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{check_scenery, signal_label, DetectorOutcome};
use crate::error::{Error, Result};
use crate::measures::MeasurePair;
use crate::scenery::SceneryWindow;

/// `k(n) = max(2, round((ln n)^(1/(d-1))))`.
pub fn cube_side(n: u64, d: usize) -> Result<usize> {
    if n < 3 || d < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 3 and d >= 2, got n={n}, d={d}")));
    }
    let k = (n as f64).ln().powf(1.0 / (d as f64 - 1.0)).round() as usize;
    Ok(k.max(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeParams {
    /// Defaults to the label maximising `nu - mu`.
    #[serde(default)]
    pub rho_star: Option<usize>,
    /// The frequency threshold is `mu + delta (nu - mu) / 2`. Values above 1
    /// are accepted up to the point where the threshold reaches 1.
    pub delta: f64,
    /// Overrides `k(n)`.
    #[serde(default)]
    pub side: Option<usize>,
}

/// Moving sums of width `k` along `axis` of a row-major array.
fn sliding_sum(data: &[u32], shape: &[usize], axis: usize, k: usize) -> (Vec<u32>, Vec<usize>) {
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let out_len = len - k + 1;
    let mut out = vec![0u32; outer * out_len * inner];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| data[(o * len + j) * inner + i];
            let mut s: u32 = (0..k).map(at).sum();
            out[o * out_len * inner + i] = s;
            for j in 1..out_len {
                s = s + at(j + k - 1) - at(j - 1);
                out[(o * out_len + j) * inner + i] = s;
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = out_len;
    (out, new_shape)
}

/// Highest frequency of `label` over all stride-1 sliding cubes of side
/// `k` inside the window.
pub fn cube_scan_statistic(scenery: &SceneryWindow, label: usize, k: usize) -> Result<f64> {
    let window = scenery.domain().as_box()?;
    if k == 0 || k > window.side() {
        return Err(Error::InvalidParameter(format!(
            "cube side {k} does not fit a window of side {}",
            window.side()
        )));
    }
    let mut data: Vec<u32> = scenery.labels().iter().map(|&l| u32::from(l as usize == label)).collect();
    let mut shape = vec![window.side(); window.dim];
    for axis in 0..window.dim {
        let (d, s) = sliding_sum(&data, &shape, axis, k);
        data = d;
        shape = s;
    }
    let best = data.into_iter().max().unwrap_or(0);
    Ok(best as f64 / (k as f64).powi(window.dim as i32))
}

/// The `delta` whose frequency threshold equals `threshold`.
pub fn delta_for_threshold(pair: &MeasurePair<f64>, label: usize, threshold: f64) -> f64 {
    2.0 * (threshold - pair.mu()[label]) / (pair.nu()[label] - pair.mu()[label])
}

/// Decides perturbed when some cube of side `k(n)` has a frequency of
/// `rho*` above `mu(rho*) + delta (nu(rho*) - mu(rho*)) / 2`.
pub fn cube_scan_detect(scenery: &SceneryWindow, pair: &MeasurePair<f64>, params: &CubeParams) -> Result<DetectorOutcome> {
    check_scenery(scenery, pair)?;
    let label = signal_label(pair, params.rho_star)?;
    let window = scenery.domain().as_box()?;
    let (mu, nu) = (pair.mu()[label], pair.nu()[label]);
    let max_delta = 2.0 * (1.0 - mu) / (nu - mu);
    if !(params.delta > 0.0 && params.delta <= max_delta) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0, {max_delta}], got {}",
            params.delta
        )));
    }
    let k = match params.side {
        Some(k) => k,
        None => cube_side(window.half_width as u64, window.dim)?,
    };
    let statistic = cube_scan_statistic(scenery, label, k)?;
    let threshold = mu + params.delta * (nu - mu) / 2.0;
    Ok(DetectorOutcome::new(
        "cube",
        statistic,
        threshold,
        json!({ "rho_star": label, "delta": params.delta, "side": k }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;
    use crate::scenery::{sample_null, Domain, Provenance};

    fn pair() -> MeasurePair<f64> {
        MeasurePair::new(vec![0.5, 0.5], vec![0.9, 0.1]).unwrap()
    }

    fn constant(n: i64, d: usize, label: u8) -> SceneryWindow {
        let w = LatticeBox::new(d, n).unwrap();
        SceneryWindow::new(Domain::lattice(w), 2, vec![label; w.len()], Provenance::Null, 0).unwrap()
    }

    #[test]
    fn side_examples() {
        assert_eq!(cube_side(403, 2).unwrap(), 6);
        assert_eq!(cube_side(8103, 3).unwrap(), 3);
        assert_eq!(cube_side(3, 2).unwrap(), 2);
        assert!(cube_side(2, 2).is_err());
        assert!(cube_side(10, 1).is_err());
    }

    #[test]
    fn constant_sceneries() {
        let p = CubeParams { rho_star: None, delta: 0.5, side: None };
        let all = cube_scan_detect(&constant(8, 2, 0), &pair(), &p).unwrap();
        assert_eq!(all.statistic, 1.0);
        assert!(all.decision.is_perturbed());
        let none = cube_scan_detect(&constant(8, 2, 1), &pair(), &p).unwrap();
        assert_eq!(none.statistic, 0.0);
        assert!(!none.decision.is_perturbed());
        let wrong = MeasurePair::new(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        assert!(matches!(cube_scan_detect(&constant(8, 2, 0), &wrong, &p), Err(Error::Inapplicable(_))));
        let too_big = CubeParams { delta: 2.6, ..p };
        assert!(cube_scan_detect(&constant(8, 2, 0), &pair(), &too_big).is_err());
    }

    /// Direct maximum over every cube position.
    fn brute(s: &SceneryWindow, k: usize) -> f64 {
        let w = s.domain().as_box().unwrap();
        let side = w.side();
        let mut best = 0;
        for x in 0..=side - k {
            for y in 0..=side - k {
                let mut c = 0;
                for i in 0..k {
                    for j in 0..k {
                        c += usize::from(s.labels()[(x + i) * side + y + j] == 0);
                    }
                }
                best = best.max(c);
            }
        }
        best as f64 / (k * k) as f64
    }

    #[test]
    fn sliding_sums_match_brute_force() {
        let w = LatticeBox::new(2, 7).unwrap();
        for seed in 0..5 {
            let s = sample_null(Domain::lattice(w), &pair(), seed).unwrap();
            for k in [1, 2, 3, 5, 14] {
                assert_eq!(cube_scan_statistic(&s, 0, k).unwrap(), brute(&s, k));
            }
        }
    }

    #[test]
    fn invariant_under_box_symmetries() {
        let w = LatticeBox::new(3, 4).unwrap();
        let s = sample_null(Domain::lattice(w), &pair(), 9).unwrap();
        let base = cube_scan_statistic(&s, 0, 3).unwrap();
        let side = w.side();
        // reflection x -> -x - 1 on the first axis and a swap of the last two
        let mut flipped = vec![0u8; w.len()];
        let mut swapped = vec![0u8; w.len()];
        for a in 0..side {
            for b in 0..side {
                for c in 0..side {
                    let l = s.labels()[(a * side + b) * side + c];
                    flipped[((side - 1 - a) * side + b) * side + c] = l;
                    swapped[(a * side + c) * side + b] = l;
                }
            }
        }
        for labels in [flipped, swapped] {
            let t = SceneryWindow::new(s.domain(), 2, labels, Provenance::Null, 0).unwrap();
            assert_eq!(cube_scan_statistic(&t, 0, 3).unwrap(), base);
        }
    }

    #[test]
    fn deterministic() {
        let w = LatticeBox::new(2, 16).unwrap();
        let s = sample_null(Domain::lattice(w), &pair(), 3).unwrap();
        let p = CubeParams { rho_star: Some(0), delta: 1.0, side: None };
        assert_eq!(cube_scan_detect(&s, &pair(), &p).unwrap(), cube_scan_detect(&s, &pair(), &p).unwrap());
        let d = delta_for_threshold(&pair(), 0, 0.7);
        assert!((d - 1.0).abs() < 1e-12);
    }
}
